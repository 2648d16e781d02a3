// Minimal 1-D neural network layers with hand-written backpropagation:
// convolution, batch normalization, rectifier, dense, softmax cross-entropy,
// and Adam. Double precision throughout so gradients can be checked against
// central finite differences.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "afwave/common.hpp"

namespace afwave {
namespace nn {

// Batch of 1-D multichannel signals, layout [batch][channel][time].
struct Tensor {
    std::vector<double> data;
    std::size_t batch = 0, channels = 0, length = 0;

    Tensor() = default;
    Tensor(std::size_t b, std::size_t c, std::size_t l)
        : data(b * c * l, 0.0), batch(b), channels(c), length(l) {}

    double& at(std::size_t b, std::size_t c, std::size_t t) {
        return data[(b * channels + c) * length + t];
    }
    double at(std::size_t b, std::size_t c, std::size_t t) const {
        return data[(b * channels + c) * length + t];
    }
    double* row(std::size_t b, std::size_t c) { return data.data() + (b * channels + c) * length; }
    const double* row(std::size_t b, std::size_t c) const {
        return data.data() + (b * channels + c) * length;
    }
};

// Named view of one parameter tensor and its gradient.
struct ParamRef {
    std::string name;
    std::vector<double>* value;
    std::vector<double>* grad;
};

// "Same"-style padding: left gets (k-1)/2, right the remainder, so kernel 32
// pads 15/16 and kernel 3 pads 1/1. Output length is (L-1)/stride + 1.
struct Conv1d {
    std::size_t in_c, out_c, kernel, stride;
    std::size_t pad_l, pad_r;
    std::vector<double> w; // [out_c][in_c][kernel]
    std::vector<double> b; // [out_c]
    std::vector<double> gw, gb;
    Tensor x_cache;

    Conv1d(std::size_t in_channels, std::size_t out_channels, std::size_t k, std::size_t s)
        : in_c(in_channels), out_c(out_channels), kernel(k), stride(s),
          pad_l((k - 1) / 2), pad_r(k - 1 - (k - 1) / 2),
          w(out_channels * in_channels * k, 0.0), b(out_channels, 0.0),
          gw(w.size(), 0.0), gb(out_channels, 0.0) {}

    std::size_t out_len(std::size_t in_len) const { return (in_len - 1) / stride + 1; }

    double& wat(std::size_t oc, std::size_t ic, std::size_t k) {
        return w[(oc * in_c + ic) * kernel + k];
    }

    Tensor forward(const Tensor& x, bool training) {
        if (training) x_cache = x;
        const std::size_t lo = out_len(x.length);
        Tensor y(x.batch, out_c, lo);
        for (std::size_t bi = 0; bi < x.batch; ++bi) {
            for (std::size_t oc = 0; oc < out_c; ++oc) {
                double* yr = y.row(bi, oc);
                for (std::size_t t = 0; t < lo; ++t) yr[t] = b[oc];
                for (std::size_t ic = 0; ic < in_c; ++ic) {
                    const double* xr = x.row(bi, ic);
                    const double* wr = &w[(oc * in_c + ic) * kernel];
                    for (std::size_t k = 0; k < kernel; ++k) {
                        const double wk = wr[k];
                        // valid output range for this tap
                        // need 0 <= t*stride + k - pad_l < x.length
                        std::size_t t0 = 0;
                        if (k < pad_l) t0 = (pad_l - k + stride - 1) / stride;
                        const std::ptrdiff_t max_idx =
                            static_cast<std::ptrdiff_t>(x.length) - 1 -
                            static_cast<std::ptrdiff_t>(k) + static_cast<std::ptrdiff_t>(pad_l);
                        if (max_idx < 0) continue;
                        const std::size_t t1 = std::min(
                            lo, static_cast<std::size_t>(max_idx) / stride + 1);
                        const std::ptrdiff_t off = static_cast<std::ptrdiff_t>(k) -
                                                   static_cast<std::ptrdiff_t>(pad_l);
                        for (std::size_t t = t0; t < t1; ++t)
                            yr[t] += wk * xr[static_cast<std::size_t>(
                                        static_cast<std::ptrdiff_t>(t * stride) + off)];
                    }
                }
            }
        }
        return y;
    }

    Tensor backward(const Tensor& gy) {
        const Tensor& x = x_cache;
        Tensor gx(x.batch, in_c, x.length);
        for (std::size_t bi = 0; bi < x.batch; ++bi) {
            for (std::size_t oc = 0; oc < out_c; ++oc) {
                const double* gyr = gy.row(bi, oc);
                for (std::size_t t = 0; t < gy.length; ++t) gb[oc] += gyr[t];
                for (std::size_t ic = 0; ic < in_c; ++ic) {
                    const double* xr = x.row(bi, ic);
                    double* gxr = gx.row(bi, ic);
                    double* gwr = &gw[(oc * in_c + ic) * kernel];
                    const double* wr = &w[(oc * in_c + ic) * kernel];
                    for (std::size_t k = 0; k < kernel; ++k) {
                        std::size_t t0 = 0;
                        if (k < pad_l) t0 = (pad_l - k + stride - 1) / stride;
                        const std::ptrdiff_t max_idx =
                            static_cast<std::ptrdiff_t>(x.length) - 1 -
                            static_cast<std::ptrdiff_t>(k) + static_cast<std::ptrdiff_t>(pad_l);
                        if (max_idx < 0) continue;
                        const std::size_t t1 = std::min(
                            gy.length, static_cast<std::size_t>(max_idx) / stride + 1);
                        const std::ptrdiff_t off = static_cast<std::ptrdiff_t>(k) -
                                                   static_cast<std::ptrdiff_t>(pad_l);
                        double acc = 0.0;
                        const double wk = wr[k];
                        for (std::size_t t = t0; t < t1; ++t) {
                            const std::size_t xi = static_cast<std::size_t>(
                                static_cast<std::ptrdiff_t>(t * stride) + off);
                            acc += gyr[t] * xr[xi];
                            gxr[xi] += wk * gyr[t];
                        }
                        gwr[k] += acc;
                    }
                }
            }
        }
        return gx;
    }

    void collect(std::vector<ParamRef>& out, const std::string& prefix) {
        out.push_back({prefix + ".w", &w, &gw});
        out.push_back({prefix + ".b", &b, &gb});
    }
};

struct BatchNorm1d {
    std::size_t channels;
    double momentum = 0.9;
    double eps = 1e-5;
    std::vector<double> gamma, beta;
    std::vector<double> running_mean, running_var;
    std::vector<double> ggamma, gbeta;
    // caches for backward
    Tensor xhat_cache;
    std::vector<double> invstd_cache;

    explicit BatchNorm1d(std::size_t c)
        : channels(c), gamma(c, 1.0), beta(c, 0.0), running_mean(c, 0.0), running_var(c, 1.0),
          ggamma(c, 0.0), gbeta(c, 0.0) {}

    Tensor forward(const Tensor& x, bool training) {
        Tensor y(x.batch, x.channels, x.length);
        if (training) {
            xhat_cache = Tensor(x.batch, x.channels, x.length);
            invstd_cache.assign(channels, 0.0);
        }
        const double n = static_cast<double>(x.batch * x.length);
        for (std::size_t c = 0; c < channels; ++c) {
            double mu, var;
            if (training) {
                double s = 0.0;
                for (std::size_t bi = 0; bi < x.batch; ++bi) {
                    const double* xr = x.row(bi, c);
                    for (std::size_t t = 0; t < x.length; ++t) s += xr[t];
                }
                mu = s / n;
                double v = 0.0;
                for (std::size_t bi = 0; bi < x.batch; ++bi) {
                    const double* xr = x.row(bi, c);
                    for (std::size_t t = 0; t < x.length; ++t) v += (xr[t] - mu) * (xr[t] - mu);
                }
                var = v / n;
                running_mean[c] = momentum * running_mean[c] + (1.0 - momentum) * mu;
                running_var[c] = momentum * running_var[c] + (1.0 - momentum) * var;
            } else {
                mu = running_mean[c];
                var = running_var[c];
            }
            const double invstd = 1.0 / std::sqrt(var + eps);
            if (training) invstd_cache[c] = invstd;
            for (std::size_t bi = 0; bi < x.batch; ++bi) {
                const double* xr = x.row(bi, c);
                double* yr = y.row(bi, c);
                double* hr = training ? xhat_cache.row(bi, c) : nullptr;
                for (std::size_t t = 0; t < x.length; ++t) {
                    const double xh = (xr[t] - mu) * invstd;
                    if (hr) hr[t] = xh;
                    yr[t] = gamma[c] * xh + beta[c];
                }
            }
        }
        return y;
    }

    Tensor backward(const Tensor& gy) {
        const Tensor& xh = xhat_cache;
        Tensor gx(gy.batch, gy.channels, gy.length);
        const double n = static_cast<double>(gy.batch * gy.length);
        for (std::size_t c = 0; c < channels; ++c) {
            double sum_gy = 0.0, sum_gy_xh = 0.0;
            for (std::size_t bi = 0; bi < gy.batch; ++bi) {
                const double* gr = gy.row(bi, c);
                const double* hr = xh.row(bi, c);
                for (std::size_t t = 0; t < gy.length; ++t) {
                    sum_gy += gr[t];
                    sum_gy_xh += gr[t] * hr[t];
                }
            }
            ggamma[c] += sum_gy_xh;
            gbeta[c] += sum_gy;
            const double g = gamma[c];
            const double invstd = invstd_cache[c];
            for (std::size_t bi = 0; bi < gy.batch; ++bi) {
                const double* gr = gy.row(bi, c);
                const double* hr = xh.row(bi, c);
                double* xr = gx.row(bi, c);
                for (std::size_t t = 0; t < gy.length; ++t) {
                    xr[t] = g * invstd *
                            (gr[t] - sum_gy / n - hr[t] * sum_gy_xh / n);
                }
            }
        }
        return gx;
    }

    void collect(std::vector<ParamRef>& out, const std::string& prefix) {
        out.push_back({prefix + ".gamma", &gamma, &ggamma});
        out.push_back({prefix + ".beta", &beta, &gbeta});
    }
};

struct Relu {
    Tensor mask;
    // Distance of the closest pre-activation to the kink in the last forward;
    // finite-difference gradient checks need this to stay clear of zero.
    double last_min_abs = 0.0;

    Tensor forward(const Tensor& x, bool training) {
        Tensor y = x;
        if (training) mask = Tensor(x.batch, x.channels, x.length);
        double closest = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < y.data.size(); ++i) {
            const bool on = y.data[i] > 0.0;
            closest = std::min(closest, std::abs(y.data[i]));
            if (training) mask.data[i] = on ? 1.0 : 0.0;
            if (!on) y.data[i] = 0.0;
        }
        last_min_abs = closest;
        return y;
    }

    Tensor backward(const Tensor& gy) {
        Tensor gx = gy;
        for (std::size_t i = 0; i < gx.data.size(); ++i) gx.data[i] *= mask.data[i];
        return gx;
    }
};

// Fully connected layer over flattened [channels*length] features.
struct Dense {
    std::size_t in_dim, out_dim;
    std::vector<double> w; // [out][in]
    std::vector<double> b;
    std::vector<double> gw, gb;
    std::vector<double> x_cache; // [batch][in]
    std::size_t batch_cache = 0;

    Dense(std::size_t in_d, std::size_t out_d)
        : in_dim(in_d), out_dim(out_d), w(in_d * out_d, 0.0), b(out_d, 0.0), gw(w.size(), 0.0),
          gb(out_d, 0.0) {}

    // x: flattened batch rows
    std::vector<double> forward(const std::vector<double>& x, std::size_t batch, bool training) {
        if (training) {
            x_cache = x;
            batch_cache = batch;
        }
        std::vector<double> y(batch * out_dim);
        for (std::size_t bi = 0; bi < batch; ++bi) {
            const double* xr = x.data() + bi * in_dim;
            for (std::size_t o = 0; o < out_dim; ++o) {
                const double* wr = w.data() + o * in_dim;
                double acc = b[o];
                for (std::size_t i = 0; i < in_dim; ++i) acc += wr[i] * xr[i];
                y[bi * out_dim + o] = acc;
            }
        }
        return y;
    }

    std::vector<double> backward(const std::vector<double>& gy) {
        std::vector<double> gx(batch_cache * in_dim, 0.0);
        for (std::size_t bi = 0; bi < batch_cache; ++bi) {
            const double* xr = x_cache.data() + bi * in_dim;
            const double* gr = gy.data() + bi * out_dim;
            double* gxr = gx.data() + bi * in_dim;
            for (std::size_t o = 0; o < out_dim; ++o) {
                const double g = gr[o];
                gb[o] += g;
                double* gwr = gw.data() + o * in_dim;
                const double* wr = w.data() + o * in_dim;
                for (std::size_t i = 0; i < in_dim; ++i) {
                    gwr[i] += g * xr[i];
                    gxr[i] += g * wr[i];
                }
            }
        }
        return gx;
    }

    void collect(std::vector<ParamRef>& out, const std::string& prefix) {
        out.push_back({prefix + ".w", &w, &gw});
        out.push_back({prefix + ".b", &b, &gb});
    }
};

// Log-sum-exp stabilized softmax, rows of `logits` with `classes` entries.
inline std::vector<double> softmax_rows(const std::vector<double>& logits, std::size_t classes) {
    std::vector<double> p(logits.size());
    const std::size_t rows = logits.size() / classes;
    for (std::size_t r = 0; r < rows; ++r) {
        const double* lr = logits.data() + r * classes;
        double m = lr[0];
        for (std::size_t c = 1; c < classes; ++c) m = std::max(m, lr[c]);
        double z = 0.0;
        for (std::size_t c = 0; c < classes; ++c) z += std::exp(lr[c] - m);
        for (std::size_t c = 0; c < classes; ++c) p[r * classes + c] = std::exp(lr[c] - m) / z;
    }
    return p;
}

struct Adam {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::vector<std::vector<double>> m, v;
    std::uint64_t step_count = 0;

    void init(const std::vector<ParamRef>& params) {
        m.clear();
        v.clear();
        for (const auto& p : params) {
            m.emplace_back(p.value->size(), 0.0);
            v.emplace_back(p.value->size(), 0.0);
        }
        step_count = 0;
    }

    void step(const std::vector<ParamRef>& params) {
        ++step_count;
        const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step_count));
        const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step_count));
        for (std::size_t i = 0; i < params.size(); ++i) {
            auto& val = *params[i].value;
            auto& grd = *params[i].grad;
            for (std::size_t j = 0; j < val.size(); ++j) {
                m[i][j] = beta1 * m[i][j] + (1.0 - beta1) * grd[j];
                v[i][j] = beta2 * v[i][j] + (1.0 - beta2) * grd[j] * grd[j];
                const double mh = m[i][j] / bc1;
                const double vh = v[i][j] / bc2;
                val[j] -= lr * mh / (std::sqrt(vh) + eps);
            }
        }
    }
};

inline void zero_grads(const std::vector<ParamRef>& params) {
    for (const auto& p : params)
        std::fill(p.grad->begin(), p.grad->end(), 0.0);
}

} // namespace nn
} // namespace afwave
