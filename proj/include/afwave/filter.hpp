// Butterworth low-pass / band-pass design (analog prototype -> bilinear ->
// second-order sections) and zero-phase forward-backward filtering.
#pragma once

#include <algorithm>
#include <complex>
#include <span>
#include <vector>

#include "afwave/common.hpp"

namespace afwave {

// One biquad, direct form II transposed. a0 normalized to 1.
struct Biquad {
    double b0, b1, b2;
    double a1, a2;
};

using SosChain = std::vector<Biquad>;

namespace detail {

using cplxd = std::complex<double>;

// Left-half-plane poles of the analog Butterworth prototype (cutoff 1 rad/s).
inline std::vector<cplxd> butter_poles(int order) {
    std::vector<cplxd> poles;
    poles.reserve(static_cast<std::size_t>(order));
    for (int k = 0; k < order; ++k) {
        const double theta = kPi * (2.0 * k + order + 1.0) / (2.0 * order);
        poles.emplace_back(std::cos(theta), std::sin(theta));
    }
    return poles;
}

inline cplxd bilinear_map(cplxd s, double fs2) {
    return (fs2 + s) / (fs2 - s);
}

// Response of an SOS cascade at digital frequency w (rad/sample).
inline cplxd sos_response(const SosChain& sos, double w) {
    const cplxd z1 = std::exp(cplxd(0.0, -w));
    const cplxd z2 = z1 * z1;
    cplxd h(1.0, 0.0);
    for (const auto& s : sos)
        h *= (s.b0 + s.b1 * z1 + s.b2 * z2) / (1.0 + s.a1 * z1 + s.a2 * z2);
    return h;
}

// Pair digital poles (with their conjugates) and attach the given real zero
// pair(s) per section; normalize overall gain to 1 at w_ref.
inline SosChain build_sos(std::vector<cplxd> poles, double zero_a, double zero_b,
                          double w_ref) {
    // keep one representative of each conjugate pair, plus real poles
    std::vector<cplxd> upper;
    std::vector<double> reals;
    for (const auto& p : poles) {
        if (std::abs(p.imag()) < 1e-12)
            reals.push_back(p.real());
        else if (p.imag() > 0)
            upper.push_back(p);
    }
    // sections ordered by increasing pole radius so the high-Q pair comes last
    std::sort(upper.begin(), upper.end(),
              [](const cplxd& a, const cplxd& b) { return std::abs(a) < std::abs(b); });
    std::sort(reals.begin(), reals.end(),
              [](double a, double b) { return std::abs(a) < std::abs(b); });

    SosChain sos;
    for (const auto& p : upper) {
        Biquad s{};
        s.b0 = 1.0;
        s.b1 = -(zero_a + zero_b);
        s.b2 = zero_a * zero_b;
        s.a1 = -2.0 * p.real();
        s.a2 = std::norm(p);
        sos.push_back(s);
    }
    // real poles combine in pairs; a leftover single pole forms a 1st-order
    // section (b2 = a2 = 0) with a single zero
    for (std::size_t i = 0; i + 1 < reals.size(); i += 2) {
        Biquad s{};
        s.b0 = 1.0;
        s.b1 = -(zero_a + zero_b);
        s.b2 = zero_a * zero_b;
        s.a1 = -(reals[i] + reals[i + 1]);
        s.a2 = reals[i] * reals[i + 1];
        sos.push_back(s);
    }
    if (reals.size() % 2 == 1) {
        Biquad s{};
        s.b0 = 1.0;
        s.b1 = -zero_a;
        s.b2 = 0.0;
        s.a1 = -reals.back();
        s.a2 = 0.0;
        sos.push_back(s);
    }
    const double g = std::abs(sos_response(sos, w_ref));
    if (g <= 0.0 || !std::isfinite(g))
        throw ConfigError("filter design produced a degenerate response");
    if (!sos.empty()) {
        sos.front().b0 /= g;
        sos.front().b1 /= g;
        sos.front().b2 /= g;
    }
    return sos;
}

} // namespace detail

// Butterworth low-pass, unity gain at DC.
inline SosChain butter_lowpass(int order, double cutoff_hz, double sample_rate) {
    if (order < 1 || cutoff_hz <= 0.0 || cutoff_hz >= sample_rate / 2.0)
        throw ConfigError("butter_lowpass: cutoff must lie in (0, Nyquist)");
    const double fs2 = 2.0 * sample_rate;
    const double warped = fs2 * std::tan(kPi * cutoff_hz / sample_rate);
    auto analog = detail::butter_poles(order);
    std::vector<detail::cplxd> digital;
    digital.reserve(analog.size());
    for (auto p : analog) digital.push_back(detail::bilinear_map(p * warped, fs2));
    // order zeros at z = -1 (from s = infinity)
    return detail::build_sos(std::move(digital), -1.0, -1.0, 0.0);
}

// Butterworth band-pass, unity gain at the geometric center frequency.
// `order` is the analog prototype order; the digital filter has 2*order poles.
inline SosChain butter_bandpass(int order, double lo_hz, double hi_hz, double sample_rate) {
    if (order < 1 || lo_hz <= 0.0 || hi_hz <= lo_hz || hi_hz >= sample_rate / 2.0)
        throw ConfigError("butter_bandpass: band must satisfy 0 < lo < hi < Nyquist");
    const double fs2 = 2.0 * sample_rate;
    const double w_lo = fs2 * std::tan(kPi * lo_hz / sample_rate);
    const double w_hi = fs2 * std::tan(kPi * hi_hz / sample_rate);
    const double w0 = std::sqrt(w_lo * w_hi);
    const double bw = w_hi - w_lo;

    auto prototype = detail::butter_poles(order);
    std::vector<detail::cplxd> analog;
    analog.reserve(2 * prototype.size());
    for (auto p : prototype) {
        const detail::cplxd pb = p * (bw / 2.0);
        const detail::cplxd disc = std::sqrt(pb * pb - w0 * w0);
        analog.push_back(pb + disc);
        analog.push_back(pb - disc);
    }
    std::vector<detail::cplxd> digital;
    digital.reserve(analog.size());
    for (auto p : analog) digital.push_back(detail::bilinear_map(p, fs2));
    // order zeros at z = +1 (s = 0) and order at z = -1 (s = infinity):
    // one of each per biquad
    const double w_center = 2.0 * std::atan(w0 / fs2);
    return detail::build_sos(std::move(digital), 1.0, -1.0, w_center);
}

// Magnitude response of a single pass at f_hz.
inline double sos_gain(const SosChain& sos, double f_hz, double sample_rate) {
    return std::abs(detail::sos_response(sos, kTwoPi * f_hz / sample_rate));
}

namespace detail {

// Steady-state section state for a constant input (matches lfilter_zi): with
// it, a constant signal passes without a startup transient.
inline void steady_state_zi(const Biquad& s, double x, double& z1, double& z2) {
    const double h1 = (s.b0 + s.b1 + s.b2) / (1.0 + s.a1 + s.a2);
    z2 = (s.b2 - s.a2 * h1) * x;
    z1 = (s.b1 - s.a1 * h1) * x + z2;
}

inline void sos_filter_inplace(const SosChain& sos, std::vector<double>& x) {
    for (const auto& s : sos) {
        double z1, z2;
        steady_state_zi(s, x.empty() ? 0.0 : x.front(), z1, z2);
        for (double& v : x) {
            const double in = v;
            const double out = s.b0 * in + z1;
            z1 = s.b1 * in - s.a1 * out + z2;
            z2 = s.b2 * in - s.a2 * out;
            v = out;
        }
    }
}

} // namespace detail

// Zero-phase filtering: odd-reflection padding, forward pass, reverse,
// forward pass again, reverse, trim. Group delay cancels exactly.
inline std::vector<double> filtfilt(const SosChain& sos, std::span<const double> x,
                                    std::size_t pad = 4096) {
    if (x.empty()) return {};
    const std::size_t n = x.size();
    const std::size_t p = std::min(pad, n - 1);
    std::vector<double> ext;
    ext.reserve(n + 2 * p);
    for (std::size_t i = 0; i < p; ++i) ext.push_back(2.0 * x[0] - x[p - i]);
    ext.insert(ext.end(), x.begin(), x.end());
    for (std::size_t i = 0; i < p; ++i) ext.push_back(2.0 * x[n - 1] - x[n - 2 - i]);

    detail::sos_filter_inplace(sos, ext);
    std::reverse(ext.begin(), ext.end());
    detail::sos_filter_inplace(sos, ext);
    std::reverse(ext.begin(), ext.end());

    return std::vector<double>(ext.begin() + static_cast<std::ptrdiff_t>(p),
                               ext.begin() + static_cast<std::ptrdiff_t>(p + n));
}

} // namespace afwave
