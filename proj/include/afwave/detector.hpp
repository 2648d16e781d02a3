// 1-D residual network AF classifier: z-score input normalization, an input
// convolution block, six residual blocks with the 1/4 alternating stride
// pattern, and a batch-norm/rectifier/dense/softmax head. Trained with Adam
// and early stopping on validation F1.
#pragma once

#include <array>
#include <cstring>
#include <fstream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "afwave/common.hpp"
#include "afwave/eval.hpp"
#include "afwave/nn.hpp"
#include "afwave/series.hpp"

namespace afwave {

struct DetectorConfig {
    std::size_t input_len = kSegmentSamples;
    std::size_t channels = 16;
    std::size_t kernel = 32;
    std::vector<std::size_t> block_strides{1, 4, 1, 4, 1, 4};
    std::size_t classes = 2;

    nlohmann::json to_json() const {
        return {{"input_len", input_len},
                {"channels", channels},
                {"kernel", kernel},
                {"block_strides", block_strides},
                {"classes", classes}};
    }

    static DetectorConfig from_json(const nlohmann::json& j) {
        DetectorConfig c;
        c.input_len = j.at("input_len").get<std::size_t>();
        c.channels = j.at("channels").get<std::size_t>();
        c.kernel = j.at("kernel").get<std::size_t>();
        c.block_strides = j.at("block_strides").get<std::vector<std::size_t>>();
        c.classes = j.at("classes").get<std::size_t>();
        return c;
    }
};

struct TrainConfig {
    double learning_rate = 1e-3;
    std::size_t max_epochs = 50;
    std::size_t patience = 10;
    std::size_t batch_size = 16;
    std::uint64_t seed = 0;
};

// Per-segment standardization to zero mean, unit population variance.
inline std::vector<double> zscore(std::span<const double> x) {
    if (x.empty()) throw DegenerateSignalError("zscore: empty segment");
    const double m = mean(x);
    const double s = stddev(x);
    if (s <= 0.0) throw DegenerateSignalError("zscore: zero-variance segment");
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = (x[i] - m) / s;
    return out;
}

namespace detail {

// conv -> bn -> relu -> conv (stride 1) -> bn, identity or 1x1-conv
// shortcut, add, relu.
struct ResidualBlock {
    nn::Conv1d conv1;
    nn::BatchNorm1d bn1;
    nn::Relu relu1;
    nn::Conv1d conv2;
    nn::BatchNorm1d bn2;
    std::optional<nn::Conv1d> shortcut;
    nn::Relu relu_out;
    nn::Tensor sum_cache;

    ResidualBlock(std::size_t channels, std::size_t kernel, std::size_t stride)
        : conv1(channels, channels, kernel, stride),
          bn1(channels),
          conv2(channels, channels, kernel, 1),
          bn2(channels) {
        if (stride != 1) shortcut.emplace(channels, channels, 1, stride);
    }

    nn::Tensor forward(const nn::Tensor& x, bool training) {
        nn::Tensor main = bn2.forward(
            conv2.forward(relu1.forward(bn1.forward(conv1.forward(x, training), training), training),
                          training),
            training);
        nn::Tensor side = shortcut ? shortcut->forward(x, training) : x;
        for (std::size_t i = 0; i < main.data.size(); ++i) main.data[i] += side.data[i];
        return relu_out.forward(main, training);
    }

    nn::Tensor backward(const nn::Tensor& gy) {
        nn::Tensor g = relu_out.backward(gy);
        nn::Tensor g_main = bn2.backward(g);
        g_main = conv2.backward(g_main);
        g_main = relu1.backward(g_main);
        g_main = bn1.backward(g_main);
        g_main = conv1.backward(g_main);
        nn::Tensor g_side = shortcut ? shortcut->backward(g) : g;
        for (std::size_t i = 0; i < g_main.data.size(); ++i) g_main.data[i] += g_side.data[i];
        return g_main;
    }

    void collect(std::vector<nn::ParamRef>& out, const std::string& prefix) {
        conv1.collect(out, prefix + ".conv1");
        bn1.collect(out, prefix + ".bn1");
        conv2.collect(out, prefix + ".conv2");
        bn2.collect(out, prefix + ".bn2");
        if (shortcut) shortcut->collect(out, prefix + ".shortcut");
    }
};

} // namespace detail

class DetectorModel {
public:
    explicit DetectorModel(const DetectorConfig& config = {})
        : config_(config),
          input_conv_(1, config.channels, config.kernel, 1),
          input_bn_(config.channels),
          head_bn_(config.channels),
          head_dense_(config.channels * feature_length(config), config.classes) {
        for (std::size_t s : config.block_strides)
            blocks_.push_back(
                std::make_unique<detail::ResidualBlock>(config.channels, config.kernel, s));
    }

    DetectorModel(const DetectorModel& other) : DetectorModel(other.config_) {
        copy_parameters_from(other);
        metadata_ = other.metadata_;
    }

    DetectorModel& operator=(const DetectorModel& other) {
        if (this != &other) {
            DetectorModel tmp(other);
            swap_with(tmp);
        }
        return *this;
    }

    DetectorModel(DetectorModel&&) = default;
    DetectorModel& operator=(DetectorModel&&) = default;

    const DetectorConfig& config() const { return config_; }
    nlohmann::json& metadata() { return metadata_; }
    const nlohmann::json& metadata() const { return metadata_; }

    static std::size_t feature_length(const DetectorConfig& c) {
        std::size_t len = c.input_len;
        for (std::size_t s : c.block_strides) len = (len - 1) / s + 1;
        return len;
    }

    // Temporal lengths after the input conv and after each block.
    std::vector<std::size_t> shape_chain() const {
        std::vector<std::size_t> lens{config_.input_len};
        std::size_t len = config_.input_len;
        for (std::size_t s : config_.block_strides) {
            len = (len - 1) / s + 1;
            lens.push_back(len);
        }
        return lens;
    }

    // Class probabilities for a batch of z-scored rows.
    std::vector<double> forward_batch(const std::vector<std::vector<double>>& rows,
                                      bool training) {
        const std::size_t bsz = rows.size();
        nn::Tensor x(bsz, 1, config_.input_len);
        for (std::size_t bi = 0; bi < bsz; ++bi) {
            if (rows[bi].size() != config_.input_len)
                throw ConfigError("detector: segment length does not match the model input");
            std::copy(rows[bi].begin(), rows[bi].end(), x.row(bi, 0));
        }
        nn::Tensor h = input_relu_.forward(
            input_bn_.forward(input_conv_.forward(x, training), training), training);
        for (auto& blk : blocks_) h = blk->forward(h, training);
        h = head_relu_.forward(head_bn_.forward(h, training), training);
        flat_batch_ = bsz;
        logits_ = head_dense_.forward(h.data, bsz, training);
        head_shape_ = {h.channels, h.length};
        return nn::softmax_rows(logits_, config_.classes);
    }

    std::vector<double> forward(std::span<const double> zscored) {
        std::vector<std::vector<double>> rows{std::vector<double>(zscored.begin(), zscored.end())};
        return forward_batch(rows, false);
    }

    // Mean weighted cross-entropy over the batch plus gradients for every
    // parameter. class_weights defaults to uniform.
    double loss_and_gradients(const std::vector<std::vector<double>>& rows,
                              const std::vector<int>& labels,
                              const std::vector<double>& class_weights) {
        const std::size_t bsz = rows.size();
        if (labels.size() != bsz || bsz == 0)
            throw ConfigError("loss: batch/labels mismatch or empty batch");
        auto params = parameters();
        nn::zero_grads(params);
        const auto probs = forward_batch(rows, true);

        double weight_sum = 0.0;
        double loss = 0.0;
        for (std::size_t bi = 0; bi < bsz; ++bi) {
            const double w = class_weights[static_cast<std::size_t>(labels[bi])];
            weight_sum += w;
            const double p = probs[bi * config_.classes + static_cast<std::size_t>(labels[bi])];
            loss -= w * std::log(std::max(p, 1e-300));
        }
        loss /= weight_sum;
        if (!std::isfinite(loss)) throw TrainingError("loss is not finite; training diverged");

        std::vector<double> glogits(bsz * config_.classes);
        for (std::size_t bi = 0; bi < bsz; ++bi) {
            const double w = class_weights[static_cast<std::size_t>(labels[bi])];
            for (std::size_t c = 0; c < config_.classes; ++c) {
                const double y = (static_cast<std::size_t>(labels[bi]) == c) ? 1.0 : 0.0;
                glogits[bi * config_.classes + c] =
                    w * (probs[bi * config_.classes + c] - y) / weight_sum;
            }
        }
        std::vector<double> gflat = head_dense_.backward(glogits);
        nn::Tensor g(flat_batch_, head_shape_.first, head_shape_.second);
        g.data = std::move(gflat);
        g = head_bn_.backward(head_relu_.backward(g));
        for (auto it = blocks_.rbegin(); it != blocks_.rend(); ++it) g = (*it)->backward(g);
        g = input_conv_.backward(input_bn_.backward(input_relu_.backward(g)));
        return loss;
    }

    std::vector<nn::ParamRef> parameters() {
        std::vector<nn::ParamRef> out;
        input_conv_.collect(out, "input_conv");
        input_bn_.collect(out, "input_bn");
        for (std::size_t i = 0; i < blocks_.size(); ++i)
            blocks_[i]->collect(out, "block" + std::to_string(i + 1));
        head_bn_.collect(out, "head_bn");
        head_dense_.collect(out, "head_dense");
        return out;
    }

    // Smallest |pre-activation| any rectifier saw in the last forward pass.
    // Finite-difference checks are only meaningful when the stencil does not
    // straddle a rectifier kink, so they require this margin to be healthy.
    double relu_margin() const {
        double m = input_relu_.last_min_abs;
        for (const auto& blk : blocks_) {
            m = std::min(m, blk->relu1.last_min_abs);
            m = std::min(m, blk->relu_out.last_min_abs);
        }
        return std::min(m, head_relu_.last_min_abs);
    }

    // Digest of the rectifier on/off pattern of the last training-mode
    // forward. Two finite-difference evaluations with differing digests
    // straddle a kink, so the stencil is not twice-differentiable there.
    std::uint64_t activation_signature() const {
        std::uint64_t h = 0xcbf29ce484222325ull;
        auto mix = [&h](const nn::Tensor& mask) {
            for (double v : mask.data) {
                h ^= v > 0.0 ? 0x9eu : 0x31u;
                h *= 0x100000001b3ull;
            }
        };
        mix(input_relu_.mask);
        for (const auto& blk : blocks_) {
            mix(blk->relu1.mask);
            mix(blk->relu_out.mask);
        }
        mix(head_relu_.mask);
        return h;
    }

    // Running statistics are state, not parameters; they still belong in the
    // model file.
    std::vector<std::vector<double>*> state_tensors() {
        std::vector<std::vector<double>*> out;
        out.push_back(&input_bn_.running_mean);
        out.push_back(&input_bn_.running_var);
        for (auto& blk : blocks_) {
            out.push_back(&blk->bn1.running_mean);
            out.push_back(&blk->bn1.running_var);
            out.push_back(&blk->bn2.running_mean);
            out.push_back(&blk->bn2.running_var);
        }
        out.push_back(&head_bn_.running_mean);
        out.push_back(&head_bn_.running_var);
        return out;
    }

    // Fan-in scaled uniform init for weights, zero biases, identity batch
    // norm. Values are rounded through float so that a saved model restores
    // bit-exactly.
    void initialize(std::uint64_t seed) {
        Rng rng = fork_rng(seed, 0xd37ec7u);
        auto init_conv = [&](nn::Conv1d& c) {
            const double bound = std::sqrt(6.0 / static_cast<double>(c.in_c * c.kernel));
            for (double& v : c.w)
                v = static_cast<double>(static_cast<float>(rng.uniform(-bound, bound)));
            std::fill(c.b.begin(), c.b.end(), 0.0);
        };
        init_conv(input_conv_);
        for (auto& blk : blocks_) {
            init_conv(blk->conv1);
            init_conv(blk->conv2);
            if (blk->shortcut) init_conv(*blk->shortcut);
        }
        const double bound = std::sqrt(6.0 / static_cast<double>(head_dense_.in_dim));
        for (double& v : head_dense_.w)
            v = static_cast<double>(static_cast<float>(rng.uniform(-bound, bound)));
        std::fill(head_dense_.b.begin(), head_dense_.b.end(), 0.0);
    }

    // Round every parameter and statistic to float32 so serialization is
    // value-preserving.
    void quantize_to_float() {
        for (auto& p : parameters())
            for (double& v : *p.value) v = static_cast<double>(static_cast<float>(v));
        for (auto* s : state_tensors())
            for (double& v : *s) v = static_cast<double>(static_cast<float>(v));
    }

private:
    void copy_parameters_from(const DetectorModel& other) {
        auto dst = parameters();
        auto src = const_cast<DetectorModel&>(other).parameters();
        for (std::size_t i = 0; i < dst.size(); ++i) *dst[i].value = *src[i].value;
        auto dst_s = state_tensors();
        auto src_s = const_cast<DetectorModel&>(other).state_tensors();
        for (std::size_t i = 0; i < dst_s.size(); ++i) *dst_s[i] = *src_s[i];
    }

    void swap_with(DetectorModel& other) {
        std::swap(config_, other.config_);
        std::swap(input_conv_, other.input_conv_);
        std::swap(input_bn_, other.input_bn_);
        std::swap(blocks_, other.blocks_);
        std::swap(head_bn_, other.head_bn_);
        std::swap(head_dense_, other.head_dense_);
        std::swap(metadata_, other.metadata_);
    }

    DetectorConfig config_;
    nn::Conv1d input_conv_;
    nn::BatchNorm1d input_bn_;
    nn::Relu input_relu_;
    std::vector<std::unique_ptr<detail::ResidualBlock>> blocks_;
    nn::BatchNorm1d head_bn_;
    nn::Relu head_relu_;
    nn::Dense head_dense_;
    nlohmann::json metadata_ = nlohmann::json::object();

    std::vector<double> logits_;
    std::size_t flat_batch_ = 0;
    std::pair<std::size_t, std::size_t> head_shape_{0, 0};
};

// ---- training --------------------------------------------------------------

struct LabeledRow {
    std::vector<double> zscored;
    int label = 0; // 0 = NSR, 1 = AF
};

struct EpochStats {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double val_f1 = 0.0;
    bool improved = false;
};

struct TrainResult {
    std::vector<EpochStats> history;
    std::size_t best_epoch = 0;
    double best_val_f1 = 0.0;
};

inline double validation_f1(DetectorModel& model, const std::vector<LabeledRow>& val) {
    ConfusionMatrix cm;
    for (const auto& row : val) {
        const auto p = model.forward(row.zscored);
        const int pred = p[1] > p[0] ? 1 : 0;
        cm.add(pred == 1, row.label == 1);
    }
    const auto m = metrics(cm);
    return m.f1.value_or(0.0);
}

// Adam training with class-weighted cross-entropy, deterministic shuffling,
// early stopping after `patience` epochs without validation-F1 improvement,
// returning the parameters of the best epoch.
inline TrainResult train(DetectorModel& model, const std::vector<LabeledRow>& train_set,
                         const std::vector<LabeledRow>& val_set, const TrainConfig& cfg) {
    if (train_set.empty() || val_set.empty())
        throw ConfigError("train: empty train or validation split");
    if (cfg.learning_rate < 0.0 || cfg.max_epochs < 1)
        throw ConfigError("train: invalid learning rate or epoch count");

    // class weights inversely proportional to frequency
    std::array<std::size_t, 2> counts{0, 0};
    for (const auto& r : train_set) counts[static_cast<std::size_t>(r.label)]++;
    std::vector<double> weights(2, 1.0);
    if (counts[0] > 0 && counts[1] > 0) {
        const double total = static_cast<double>(counts[0] + counts[1]);
        weights[0] = total / (2.0 * static_cast<double>(counts[0]));
        weights[1] = total / (2.0 * static_cast<double>(counts[1]));
    }

    auto params = model.parameters();
    nn::Adam opt;
    opt.lr = cfg.learning_rate;
    opt.init(params);

    TrainResult result;
    DetectorModel best(model);
    double best_f1 = -1.0;
    std::size_t best_epoch = 0;
    std::size_t since_best = 0;

    std::vector<std::size_t> order(train_set.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        Rng shuffle_rng = fork_rng(cfg.seed, 0x5u + epoch);
        for (std::size_t i = order.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(shuffle_rng.next_u64() % i);
            std::swap(order[i - 1], order[j]);
        }
        double epoch_loss = 0.0;
        std::size_t batches = 0;
        for (std::size_t ofs = 0; ofs < order.size(); ofs += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), ofs + cfg.batch_size);
            std::vector<std::vector<double>> rows;
            std::vector<int> labels;
            rows.reserve(end - ofs);
            for (std::size_t i = ofs; i < end; ++i) {
                rows.push_back(train_set[order[i]].zscored);
                labels.push_back(train_set[order[i]].label);
            }
            epoch_loss += model.loss_and_gradients(rows, labels, weights);
            ++batches;
            if (cfg.learning_rate > 0.0) opt.step(params);
        }
        EpochStats st;
        st.epoch = epoch;
        st.train_loss = batches ? epoch_loss / static_cast<double>(batches) : 0.0;
        st.val_f1 = validation_f1(model, val_set);
        st.improved = st.val_f1 > best_f1;
        result.history.push_back(st);
        if (st.improved) {
            best_f1 = st.val_f1;
            best_epoch = epoch;
            best = model;
            since_best = 0;
        } else {
            ++since_best;
            if (since_best >= cfg.patience) break;
        }
    }

    model = best;
    model.quantize_to_float();
    result.best_epoch = best_epoch;
    result.best_val_f1 = best_f1;
    model.metadata()["training"] = {{"best_epoch", best_epoch},
                                    {"best_val_f1", best_f1},
                                    {"epochs_run", result.history.size()},
                                    {"learning_rate", cfg.learning_rate},
                                    {"batch_size", cfg.batch_size},
                                    {"seed", cfg.seed},
                                    {"class_weights", weights}};
    return result;
}

// ---- prediction ------------------------------------------------------------

struct Verdict {
    enum class Decision { AF, NonAF, Abstain } decision = Decision::Abstain;
    double prob_af = 0.0;
    std::string reason;
};

inline std::string to_string(Verdict::Decision d) {
    switch (d) {
        case Verdict::Decision::AF: return "AF";
        case Verdict::Decision::NonAF: return "non-AF";
        default: return "abstain";
    }
}

// Classification of a purified segment. Abstains when the provenance records
// a failed quality gate (a forced purification).
inline Verdict predict(DetectorModel& model, const PulseSegment& segment) {
    Verdict v;
    if (segment.provenance.contains("quality") &&
        segment.provenance["quality"].contains("pass") &&
        !segment.provenance["quality"]["pass"].get<bool>()) {
        v.decision = Verdict::Decision::Abstain;
        v.reason = "quality gate failed upstream";
        return v;
    }
    const auto z = zscore(segment.samples);
    const auto p = model.forward(z);
    v.prob_af = p[1];
    v.decision = p[1] > p[0] ? Verdict::Decision::AF : Verdict::Decision::NonAF;
    return v;
}

// ---- serialization ---------------------------------------------------------

inline constexpr char kModelMagic[4] = {'A', 'F', 'W', 'M'};
inline constexpr std::uint32_t kModelVersion = 1;

inline void save_model(const DetectorModel& model, const std::string& path) {
    auto& m = const_cast<DetectorModel&>(model);
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ModelIoError("cannot open model file for writing: " + path);
    f.write(kModelMagic, 4);
    auto put_u32 = [&](std::uint32_t v) {
        unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                              static_cast<unsigned char>((v >> 8) & 0xff),
                              static_cast<unsigned char>((v >> 16) & 0xff),
                              static_cast<unsigned char>((v >> 24) & 0xff)};
        f.write(reinterpret_cast<char*>(b), 4);
    };
    put_u32(kModelVersion);
    nlohmann::json desc = {{"config", m.config().to_json()}, {"metadata", m.metadata()}};
    const std::string desc_str = desc.dump();
    put_u32(static_cast<std::uint32_t>(desc_str.size()));
    f.write(desc_str.data(), static_cast<std::streamsize>(desc_str.size()));

    auto write_tensor = [&](const std::vector<double>& t) {
        put_u32(static_cast<std::uint32_t>(t.size()));
        for (double v : t) {
            const float fv = static_cast<float>(v);
            std::uint32_t bits;
            std::memcpy(&bits, &fv, 4);
            put_u32(bits);
        }
    };
    for (const auto& p : m.parameters()) write_tensor(*p.value);
    for (const auto* s : m.state_tensors()) write_tensor(*s);
    if (!f) throw ModelIoError("short write: " + path);
}

inline DetectorModel load_model(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ModelIoError("cannot open model file: " + path);
    char magic[4];
    f.read(magic, 4);
    if (!f || std::memcmp(magic, kModelMagic, 4) != 0)
        throw ModelIoError("not a detector model file (bad magic)");
    auto get_u32 = [&]() -> std::uint32_t {
        unsigned char b[4];
        f.read(reinterpret_cast<char*>(b), 4);
        if (!f) throw ModelIoError("truncated model file");
        return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
               (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
    };
    const std::uint32_t version = get_u32();
    if (version != kModelVersion)
        throw ModelIoError("unsupported model format version " + std::to_string(version));
    const std::uint32_t desc_len = get_u32();
    std::string desc_str(desc_len, '\0');
    f.read(desc_str.data(), desc_len);
    if (!f) throw ModelIoError("truncated model file (descriptor)");
    nlohmann::json desc;
    try {
        desc = nlohmann::json::parse(desc_str);
    } catch (const nlohmann::json::parse_error&) {
        throw ModelIoError("corrupt model descriptor");
    }

    DetectorModel model(DetectorConfig::from_json(desc.at("config")));
    model.metadata() = desc.value("metadata", nlohmann::json::object());
    auto read_tensor = [&](std::vector<double>& t) {
        const std::uint32_t n = get_u32();
        if (n != t.size()) throw ModelIoError("model tensor size mismatch");
        for (std::uint32_t i = 0; i < n; ++i) {
            const std::uint32_t bits = get_u32();
            float fv;
            std::memcpy(&fv, &bits, 4);
            t[i] = static_cast<double>(fv);
        }
    };
    for (auto& p : model.parameters()) read_tensor(*p.value);
    for (auto* s : model.state_tensors()) read_tensor(*s);
    return model;
}

} // namespace afwave
