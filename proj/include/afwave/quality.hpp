// Quality gate for 30 s records: channel stability score C and cardiac band
// spectrum energy ratio, with the 0.90 / 0.70 acceptance thresholds.
#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "afwave/common.hpp"
#include "afwave/fft.hpp"
#include "afwave/series.hpp"

namespace afwave {

inline constexpr double kStabilityThreshold = 0.90;
inline constexpr double kCardiacRatioThreshold = 0.70;
inline constexpr double kCardiacBandLoHz = 0.5;
inline constexpr double kCardiacBandHiHz = 5.0;
inline constexpr double kDcExclusionHz = 0.2;

struct QualityReport {
    double stability_score = 0.0;
    double cardiac_ratio = 0.0;
    bool pass = false;
    std::vector<std::vector<double>> per_pair_similarity; // NxN, unit diagonal
    std::vector<std::array<double, 2>> per_channel_half_ratios;
    std::string fail_reason;
};

// Plain cosine similarity sum(a*b) / (||a|| * ||b||).
inline double cosine_similarity(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size() || a.empty())
        throw ConfigError("cosine_similarity: length mismatch");
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += a[i] * b[i];
        saa += a[i] * a[i];
        sbb += b[i] * b[i];
    }
    if (saa == 0.0 || sbb == 0.0)
        throw DegenerateSignalError("cosine_similarity: zero-norm input");
    return sab / std::sqrt(saa * sbb);
}

inline double cosine_similarity(const PhaseSeries& a, const PhaseSeries& b) {
    return cosine_similarity(std::span<const double>(a.phase),
                             std::span<const double>(b.phase));
}

namespace detail {

// Pairwise similarities of de-meaned channel phases. The constant phase
// offset is hardware delay, not waveform, so it must not dominate the dot
// products; removing the mean makes the score reflect waveform agreement.
inline std::vector<std::vector<double>> similarity_matrix(
    const std::vector<const std::vector<double>*>& chans) {
    const std::size_t n = chans.size();
    std::vector<std::vector<double>> demeaned(n);
    for (std::size_t i = 0; i < n; ++i) {
        demeaned[i] = *chans[i];
        const double m = mean(demeaned[i]);
        for (double& v : demeaned[i]) v -= m;
    }
    std::vector<std::vector<double>> sim(n, std::vector<double>(n, 1.0));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            double s;
            try {
                s = cosine_similarity(std::span<const double>(demeaned[i]),
                                      std::span<const double>(demeaned[j]));
            } catch (const DegenerateSignalError&) {
                s = 0.0;
            }
            sim[i][j] = sim[j][i] = s;
        }
    }
    return sim;
}

} // namespace detail

// Average pairwise similarity, excluding pairs below 60% of the maximum
// observed pair. The maximal pair itself is always kept.
inline double stability_score_from_matrix(const std::vector<std::vector<double>>& sim) {
    const std::size_t n = sim.size();
    if (n < 2) throw InsufficientChannelsError("stability score needs >= 2 channels");
    double smax = -2.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) smax = std::max(smax, sim[i][j]);
    double acc = 0.0;
    std::size_t kept = 0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            if (sim[i][j] >= 0.6 * smax || sim[i][j] == smax) {
                acc += sim[i][j];
                ++kept;
            }
        }
    }
    return acc / static_cast<double>(kept);
}

inline double stability_score(const std::vector<PhaseSeries>& channels) {
    std::vector<const std::vector<double>*> chans;
    for (const auto& c : channels) chans.push_back(&c.phase);
    if (chans.size() < 2)
        throw InsufficientChannelsError("stability score needs >= 2 channels");
    return stability_score_from_matrix(detail::similarity_matrix(chans));
}

namespace detail {

// Ratio of [0.5, 5] Hz energy to (0.2, Nyquist] energy of one de-meaned half.
inline double half_band_ratio(std::span<const double> half, double rate) {
    std::vector<double> x(half.begin(), half.end());
    const double m = mean(x);
    for (double& v : x) v -= m;
    const auto p = periodogram(x);
    const double e_cardiac =
        band_energy(p, rate, {kCardiacBandLoHz, kCardiacBandHiHz, true, true});
    const double e_total =
        band_energy(p, rate, {kDcExclusionHz, rate / 2.0, false, true});
    if (e_total <= 0.0) return 0.0;
    return e_cardiac / e_total;
}

} // namespace detail

// Per channel: split into halves, take the smaller half ratio; report the
// best channel. All-zero channels are skipped; all channels zero is an error.
inline double cardiac_ratio(const std::vector<PhaseSeries>& channels,
                            std::vector<std::array<double, 2>>* per_channel = nullptr) {
    if (channels.empty()) throw InsufficientChannelsError("cardiac ratio needs channels");
    double best = -1.0;
    if (per_channel) per_channel->assign(channels.size(), {0.0, 0.0});
    for (std::size_t c = 0; c < channels.size(); ++c) {
        const auto& x = channels[c].phase;
        if (x.size() < 2 || x.size() % 2 != 0)
            throw ConfigError("cardiac ratio: segment length must be even");
        const std::size_t h = x.size() / 2;
        bool all_zero = true;
        for (double v : x)
            if (v != 0.0) {
                all_zero = false;
                break;
            }
        if (all_zero) continue;
        const double r1 =
            detail::half_band_ratio(std::span<const double>(x.data(), h), channels[c].rate);
        const double r2 =
            detail::half_band_ratio(std::span<const double>(x.data() + h, h), channels[c].rate);
        if (per_channel) (*per_channel)[c] = {r1, r2};
        best = std::max(best, std::min(r1, r2));
    }
    if (best < 0.0) throw DegenerateSignalError("cardiac ratio: all channels are zero");
    return best;
}

// Full gate: C > 0.90 and cardiac ratio > 0.70. Metric failures turn into a
// failing report with a reason instead of propagating. Invalid channels are
// excluded from both metrics; their report rows stay zero.
inline QualityReport assess(const MultiChannelRecord& record) {
    QualityReport rep;
    const std::size_t n = record.channels.size();
    rep.per_pair_similarity.assign(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) rep.per_pair_similarity[i][i] = 1.0;
    rep.per_channel_half_ratios.assign(n, {0.0, 0.0});

    std::vector<PhaseSeries> valid;
    std::vector<std::size_t> index;
    for (std::size_t c = 0; c < n; ++c) {
        if (record.channels[c].valid) {
            valid.push_back(record.channels[c].phase);
            index.push_back(c);
        }
    }
    try {
        if (valid.size() < 2)
            throw InsufficientChannelsError("fewer than 2 valid channels");
        std::vector<const std::vector<double>*> chans;
        for (const auto& c : valid) chans.push_back(&c.phase);
        const auto sim = detail::similarity_matrix(chans);
        for (std::size_t i = 0; i < index.size(); ++i)
            for (std::size_t j = 0; j < index.size(); ++j)
                rep.per_pair_similarity[index[i]][index[j]] = sim[i][j];
        rep.stability_score = stability_score_from_matrix(sim);

        std::vector<std::array<double, 2>> ratios;
        rep.cardiac_ratio = cardiac_ratio(valid, &ratios);
        for (std::size_t i = 0; i < index.size(); ++i)
            rep.per_channel_half_ratios[index[i]] = ratios[i];

        rep.pass = rep.stability_score > kStabilityThreshold &&
                   rep.cardiac_ratio > kCardiacRatioThreshold;
        if (!rep.pass) {
            rep.fail_reason = rep.stability_score <= kStabilityThreshold
                                  ? "stability score below threshold"
                                  : "cardiac band energy ratio below threshold";
        }
    } catch (const std::exception& e) {
        rep.pass = false;
        rep.fail_reason = e.what();
    }
    return rep;
}

inline nlohmann::json to_json(const QualityReport& r) {
    return nlohmann::json{{"stability_score", r.stability_score},
                          {"cardiac_ratio", r.cardiac_ratio},
                          {"pass", r.pass},
                          {"per_pair_similarity", r.per_pair_similarity},
                          {"per_channel_half_ratios", r.per_channel_half_ratios},
                          {"fail_reason", r.fail_reason}};
}

} // namespace afwave
