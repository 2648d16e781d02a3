// Three-stage pulse wave purification: sliding-window static-component
// elimination in the I/Q plane, best-frequency selection, and SWT-based
// motion artifact removal.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <vector>

#include <json.hpp>

#include "afwave/common.hpp"
#include "afwave/fft.hpp"
#include "afwave/quality.hpp"
#include "afwave/series.hpp"
#include "afwave/swt.hpp"

namespace afwave {

inline constexpr double kArcWindowSeconds = 2.5;
inline constexpr double kArcHopSeconds = 0.5;
inline constexpr double kArcRadiusCoefficient = 5.0; // eta
inline constexpr double kArcGateAngle = kPi / 6.0;
inline constexpr std::size_t kJunctionFadeSamples = 13; // ~0.1 s at 128 Hz

struct PurifyParams {
    double window_seconds = kArcWindowSeconds;
    double hop_seconds = kArcHopSeconds;
    double eta = kArcRadiusCoefficient;
    double gate_angle = kArcGateAngle;
    std::size_t junction_fade = kJunctionFadeSamples;

    void validate() const {
        if (window_seconds <= 0 || hop_seconds <= 0 || hop_seconds > window_seconds)
            throw ConfigError("purify params: need 0 < hop <= window");
        if (eta <= 0 || gate_angle <= 0)
            throw ConfigError("purify params: eta and gate angle must be positive");
    }
};

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(double s) const { return {x * s, y * s}; }
    double dot(Vec2 o) const { return x * o.x + y * o.y; }
    double norm() const { return std::hypot(x, y); }
};

// 90-degree clockwise rotation [[0,1],[-1,0]].
inline Vec2 rotate_clockwise(Vec2 v) { return {v.y, -v.x}; }

struct ArcCenterEstimate {
    Vec2 center;
    Vec2 pc1;           // unit, sign-normalized
    Vec2 diastolic_dir; // pc1 or -pc1
    double d_max = 0.0;
    double eta = kArcRadiusCoefficient;
    double explained_ratio = 0.0; // lambda1 / (lambda1 + lambda2)
};

// Displacements between consecutive I/Q samples.
inline std::vector<Vec2> trajectory_vectors(std::span<const Vec2> points) {
    if (points.size() < 2) throw ConfigError("trajectory_vectors: need >= 2 points");
    std::vector<Vec2> v(points.size() - 1);
    for (std::size_t i = 0; i + 1 < points.size(); ++i) v[i] = points[i + 1] - points[i];
    return v;
}

struct PrincipalDirection {
    Vec2 pc1;
    double explained_ratio; // in [0.5, 1] for 2-D input
};

// First principal direction of the displacement vectors via the closed-form
// eigendecomposition of the uncentered 2x2 second-moment matrix. Vectors are
// displacements already, so no centering. Sign convention: nonnegative first
// coordinate, ties broken toward nonnegative second coordinate.
inline std::optional<PrincipalDirection> primary_direction(std::span<const Vec2> vectors) {
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (const auto& v : vectors) {
        sxx += v.x * v.x;
        sxy += v.x * v.y;
        syy += v.y * v.y;
    }
    const double tr = sxx + syy;
    if (tr <= 0.0) return std::nullopt; // all-zero window
    const double det = sxx * syy - sxy * sxy;
    const double disc = std::sqrt(std::max(0.0, tr * tr / 4.0 - det));
    const double l1 = tr / 2.0 + disc;
    const double l2 = tr / 2.0 - disc;

    Vec2 dir;
    if (std::abs(sxy) > 1e-300) {
        dir = {l1 - syy, sxy};
    } else {
        dir = sxx >= syy ? Vec2{1.0, 0.0} : Vec2{0.0, 1.0};
    }
    const double nn = dir.norm();
    if (nn == 0.0) return std::nullopt;
    dir = dir * (1.0 / nn);
    if (dir.x < 0.0 || (dir.x == 0.0 && dir.y < 0.0)) dir = dir * -1.0;
    return PrincipalDirection{dir, l1 / (l1 + l2)};
}

// Diastole moves slower: pick the side of pc1 whose projected displacements
// have the smaller average magnitude. Ties and one-sided windows fall back
// to the previous window's direction.
inline std::optional<Vec2> diastolic_direction(std::span<const Vec2> vectors, Vec2 pc1,
                                               std::optional<Vec2> previous) {
    double sum_pos = 0.0, sum_neg = 0.0;
    std::size_t n_pos = 0, n_neg = 0;
    for (const auto& v : vectors) {
        const double p = v.dot(pc1);
        if (p > 0.0) {
            sum_pos += p;
            ++n_pos;
        } else if (p < 0.0) {
            sum_neg += -p;
            ++n_neg;
        }
    }
    if (n_pos == 0 || n_neg == 0) return previous;
    const double mean_pos = sum_pos / static_cast<double>(n_pos);
    const double mean_neg = sum_neg / static_cast<double>(n_neg);
    if (mean_pos == mean_neg) return previous;
    return mean_pos < mean_neg ? pc1 : pc1 * -1.0;
}

// Center = centroid + eta * d_max * rotate_clockwise(diastolic direction).
inline std::optional<ArcCenterEstimate> estimate_center(std::span<const Vec2> points,
                                                        std::optional<Vec2> previous_d,
                                                        double eta = kArcRadiusCoefficient) {
    if (points.size() < 3) throw ConfigError("estimate_center: window needs >= 3 points");
    const auto vectors = trajectory_vectors(points);
    const auto pd = primary_direction(vectors);
    if (!pd) return std::nullopt;
    const auto d = diastolic_direction(vectors, pd->pc1, previous_d);
    if (!d) return std::nullopt;

    double d_max = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i)
        for (std::size_t j = i + 1; j < points.size(); ++j)
            d_max = std::max(d_max, (points[i] - points[j]).norm());

    Vec2 centroid{0.0, 0.0};
    for (const auto& p : points) centroid = centroid + p;
    centroid = centroid * (1.0 / static_cast<double>(points.size()));

    ArcCenterEstimate est;
    est.pc1 = pd->pc1;
    est.explained_ratio = pd->explained_ratio;
    est.diastolic_dir = *d;
    est.d_max = d_max;
    est.eta = eta;
    est.center = centroid + rotate_clockwise(*d) * (eta * d_max);
    return est;
}

namespace detail {

struct WindowSpan {
    std::size_t start;
    std::size_t length;
};

// 2.5 s windows advanced by 0.5 s. A partial tail is merged into the final
// full window.
inline std::vector<WindowSpan> arc_windows(std::size_t n, double rate,
                                           const PurifyParams& params = {}) {
    const std::size_t win = static_cast<std::size_t>(std::llround(params.window_seconds * rate));
    const std::size_t hop = static_cast<std::size_t>(std::llround(params.hop_seconds * rate));
    if (win < 3 || hop == 0) throw ConfigError("static elimination: window too short");
    if (n < win) throw ConfigError("static elimination: input shorter than one window");
    std::vector<WindowSpan> spans;
    for (std::size_t s = 0; s + win <= n; s += hop) spans.push_back({s, win});
    if (!spans.empty()) {
        const std::size_t last_end = spans.back().start + spans.back().length;
        if (last_end < n) spans.back().length = n - spans.back().start;
    }
    return spans;
}

inline std::vector<Vec2> iq_points(const IQSeries& iq) {
    std::vector<Vec2> p(iq.size());
    for (std::size_t k = 0; k < iq.size(); ++k) p[k] = {iq.i[k], iq.q[k]};
    return p;
}

// Unwrapped phase about a center, for samples [start, end).
inline std::vector<double> phase_about(const std::vector<Vec2>& pts, Vec2 center,
                                       std::size_t start, std::size_t end) {
    std::vector<double> ph(end - start);
    for (std::size_t k = start; k < end; ++k)
        ph[k - start] = std::atan2(pts[k].y - center.y, pts[k].x - center.x);
    unwrap_inplace(ph);
    return ph;
}

} // namespace detail

struct StaticEliminationResult {
    PhaseSeries phase;
    std::size_t rectified_windows = 0;
    std::size_t degenerate_windows = 0;
    std::size_t total_windows = 0;
    bool passthrough = false; // all windows degenerate: output = plain phase
};

// Sliding-window arc-center rectification. The active center starts at the
// origin (the no-op rectification); a window re-centers only when its
// estimated arc-center direction disagrees with the direction toward the
// active center by more than pi/6. Junctions are cross-faded over ~0.1 s and
// the output is re-unwrapped across each junction to the nearest 2*pi.
inline StaticEliminationResult eliminate_static(const IQSeries& iq,
                                                const PurifyParams& params = {}) {
    params.validate();
    StaticEliminationResult res;
    res.phase.rate = iq.rate;
    res.phase.carrier = iq.carrier;
    const auto pts = detail::iq_points(iq);
    const auto spans = detail::arc_windows(pts.size(), iq.rate, params);
    res.total_windows = spans.size();

    Vec2 active{0.0, 0.0};
    std::vector<double> out = detail::phase_about(pts, active, 0, pts.size());
    std::optional<Vec2> prev_d;

    for (const auto& w : spans) {
        const std::span<const Vec2> window(pts.data() + w.start, w.length);
        const auto est = estimate_center(window, prev_d, params.eta);
        if (!est) {
            ++res.degenerate_windows;
            continue;
        }
        prev_d = est->diastolic_dir;

        Vec2 centroid{0.0, 0.0};
        for (const auto& p : window) centroid = centroid + p;
        centroid = centroid * (1.0 / static_cast<double>(window.size()));

        const Vec2 ref = active - centroid;
        const double ref_norm = ref.norm();
        bool fire = false;
        if (ref_norm > 1e-9 * std::max(est->d_max, 1e-300)) {
            const Vec2 d_arc = rotate_clockwise(est->diastolic_dir);
            const double cosang =
                std::clamp(d_arc.dot(ref) / ref_norm, -1.0, 1.0);
            fire = std::acos(cosang) > params.gate_angle;
        }
        if (!fire) continue;

        ++res.rectified_windows;
        auto fresh = detail::phase_about(pts, est->center, w.start, pts.size());
        if (w.start > 0) {
            // The angle about a different center carries a different constant;
            // align the new branch at the junction so only the waveform
            // difference remains, then cross-fade that difference away.
            const double offset = out[w.start] - fresh.front();
            for (double& v : fresh) v += offset;
            const std::size_t fade = std::min(params.junction_fade, fresh.size());
            for (std::size_t k = 0; k < fade; ++k) {
                const double a = static_cast<double>(k + 1) / static_cast<double>(fade);
                fresh[k] = (1.0 - a) * out[w.start + k] + a * fresh[k];
            }
        }
        std::copy(fresh.begin(), fresh.end(), out.begin() + static_cast<std::ptrdiff_t>(w.start));
        active = est->center;
    }

    if (res.degenerate_windows == res.total_windows) res.passthrough = true;
    res.phase.phase = std::move(out);
    return res;
}

// Mean over windows of the first principal component's explained variance
// ratio; degenerate windows are excluded.
inline double pca_explained_ratio(const IQSeries& iq, const PurifyParams& params = {}) {
    const auto pts = detail::iq_points(iq);
    const auto spans = detail::arc_windows(pts.size(), iq.rate, params);
    double acc = 0.0;
    std::size_t used = 0;
    for (const auto& w : spans) {
        const std::span<const Vec2> window(pts.data() + w.start, w.length);
        const auto vectors = trajectory_vectors(window);
        const auto pd = primary_direction(vectors);
        if (!pd) continue;
        acc += pd->explained_ratio;
        ++used;
    }
    if (used == 0) throw DegenerateSignalError("pca ratio: every window degenerate");
    return acc / static_cast<double>(used);
}

struct BandRatio {
    double value = 0.0;
    bool degenerate = false; // no energy above the 0.2 Hz exclusion band
};

// eta_b: [0.5, 5] Hz energy over (0.2, Nyquist] energy of the de-meaned
// periodogram.
inline BandRatio band_energy_ratio(const PhaseSeries& phase) {
    std::vector<double> x = phase.phase;
    if (x.empty()) throw DegenerateSignalError("band ratio: empty phase");
    const double m = mean(x);
    for (double& v : x) v -= m;
    const auto p = periodogram(x);
    double total_all = 0.0;
    for (double v : p) total_all += v;
    if (total_all <= 0.0) throw DegenerateSignalError("band ratio: zero energy");
    const double e_num =
        band_energy(p, phase.rate, {kCardiacBandLoHz, kCardiacBandHiHz, true, true});
    const double e_den =
        band_energy(p, phase.rate, {kDcExclusionHz, phase.rate / 2.0, false, true});
    if (e_den <= 1e-12 * total_all) return {0.0, true};
    return {e_num / e_den, false};
}

struct ChannelScore {
    std::size_t index = 0;
    double carrier = 0.0;
    double pca_ratio = 0.0;
    double band_ratio = 0.0;
    double combined = 0.0; // S = (P + eta_b) / 2
    std::size_t rectified_windows = 0;
    bool usable = false;
};

struct SelectionResult {
    std::size_t chosen = 0;
    std::vector<ChannelScore> scores;
    std::vector<PhaseSeries> candidates; // post static-elimination phases
};

// Static elimination on every valid channel, then S = (P + eta_b)/2 per
// channel; the winner is the highest S with ties broken toward the lowest
// carrier frequency.
inline SelectionResult select_channel_detailed(const MultiChannelRecord& record) {
    SelectionResult sel;
    sel.candidates.resize(record.channels.size());
    bool any = false;
    double best = -1.0;
    double best_carrier = 0.0;
    for (std::size_t c = 0; c < record.channels.size(); ++c) {
        const auto& ch = record.channels[c];
        ChannelScore score;
        score.index = c;
        score.carrier = ch.iq.carrier;
        if (ch.valid) {
            try {
                auto elim = eliminate_static(ch.iq);
                score.rectified_windows = elim.rectified_windows;
                score.pca_ratio = pca_explained_ratio(ch.iq);
                score.band_ratio = band_energy_ratio(elim.phase).value;
                score.combined = 0.5 * (score.pca_ratio + score.band_ratio);
                score.usable = true;
                sel.candidates[c] = std::move(elim.phase);
            } catch (const std::exception&) {
                score.usable = false;
            }
        }
        if (score.usable) {
            const bool better =
                score.combined > best ||
                (score.combined == best && score.carrier < best_carrier);
            if (!any || better) {
                best = score.combined;
                best_carrier = score.carrier;
                sel.chosen = c;
                any = true;
            }
        }
        sel.scores.push_back(score);
    }
    if (!any) throw InsufficientChannelsError("channel selection: no usable channel");
    return sel;
}

inline std::size_t select_channel(const MultiChannelRecord& record) {
    return select_channel_detailed(record).chosen;
}

// Inverse SWT keeping only c4..c7 (0.5-8 Hz), which strips baseline drift
// (c8) and high-frequency interference (c1..c3).
inline std::vector<double> remove_motion_artifacts(std::span<const double> segment) {
    const auto dec = swt_decompose(segment);
    std::array<bool, kSwtBands> keep{};
    keep.fill(false);
    keep[3] = keep[4] = keep[5] = keep[6] = true; // c4, c5, c6, c7
    return swt_reconstruct(dec, keep);
}

// Full purification: quality gate (unless forced), static elimination on all
// channels, frequency selection, motion artifact removal on the winner.
inline PulseSegment purify(const MultiChannelRecord& record, bool force = false) {
    const QualityReport gate = assess(record);
    if (!gate.pass && !force)
        throw QualityGateError("record failed the quality gate (" + gate.fail_reason +
                               "); pass force to override");

    auto sel = select_channel_detailed(record);
    const auto& winner = sel.candidates[sel.chosen];
    if (winner.size() != record.segment_length)
        throw ConfigError("purify: unexpected candidate length");

    PulseSegment out;
    out.samples = remove_motion_artifacts(winner.phase);
    out.source_carrier = record.channels[sel.chosen].iq.carrier;

    nlohmann::json scores = nlohmann::json::array();
    for (const auto& s : sel.scores) {
        scores.push_back({{"carrier", s.carrier},
                          {"usable", s.usable},
                          {"pca_ratio", s.pca_ratio},
                          {"band_ratio", s.band_ratio},
                          {"combined", s.combined},
                          {"rectified_windows", s.rectified_windows}});
    }
    out.provenance["purify"] = {{"chosen_carrier", out.source_carrier},
                                {"chosen_index", sel.chosen},
                                {"rectified_windows", sel.scores[sel.chosen].rectified_windows},
                                {"channel_scores", scores},
                                {"forced", force}};
    out.provenance["quality"] = to_json(gate);
    if (record.provenance.contains("ground_truth")) {
        out.provenance["ground_truth"] = record.provenance["ground_truth"];
        if (record.provenance["ground_truth"].contains("label"))
            out.label = rhythm_from_string(
                record.provenance["ground_truth"]["label"].get<std::string>());
    }
    return out;
}

} // namespace afwave
