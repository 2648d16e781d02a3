// Wrist acoustic channel simulator: rhythm generation, ground-truth phase
// tracks, and the received multi-carrier signal with static component,
// drift and noise. Produces labeled recordings for tests and desk training.
#pragma once

#include <complex>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "afwave/common.hpp"
#include "afwave/probe.hpp"
#include "afwave/series.hpp"

namespace afwave {

struct BeatTrain {
    std::vector<double> rr_intervals;
    Rhythm rhythm_label = Rhythm::NSR;
    std::uint64_t seed = 0;
    std::vector<std::string> warnings;

    double cv() const {
        if (rr_intervals.empty()) return 0.0;
        const double m = mean(rr_intervals);
        return m > 0 ? stddev(rr_intervals) / m : 0.0;
    }
};

struct ChannelScenario {
    double phase_amplitude = 0.3;           // peak cardiac phase deviation, rad
    std::complex<double> static_offset{0, 0}; // arc-center displacement in I/Q units
    double phase_offset = 0.0;               // hardware-delay phase at the first carrier
    double drift_amplitude = 0.0;            // baseline wander, rad
    double drift_frequency = 0.1;            // Hz, must stay below 0.5
    double noise_snr_db = std::numeric_limits<double>::infinity();
    bool invert = false;
    std::uint64_t noise_seed = 0;

    void validate() const {
        if (phase_amplitude < 0.0 || phase_amplitude > 1.0)
            throw ConfigError("scenario: phase_amplitude must lie in [0, 1] rad");
        if (drift_frequency >= 0.5)
            throw ConfigError("scenario: drift frequency must stay below 0.5 Hz");
        if (noise_snr_db < 0.0)
            throw ConfigError("scenario: noise SNR must be >= 0 dB");
    }
};

namespace detail {

struct RhythmModel {
    double mean_rr;
    double target_cv;
};

inline RhythmModel rhythm_model(Rhythm r) {
    // NSR: tight gaussian jitter. AF: lognormal spread wide enough that the
    // RR irregularity separates the classes (CV <= 0.1 vs >= 0.2).
    if (r == Rhythm::AF) return {0.8, 0.25};
    return {0.8, 0.03};
}

inline std::vector<double> draw_rr(Rhythm rhythm, double duration, Rng& rng,
                                   std::vector<std::string>& warnings) {
    const auto model = rhythm_model(rhythm);
    std::vector<double> rr;
    double total = 0.0;
    // lognormal parameters reproducing mean and CV
    const double sigma = std::sqrt(std::log(1.0 + model.target_cv * model.target_cv));
    const double mu = std::log(model.mean_rr) - 0.5 * sigma * sigma;
    while (total < duration) {
        double v;
        if (rhythm == Rhythm::AF)
            v = std::exp(mu + sigma * rng.gaussian());
        else
            v = model.mean_rr * (1.0 + model.target_cv * rng.gaussian());
        if (v < 0.3) {
            warnings.push_back("RR clamped up to 0.3 s");
            v = 0.3;
        } else if (v > 2.0) {
            warnings.push_back("RR clamped down to 2.0 s");
            v = 2.0;
        }
        rr.push_back(v);
        total += v;
    }
    return rr;
}

} // namespace detail

// Deterministic given (rhythm, duration, seed). The CV contract
// (NSR <= 0.1, AF >= 0.2) is enforced by redrawing from derived streams.
inline BeatTrain generate_beat_train(Rhythm rhythm, double duration, std::uint64_t seed) {
    if (duration <= 0.0) throw ConfigError("beat train: duration must be positive");
    BeatTrain train;
    train.rhythm_label = rhythm;
    train.seed = seed;
    for (std::uint64_t attempt = 0; attempt < 64; ++attempt) {
        Rng rng = fork_rng(seed, attempt);
        train.warnings.clear();
        train.rr_intervals = detail::draw_rr(rhythm, duration, rng, train.warnings);
        const double cv = train.cv();
        const bool ok = rhythm == Rhythm::AF ? cv >= 0.2 : cv <= 0.1;
        if (ok) return train;
    }
    throw TrainingError("beat train: rhythm CV contract not met after 64 redraws");
}

// Ground-truth cardiac phase track: raised-cosine upstroke over the first
// 30% of each RR interval, then exponential decay with tau = 0.3 * RR.
// The track is rescaled so its sampled maximum equals phase_amplitude,
// then the baseline drift term is added.
inline PhaseSeries render_phase_track(const BeatTrain& beats, const ChannelScenario& scenario,
                                      double rate) {
    if (rate < 64.0) throw ConfigError("phase track: rate must be >= 64 Hz");
    scenario.validate();
    PhaseSeries out;
    out.rate = rate;

    double total = 0.0;
    for (double rr : beats.rr_intervals) total += rr;
    const std::size_t n = static_cast<std::size_t>(std::floor(total * rate));
    out.phase.assign(n, 0.0);

    if (scenario.phase_amplitude > 0.0 && !beats.rr_intervals.empty()) {
        double beat_start = 0.0;
        double v_prev = 0.0;
        for (double rr : beats.rr_intervals) {
            const double rise = 0.3 * rr;
            const double tau = 0.3 * rr;
            const std::size_t k0 = static_cast<std::size_t>(std::ceil(beat_start * rate));
            const std::size_t k1 =
                std::min(n, static_cast<std::size_t>(std::ceil((beat_start + rr) * rate)));
            double last = v_prev;
            for (std::size_t k = k0; k < k1; ++k) {
                const double u = static_cast<double>(k) / rate - beat_start;
                double v;
                if (u < rise)
                    v = v_prev + (1.0 - v_prev) * 0.5 * (1.0 - std::cos(kPi * u / rise));
                else
                    v = std::exp(-(u - rise) / tau);
                out.phase[k] = v;
                last = v;
            }
            v_prev = last;
            beat_start += rr;
        }
        double peak = 0.0;
        for (double v : out.phase) peak = std::max(peak, v);
        if (peak > 0.0) {
            const double scale = scenario.phase_amplitude / peak;
            for (double& v : out.phase) v *= scale;
        }
    }

    if (scenario.drift_amplitude != 0.0) {
        const double w = kTwoPi * scenario.drift_frequency / rate;
        for (std::size_t k = 0; k < n; ++k)
            out.phase[k] += scenario.drift_amplitude * std::sin(w * static_cast<double>(k));
    }
    return out;
}

// Received signal model per carrier: the phase-modulated carrier, an
// unmodulated static carrier (arc-center offset), and white noise at the
// configured SNR. The hardware-delay phase offset scales with carrier
// frequency; the static component phase decorrelates across channels.
inline AudioBuffer simulate_received(const ProbeConfig& probe, const PhaseSeries& track,
                                     const ChannelScenario& scenario) {
    probe.validate();
    scenario.validate();
    if (track.rate <= 0.0) throw ConfigError("simulate: track rate must be positive");
    const double ratio = probe.sample_rate / track.rate;
    if (std::abs(ratio - std::round(ratio)) > 1e-9)
        throw ConfigError("simulate: track rate must divide probe sample rate");
    const std::size_t up = static_cast<std::size_t>(std::llround(ratio));

    AudioBuffer out;
    out.sample_rate = probe.sample_rate;
    const std::size_t n = std::min(probe.sample_count(), track.size() * up);
    out.samples.assign(n, 0.0);
    const double sign = scenario.invert ? -1.0 : 1.0;

    // linear interpolation of the track onto the audio clock
    std::vector<double> theta(n);
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t idx = k / up;
        const double frac = static_cast<double>(k % up) / static_cast<double>(up);
        const double a = track.phase[idx];
        const double b = idx + 1 < track.size() ? track.phase[idx + 1] : a;
        theta[k] = sign * (a + (b - a) * frac);
    }

    const double base_carrier = probe.carriers.front();
    const double static_mag = 2.0 * std::abs(scenario.static_offset);
    const double static_arg = std::arg(scenario.static_offset);
    for (std::size_t c = 0; c < probe.carriers.size(); ++c) {
        const double fc = probe.carriers[c];
        const double w = kTwoPi * fc / probe.sample_rate;
        const double theta_p = scenario.phase_offset * fc / base_carrier;
        for (std::size_t k = 0; k < n; ++k)
            out.samples[k] +=
                probe.gains[c] * std::cos(w * static_cast<double>(k) - theta[k] - theta_p);
        if (static_mag > 0.0) {
            // golden-angle spacing keeps the per-channel static phases apart
            const double psi = static_arg + 2.399963229728653 * static_cast<double>(c);
            for (std::size_t k = 0; k < n; ++k)
                out.samples[k] += static_mag * std::cos(w * static_cast<double>(k) - psi);
        }
    }

    if (std::isfinite(scenario.noise_snr_db)) {
        double signal_power = 0.0;
        for (double g : probe.gains) signal_power += 0.5 * g * g;
        const double noise_power = signal_power / std::pow(10.0, scenario.noise_snr_db / 10.0);
        const double sigma = std::sqrt(noise_power);
        Rng rng = fork_rng(scenario.noise_seed, 0xacau);
        for (double& v : out.samples) v += sigma * rng.gaussian();
    }
    return out;
}

// ---- JSON ----------------------------------------------------------------

inline nlohmann::json to_json(const BeatTrain& b) {
    return nlohmann::json{{"rr_intervals", b.rr_intervals},
                          {"rhythm_label", to_string(b.rhythm_label)},
                          {"seed", b.seed},
                          {"warnings", b.warnings}};
}

inline BeatTrain beat_train_from_json(const nlohmann::json& j) {
    BeatTrain b;
    b.rr_intervals = j.at("rr_intervals").get<std::vector<double>>();
    b.rhythm_label = rhythm_from_string(j.at("rhythm_label").get<std::string>());
    b.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("warnings")) b.warnings = j.at("warnings").get<std::vector<std::string>>();
    return b;
}

inline nlohmann::json to_json(const ChannelScenario& s) {
    return nlohmann::json{
        {"phase_amplitude", s.phase_amplitude},
        {"static_offset", {s.static_offset.real(), s.static_offset.imag()}},
        {"phase_offset", s.phase_offset},
        {"drift_amplitude", s.drift_amplitude},
        {"drift_frequency", s.drift_frequency},
        {"noise_snr_db",
         std::isfinite(s.noise_snr_db) ? nlohmann::json(s.noise_snr_db) : nlohmann::json("inf")},
        {"invert", s.invert},
        {"noise_seed", s.noise_seed}};
}

inline ChannelScenario scenario_from_json(const nlohmann::json& j) {
    ChannelScenario s;
    s.phase_amplitude = j.value("phase_amplitude", 0.3);
    if (j.contains("static_offset")) {
        const auto& so = j.at("static_offset");
        s.static_offset = {so.at(0).get<double>(), so.at(1).get<double>()};
    }
    s.phase_offset = j.value("phase_offset", 0.0);
    s.drift_amplitude = j.value("drift_amplitude", 0.0);
    s.drift_frequency = j.value("drift_frequency", 0.1);
    if (j.contains("noise_snr_db") && j.at("noise_snr_db").is_number())
        s.noise_snr_db = j.at("noise_snr_db").get<double>();
    else
        s.noise_snr_db = std::numeric_limits<double>::infinity();
    s.invert = j.value("invert", false);
    s.noise_seed = j.value("noise_seed", std::uint64_t{0});
    return s;
}

} // namespace afwave
