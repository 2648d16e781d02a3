// Multi-carrier probe signal: near-ultrasonic tones emitted by the speaker.
#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "afwave/audio.hpp"
#include "afwave/common.hpp"

namespace afwave {

struct ProbeConfig {
    std::vector<double> carriers{18000.0, 19000.0, 20000.0, 21000.0};
    std::vector<double> gains{0.25, 0.25, 0.25, 0.25};
    double sample_rate = 48000.0;
    double duration = 30.0;

    void validate() const {
        if (carriers.empty()) throw ConfigError("probe: no carriers");
        if (gains.size() != carriers.size())
            throw ConfigError("probe: gains/carriers size mismatch");
        if (sample_rate <= 0 || duration <= 0)
            throw ConfigError("probe: sample_rate and duration must be positive");
        double gain_sum = 0.0;
        for (double g : gains) {
            if (g <= 0.0 || g > 1.0)
                throw ConfigError("probe: each gain must lie in (0, 1]");
            gain_sum += g;
        }
        if (gain_sum > 1.0 + 1e-12)
            throw ConfigError("probe: gains sum to " + std::to_string(gain_sum) +
                              " > 1, output would clip");
        std::vector<double> sorted = carriers;
        std::sort(sorted.begin(), sorted.end());
        for (std::size_t i = 0; i < sorted.size(); ++i) {
            if (sorted[i] < 18000.0)
                throw ConfigError("probe: carrier below 18 kHz");
            if (sorted[i] > sample_rate / 2.0 - 1000.0)
                throw ConfigError("probe: carrier too close to Nyquist");
            if (i > 0 && sorted[i] - sorted[i - 1] < 200.0)
                throw ConfigError("probe: adjacent carriers closer than 200 Hz, "
                                  "bandpass bands would overlap");
        }
    }

    std::size_t sample_count() const {
        return static_cast<std::size_t>(std::llround(duration * sample_rate));
    }
};

// S(t) = sum_i gain_i * cos(2*pi*f_i*t).
inline AudioBuffer synthesize_probe(const ProbeConfig& config) {
    config.validate();
    AudioBuffer out;
    out.sample_rate = config.sample_rate;
    const std::size_t n = config.sample_count();
    out.samples.assign(n, 0.0);
    for (std::size_t c = 0; c < config.carriers.size(); ++c) {
        const double w = kTwoPi * config.carriers[c] / config.sample_rate;
        const double g = config.gains[c];
        for (std::size_t k = 0; k < n; ++k)
            out.samples[k] += g * std::cos(w * static_cast<double>(k));
    }
    return out;
}

} // namespace afwave
