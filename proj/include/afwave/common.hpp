// Shared error types, RNG helpers and small numeric utilities.
#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace afwave {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Invalid configuration (bad carrier layout, gain clipping, rate mismatch, ...).
struct ConfigError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Signal too weak or structurally empty to process.
struct DegenerateSignalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Fewer valid channels than an operation needs.
struct InsufficientChannelsError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A gated stage was invoked on data that failed the upstream gate.
struct QualityGateError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Model/file container problems (corruption, version mismatch).
struct ModelIoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Training diverged (non-finite loss) or was misconfigured.
struct TrainingError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// File format / parse problems for on-disk artifacts.
struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Deterministic RNG: mt19937_64 plus explicit Box-Muller, so streams do not
// depend on the standard library's unspecified distribution algorithms.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1) with 53-bit resolution.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    double gaussian() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
    }

private:
    std::mt19937_64 engine_;
};

// Derive an independent deterministic stream for a sub-task
// (per channel, per trial, per file) so draw order stays irrelevant.
inline Rng fork_rng(std::uint64_t seed, std::uint64_t salt) {
    std::uint64_t s = seed ^ (salt * 0x9e3779b97f4a7c15ull + 0x85ebca6bull);
    s ^= s >> 31;
    return Rng(s);
}

inline double mean(std::span<const double> x) {
    if (x.empty()) return 0.0;
    double s = 0.0;
    for (double v : x) s += v;
    return s / static_cast<double>(x.size());
}

// Population standard deviation.
inline double stddev(std::span<const double> x) {
    if (x.empty()) return 0.0;
    const double m = mean(x);
    double s = 0.0;
    for (double v : x) s += (v - m) * (v - m);
    return std::sqrt(s / static_cast<double>(x.size()));
}

inline double rms(std::span<const double> x) {
    if (x.empty()) return 0.0;
    double s = 0.0;
    for (double v : x) s += v * v;
    return std::sqrt(s / static_cast<double>(x.size()));
}

// Pearson correlation coefficient.
inline double pearson(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size() || a.empty())
        throw ConfigError("pearson: length mismatch or empty input");
    const double ma = mean(a), mb = mean(b);
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double da = a[i] - ma, db = b[i] - mb;
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    if (saa == 0.0 || sbb == 0.0)
        throw DegenerateSignalError("pearson: zero-variance input");
    return sab / std::sqrt(saa * sbb);
}

// Wrap an angle to (-pi, pi].
inline double wrap_angle(double a) {
    a = std::fmod(a, kTwoPi);
    if (a <= -kPi) a += kTwoPi;
    if (a > kPi) a -= kTwoPi;
    return a;
}

// In-place phase unwrapping: successive deltas constrained to (-pi, pi].
inline void unwrap_inplace(std::vector<double>& phase) {
    for (std::size_t i = 1; i < phase.size(); ++i) {
        const double d = wrap_angle(phase[i] - phase[i - 1]);
        phase[i] = phase[i - 1] + d;
    }
}

// FNV-1a 64-bit digest used to stamp input provenance into artifacts.
inline std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (std::uint8_t b : bytes) {
        h ^= b;
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::string fnv1a64_hex(std::span<const std::uint8_t> bytes) {
    static const char* digits = "0123456789abcdef";
    std::uint64_t h = fnv1a64(bytes);
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[h & 0xf];
        h >>= 4;
    }
    return out;
}

} // namespace afwave
