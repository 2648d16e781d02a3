// Pulse wave extraction: per-carrier bandpass, I/Q demodulation, decimation
// to the 128 Hz working rate and four-quadrant phase with unwrapping.
#pragma once

#include <string>
#include <vector>

#include "afwave/audio.hpp"
#include "afwave/common.hpp"
#include "afwave/filter.hpp"
#include "afwave/probe.hpp"
#include "afwave/series.hpp"

namespace afwave {

inline constexpr double kBandpassHalfWidthHz = 50.0;
inline constexpr int kBandpassOrder = 4;
inline constexpr int kIqLowpassOrder = 5;
inline constexpr double kIqLowpassCutoffHz = 50.0;
inline constexpr int kDecimLowpassOrder = 8;
inline constexpr double kDecimLowpassCutoffHz = 50.0;

// Zero-phase Butterworth bandpass at carrier +/- 50 Hz.
inline AudioBuffer bandpass(const AudioBuffer& audio, double carrier) {
    if (carrier - kBandpassHalfWidthHz <= 0.0 ||
        carrier + kBandpassHalfWidthHz >= audio.sample_rate / 2.0)
        throw ConfigError("bandpass: carrier too close to DC or Nyquist");
    const auto sos = butter_bandpass(kBandpassOrder, carrier - kBandpassHalfWidthHz,
                                     carrier + kBandpassHalfWidthHz, audio.sample_rate);
    AudioBuffer out;
    out.sample_rate = audio.sample_rate;
    out.start_time = audio.start_time;
    out.samples = filtfilt(sos, audio.samples);
    return out;
}

// Mix with cos/sin of the carrier and low-pass; for A*cos(2*pi*fc*t - theta)
// the steady state is I = A/2*cos(theta), Q = A/2*sin(theta). Output stays at
// the input rate; decimate() brings it to 128 Hz.
inline IQSeries iq_demodulate(const AudioBuffer& audio, double carrier) {
    const std::size_t n = audio.samples.size();
    std::vector<double> mixed_i(n), mixed_q(n);
    const double w = kTwoPi * carrier / audio.sample_rate;
    for (std::size_t k = 0; k < n; ++k) {
        const double ph = w * static_cast<double>(k);
        mixed_i[k] = audio.samples[k] * std::cos(ph);
        mixed_q[k] = audio.samples[k] * std::sin(ph);
    }
    const auto sos = butter_lowpass(kIqLowpassOrder, kIqLowpassCutoffHz, audio.sample_rate);
    IQSeries out;
    out.rate = audio.sample_rate;
    out.carrier = carrier;
    out.i = filtfilt(sos, mixed_i);
    out.q = filtfilt(sos, mixed_q);
    return out;
}

// Anti-aliased integer-factor decimation to the target rate.
inline IQSeries decimate(const IQSeries& iq, double target_rate = kWorkingRate) {
    if (target_rate <= 0.0) throw ConfigError("decimate: target rate must be positive");
    const double ratio = iq.rate / target_rate;
    if (std::abs(ratio - std::round(ratio)) > 1e-9 || ratio < 1.0)
        throw ConfigError("decimate: source rate must be an integer multiple of target");
    const std::size_t factor = static_cast<std::size_t>(std::llround(ratio));

    IQSeries out;
    out.rate = target_rate;
    out.carrier = iq.carrier;
    if (factor == 1) {
        out.i = iq.i;
        out.q = iq.q;
        return out;
    }
    const auto sos = butter_lowpass(kDecimLowpassOrder, kDecimLowpassCutoffHz, iq.rate);
    const auto fi = filtfilt(sos, iq.i);
    const auto fq = filtfilt(sos, iq.q);
    const std::size_t m = fi.size() / factor;
    out.i.resize(m);
    out.q.resize(m);
    for (std::size_t k = 0; k < m; ++k) {
        out.i[k] = fi[k * factor];
        out.q[k] = fq[k * factor];
    }
    return out;
}

// Four-quadrant angle, unwrapped. Rejects sequences where the carrier is
// effectively absent (|I|+|Q| below eps on at least 1% of samples).
inline PhaseSeries phase_of(const IQSeries& iq, double eps = 1e-9) {
    if (iq.i.size() != iq.q.size() || iq.i.empty())
        throw DegenerateSignalError("phase_of: empty or mismatched I/Q");
    std::size_t weak = 0;
    for (std::size_t k = 0; k < iq.size(); ++k)
        if (std::abs(iq.i[k]) + std::abs(iq.q[k]) < eps) ++weak;
    if (weak * 100 >= iq.size())
        throw DegenerateSignalError("phase_of: no carrier on >= 1% of samples");

    PhaseSeries out;
    out.rate = iq.rate;
    out.carrier = iq.carrier;
    out.phase.resize(iq.size());
    for (std::size_t k = 0; k < iq.size(); ++k)
        out.phase[k] = std::atan2(iq.q[k], iq.i[k]);
    unwrap_inplace(out.phase);
    return out;
}

// Full extraction for every probe carrier: each channel is bandpassed,
// demodulated, decimated and converted to phase, then trimmed to exactly
// 3840 samples. A failing channel is marked invalid instead of aborting;
// the quality stage decides what to do with it.
inline MultiChannelRecord extract_all(const AudioBuffer& audio, const ProbeConfig& probe) {
    probe.validate();
    if (audio.duration() < 30.0 - 1e-9)
        throw ConfigError("extract: recording must cover at least 30 s");
    if (audio.sample_rate <= 2.0 * *std::max_element(probe.carriers.begin(), probe.carriers.end()))
        throw ConfigError("extract: sample rate below Nyquist for the carrier set");

    MultiChannelRecord rec;
    rec.rate = kWorkingRate;
    rec.segment_length = kSegmentSamples;
    rec.channels.resize(probe.carriers.size());
    for (std::size_t c = 0; c < probe.carriers.size(); ++c) {
        ChannelData& ch = rec.channels[c];
        ch.iq.carrier = probe.carriers[c];
        ch.phase.carrier = probe.carriers[c];
        try {
            const AudioBuffer banded = bandpass(audio, probe.carriers[c]);
            IQSeries iq = decimate(iq_demodulate(banded, probe.carriers[c]), kWorkingRate);
            if (iq.size() < kSegmentSamples)
                throw DegenerateSignalError("channel too short after decimation");
            iq.i.resize(kSegmentSamples);
            iq.q.resize(kSegmentSamples);
            ch.phase = phase_of(iq);
            ch.iq = std::move(iq);
            ch.valid = true;
        } catch (const std::exception& e) {
            ch.valid = false;
            ch.invalid_reason = e.what();
            ch.iq.i.assign(kSegmentSamples, 0.0);
            ch.iq.q.assign(kSegmentSamples, 0.0);
            ch.phase.phase.assign(kSegmentSamples, 0.0);
        }
    }
    return rec;
}

} // namespace afwave
