// Complex FFT for arbitrary lengths: iterative radix-2 plus Bluestein's
// chirp-z fallback, with periodogram helpers for the spectral metrics.
#pragma once

#include <complex>
#include <cstdint>
#include <span>
#include <vector>

#include "afwave/common.hpp"

namespace afwave {

using cplx = std::complex<double>;

namespace detail {

inline bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

inline std::size_t next_pow2(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

// In-place iterative radix-2 Cooley-Tukey. sign = -1 forward, +1 inverse
// (inverse is unscaled; callers divide by n).
inline void fft_radix2(std::vector<cplx>& a, int sign) {
    const std::size_t n = a.size();
    if (n <= 1) return;
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = sign * kTwoPi / static_cast<double>(len);
        const cplx wlen(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            cplx w(1.0, 0.0);
            for (std::size_t k = 0; k < len / 2; ++k) {
                const cplx u = a[i + k];
                const cplx v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wlen;
            }
        }
    }
}

// Bluestein: express the length-n DFT as a convolution and evaluate it with a
// padded power-of-two FFT. Handles any n.
inline void fft_bluestein(std::vector<cplx>& a, int sign) {
    const std::size_t n = a.size();
    const std::size_t m = next_pow2(2 * n + 1);
    std::vector<cplx> chirp(n);
    for (std::size_t k = 0; k < n; ++k) {
        // k^2 mod 2n avoids precision loss for large k
        const std::uint64_t k2 = (static_cast<std::uint64_t>(k) * k) % (2 * n);
        const double ang = sign * kPi * static_cast<double>(k2) / static_cast<double>(n);
        chirp[k] = cplx(std::cos(ang), std::sin(ang));
    }
    std::vector<cplx> fa(m, cplx(0, 0)), fb(m, cplx(0, 0));
    for (std::size_t k = 0; k < n; ++k) fa[k] = a[k] * chirp[k];
    fb[0] = std::conj(chirp[0]);
    for (std::size_t k = 1; k < n; ++k) fb[k] = fb[m - k] = std::conj(chirp[k]);
    fft_radix2(fa, -1);
    fft_radix2(fb, -1);
    for (std::size_t k = 0; k < m; ++k) fa[k] *= fb[k];
    fft_radix2(fa, +1);
    const double inv_m = 1.0 / static_cast<double>(m);
    for (std::size_t k = 0; k < n; ++k) a[k] = fa[k] * inv_m * chirp[k];
}

} // namespace detail

// Forward DFT: X[k] = sum_n x[n] exp(-2*pi*i*k*n/N).
inline std::vector<cplx> fft(std::vector<cplx> x) {
    if (detail::is_pow2(x.size()))
        detail::fft_radix2(x, -1);
    else
        detail::fft_bluestein(x, -1);
    return x;
}

inline std::vector<cplx> ifft(std::vector<cplx> x) {
    const std::size_t n = x.size();
    if (detail::is_pow2(n))
        detail::fft_radix2(x, +1);
    else
        detail::fft_bluestein(x, +1);
    const double inv = n ? 1.0 / static_cast<double>(n) : 0.0;
    for (auto& v : x) v *= inv;
    return x;
}

inline std::vector<cplx> fft_real(std::span<const double> x) {
    std::vector<cplx> c(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) c[i] = cplx(x[i], 0.0);
    return fft(std::move(c));
}

// |X[k]|^2 over all N bins (two-sided). Bin k sits at frequency
// min(k, N-k) * rate / N.
inline std::vector<double> periodogram(std::span<const double> x) {
    auto X = fft_real(x);
    std::vector<double> p(X.size());
    for (std::size_t i = 0; i < X.size(); ++i) p[i] = std::norm(X[i]);
    return p;
}

// Spectral energy of x in [f_lo, f_hi] (inclusive ends by default), counting
// both spectrum halves. De-meaning is the caller's choice.
struct BandEnergy {
    double lo;
    double hi;
    bool include_lo = true;
    bool include_hi = true;
};

inline double band_energy(std::span<const double> power, double rate, BandEnergy band) {
    const std::size_t n = power.size();
    double e = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const double f = static_cast<double>(std::min(k, n - k)) * rate / static_cast<double>(n);
        const bool above = band.include_lo ? (f >= band.lo) : (f > band.lo);
        const bool below = band.include_hi ? (f <= band.hi) : (f < band.hi);
        if (above && below) e += power[k];
    }
    return e;
}

// Frequency (Hz) of the largest nonzero-frequency peak of the two-sided
// periodogram; useful for oracle checks on synthesized tracks.
inline double dominant_frequency(std::span<const double> x, double rate) {
    auto p = periodogram(x);
    const std::size_t n = p.size();
    double best = -1.0;
    std::size_t best_k = 1;
    for (std::size_t k = 1; k <= n / 2; ++k) {
        if (p[k] > best) {
            best = p[k];
            best_k = k;
        }
    }
    return static_cast<double>(best_k) * rate / static_cast<double>(n);
}

} // namespace afwave
