#pragma once

// FFT utilities: iterative radix-2 transform for power-of-two lengths and a
// Bluestein chirp transform for everything else, plus the one-sided power
// spectrum used by the feature extractors.

#include <cmath>
#include <complex>
#include <span>
#include <stdexcept>
#include <vector>

namespace sid {

using cplx = std::complex<double>;

inline bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

inline std::size_t next_power_of_two(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

namespace detail {

// In-place iterative Cooley-Tukey; n must be a power of two.
inline void fft_pow2(std::vector<cplx>& a, bool inverse) {
  const std::size_t n = a.size();
  if (n <= 1) return;
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  const double sign = inverse ? 1.0 : -1.0;
  std::vector<cplx> twiddle(n / 2);
  for (std::size_t j = 0; j < n / 2; ++j)
    twiddle[j] = std::polar(1.0, sign * 2.0 * M_PI * double(j) / double(n));
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t stride = n / len;
    for (std::size_t i = 0; i < n; i += len) {
      for (std::size_t j = 0; j < len / 2; ++j) {
        const cplx w = twiddle[j * stride];
        const cplx u = a[i + j];
        const cplx v = a[i + j + len / 2] * w;
        a[i + j] = u + v;
        a[i + j + len / 2] = u - v;
      }
    }
  }
  if (inverse)
    for (auto& x : a) x /= double(n);
}

// Bluestein chirp transform: DFT of arbitrary length via one power-of-two
// convolution. i^2 is reduced mod 2n to keep the phase argument small.
inline std::vector<cplx> fft_bluestein(const std::vector<cplx>& x, bool inverse) {
  const std::size_t n = x.size();
  const double sign = inverse ? 1.0 : -1.0;
  std::vector<cplx> chirp(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t sq = (i * i) % (2 * n);
    chirp[i] = std::polar(1.0, sign * M_PI * double(sq) / double(n));
  }
  const std::size_t m = next_power_of_two(2 * n - 1);
  std::vector<cplx> a(m), b(m);
  for (std::size_t i = 0; i < n; ++i) a[i] = x[i] * chirp[i];
  b[0] = std::conj(chirp[0]);
  for (std::size_t i = 1; i < n; ++i) b[i] = b[m - i] = std::conj(chirp[i]);
  fft_pow2(a, false);
  fft_pow2(b, false);
  for (std::size_t i = 0; i < m; ++i) a[i] *= b[i];
  fft_pow2(a, true);
  std::vector<cplx> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * chirp[i];
  if (inverse)
    for (auto& v : out) v /= double(n);
  return out;
}

}  // namespace detail

// Forward DFT of any length >= 1.
inline std::vector<cplx> fft(std::vector<cplx> x) {
  if (x.empty()) throw std::invalid_argument("fft: empty input");
  if (is_power_of_two(x.size())) {
    detail::fft_pow2(x, false);
    return x;
  }
  return detail::fft_bluestein(x, false);
}

// Inverse DFT of any length >= 1 (scaled by 1/N).
inline std::vector<cplx> ifft(std::vector<cplx> x) {
  if (x.empty()) throw std::invalid_argument("ifft: empty input");
  if (is_power_of_two(x.size())) {
    detail::fft_pow2(x, true);
    return x;
  }
  return detail::fft_bluestein(x, true);
}

// One-sided DFT of a real signal, length floor(N/2)+1.
inline std::vector<cplx> rfft(std::span<const double> x) {
  std::vector<cplx> c(x.begin(), x.end());
  c = fft(std::move(c));
  c.resize(x.size() / 2 + 1);
  return c;
}

// |F(k)|^2 / N over the one-sided bins, length floor(N/2)+1.
inline std::vector<double> power_spectrum(std::span<const double> x) {
  if (x.empty()) throw std::invalid_argument("power_spectrum: empty input");
  const auto spec = rfft(x);
  std::vector<double> p(spec.size());
  for (std::size_t i = 0; i < spec.size(); ++i) p[i] = std::norm(spec[i]) / double(x.size());
  return p;
}

}  // namespace sid
