#pragma once

// Short-Time Fourier Transform and its weighted overlap-add inverse.
// Frames are centered: the signal is reflect-padded by window_len/2 on each
// side so every sample is covered, and the inverse trims the padding again.

#include <Eigen/Core>
#include <string>

#include "sid/audio.hpp"
#include "sid/fft.hpp"

namespace sid {

inline std::vector<double> hann_periodic(int n) {
  std::vector<double> w(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) w[std::size_t(i)] = 0.5 - 0.5 * std::cos(2.0 * M_PI * i / n);
  return w;
}

struct Spectrogram {
  Eigen::MatrixXcd bins;  // rows: frequency bins (window_len/2 + 1), cols: frames
  int window_len = 0;
  int hop = 0;
  int sample_rate = 0;
  std::size_t original_length = 0;
  std::string analysis_window = "hann";

  Eigen::Index frames() const { return bins.cols(); }
  Eigen::Index bin_count() const { return bins.rows(); }
};

namespace detail {

// Mirror without repeating the edge sample; valid while |overshoot| < n.
inline std::size_t reflect_index(std::ptrdiff_t i, std::size_t n) {
  const auto sn = std::ptrdiff_t(n);
  while (i < 0 || i >= sn) {
    if (i < 0) i = -i;
    if (i >= sn) i = 2 * (sn - 1) - i;
  }
  return std::size_t(i);
}

}  // namespace detail

inline Spectrogram stft(const AudioClip& clip, int window_len = 1024, int hop = 256) {
  if (window_len < 2 || !is_power_of_two(std::size_t(window_len)))
    throw std::invalid_argument("stft: window_len must be a power of two >= 2");
  if (hop <= 0 || hop > window_len)
    throw std::invalid_argument("stft: hop must satisfy 0 < hop <= window_len");
  const std::size_t n = clip.samples.size();
  const std::size_t pad = std::size_t(window_len) / 2;
  if (n <= pad)
    throw std::invalid_argument("stft: clip shorter than window_len/2 cannot be reflect-padded");

  const auto w = hann_periodic(window_len);
  const std::size_t frames = n / std::size_t(hop) + 1;
  Spectrogram spec;
  spec.window_len = window_len;
  spec.hop = hop;
  spec.sample_rate = clip.sample_rate;
  spec.original_length = n;
  spec.bins.resize(window_len / 2 + 1, Eigen::Index(frames));

  std::vector<double> frame(static_cast<std::size_t>(window_len));
  for (std::size_t m = 0; m < frames; ++m) {
    const auto start = std::ptrdiff_t(m * std::size_t(hop)) - std::ptrdiff_t(pad);
    for (int j = 0; j < window_len; ++j)
      frame[std::size_t(j)] = clip.samples[detail::reflect_index(start + j, n)] * w[std::size_t(j)];
    const auto f = rfft(frame);
    for (Eigen::Index k = 0; k < spec.bins.rows(); ++k) spec.bins(k, Eigen::Index(m)) = f[std::size_t(k)];
  }
  return spec;
}

inline AudioClip istft(const Spectrogram& spec) {
  const int window_len = spec.window_len;
  const int hop = spec.hop;
  if (window_len < 2 || !is_power_of_two(std::size_t(window_len)))
    throw std::invalid_argument("istft: invalid window_len in spectrogram metadata");
  if (hop <= 0 || hop > window_len)
    throw std::invalid_argument("istft: inconsistent metadata (hop > window_len)");
  if (spec.bins.rows() != window_len / 2 + 1)
    throw std::invalid_argument("istft: bin count does not match window_len");
  if (spec.original_length == 0) throw std::invalid_argument("istft: missing original length");

  const std::size_t pad = std::size_t(window_len) / 2;
  const std::size_t padded = spec.original_length + 2 * pad;
  const auto w = hann_periodic(window_len);
  std::vector<double> num(padded, 0.0), den(padded, 0.0);

  std::vector<cplx> full(static_cast<std::size_t>(window_len));
  for (Eigen::Index m = 0; m < spec.frames(); ++m) {
    for (int k = 0; k <= window_len / 2; ++k) {
      full[std::size_t(k)] = spec.bins(k, m);
      if (k > 0 && k < window_len / 2) full[std::size_t(window_len - k)] = std::conj(spec.bins(k, m));
    }
    const auto t = ifft(full);
    const std::size_t start = std::size_t(m) * std::size_t(hop);
    for (int j = 0; j < window_len; ++j) {
      const std::size_t idx = start + std::size_t(j);
      if (idx >= padded) break;
      num[idx] += w[std::size_t(j)] * t[std::size_t(j)].real();
      den[idx] += w[std::size_t(j)] * w[std::size_t(j)];
    }
  }

  AudioClip clip;
  clip.sample_rate = spec.sample_rate;
  clip.samples.resize(spec.original_length);
  for (std::size_t i = 0; i < spec.original_length; ++i) {
    const std::size_t q = i + pad;
    clip.samples[i] = den[q] > 1e-12 ? num[q] / den[q] : 0.0;
  }
  return clip;
}

}  // namespace sid
