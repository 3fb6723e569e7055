#pragma once

// Audio ingestion and conditioning: RIFF WAV load/save (PCM16 and float32),
// stereo-to-mono mixdown, peak normalization, windowed-sinc resampling and
// fixed-length segmentation.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace sid {

struct AudioClip {
  std::vector<double> samples;  // mono, nominally in [-1, 1]
  int sample_rate = 0;          // Hz
  std::string label;            // optional singer id; empty means unlabeled
};

enum class WavEncoding { Float32, Pcm16 };

namespace detail {

inline std::uint16_t read_u16(const unsigned char* p) {
  return std::uint16_t(p[0] | (p[1] << 8));
}

inline std::uint32_t read_u32(const unsigned char* p) {
  return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) | (std::uint32_t(p[2]) << 16) |
         (std::uint32_t(p[3]) << 24);
}

inline void append_u16(std::vector<unsigned char>& b, std::uint16_t v) {
  b.push_back(v & 0xff);
  b.push_back((v >> 8) & 0xff);
}

inline void append_u32(std::vector<unsigned char>& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back((v >> (8 * i)) & 0xff);
}

inline void append_tag(std::vector<unsigned char>& b, const char* tag) {
  b.insert(b.end(), tag, tag + 4);
}

}  // namespace detail

// Scales so the peak magnitude is 1; all-zero input is left untouched.
inline void peak_normalize(AudioClip& clip) {
  double peak = 0.0;
  for (double s : clip.samples) peak = std::max(peak, std::abs(s));
  if (peak > 0.0)
    for (double& s : clip.samples) s /= peak;
}

// Loads a PCM WAV file (16-bit int or 32-bit float, any channel count),
// mixes to mono by channel averaging and peak-normalizes.
inline AudioClip load_audio(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("audio: cannot open '" + path + "'");
  std::vector<unsigned char> buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (buf.size() < 12 || std::memcmp(buf.data(), "RIFF", 4) != 0 ||
      std::memcmp(buf.data() + 8, "WAVE", 4) != 0)
    throw std::runtime_error("audio: '" + path + "' is not a RIFF WAV file");

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  const unsigned char* data = nullptr;
  std::size_t data_size = 0;

  std::size_t pos = 12;
  while (pos + 8 <= buf.size()) {
    const char* id = reinterpret_cast<const char*>(buf.data() + pos);
    std::uint32_t size = detail::read_u32(buf.data() + pos + 4);
    const std::size_t body = pos + 8;
    if (body + size > buf.size()) size = std::uint32_t(buf.size() - body);
    if (std::memcmp(id, "fmt ", 4) == 0 && size >= 16) {
      format = detail::read_u16(buf.data() + body);
      channels = detail::read_u16(buf.data() + body + 2);
      rate = detail::read_u32(buf.data() + body + 4);
      bits = detail::read_u16(buf.data() + body + 14);
      // WAVE_FORMAT_EXTENSIBLE carries the real format code in the GUID
      if (format == 0xFFFE && size >= 40) format = detail::read_u16(buf.data() + body + 24);
      have_fmt = true;
    } else if (std::memcmp(id, "data", 4) == 0 && data == nullptr) {
      data = buf.data() + body;
      data_size = size;
    }
    pos = body + size + (size & 1);
  }

  if (!have_fmt) throw std::runtime_error("audio: '" + path + "' has no fmt chunk");
  if (channels == 0 || rate == 0)
    throw std::runtime_error("audio: '" + path + "' has an invalid fmt chunk");
  const bool pcm16 = (format == 1 && bits == 16);
  const bool float32 = (format == 3 && bits == 32);
  if (!pcm16 && !float32)
    throw std::runtime_error("audio: unsupported encoding in '" + path + "' (format=" +
                             std::to_string(format) + ", bits=" + std::to_string(bits) + ")");
  if (data == nullptr) throw std::runtime_error("audio: '" + path + "' has no data chunk");

  const std::size_t bytes_per_sample = bits / 8;
  const std::size_t frame_bytes = bytes_per_sample * channels;
  const std::size_t frames = data_size / frame_bytes;
  if (frames == 0) throw std::runtime_error("audio: zero-length audio in '" + path + "'");

  AudioClip clip;
  clip.sample_rate = int(rate);
  clip.samples.resize(frames);
  for (std::size_t i = 0; i < frames; ++i) {
    double acc = 0.0;
    for (std::uint16_t c = 0; c < channels; ++c) {
      const unsigned char* p = data + (i * channels + c) * bytes_per_sample;
      if (pcm16) {
        std::int16_t v;
        std::memcpy(&v, p, 2);
        acc += double(v) / 32768.0;
      } else {
        float v;
        std::memcpy(&v, p, 4);
        acc += double(v);
      }
    }
    clip.samples[i] = acc / double(channels);
  }
  peak_normalize(clip);
  return clip;
}

// Writes a mono WAV file. Float32 is the default since it round-trips the
// pipeline's samples exactly; PCM16 quantizes.
inline void save_audio(const AudioClip& clip, const std::string& path,
                       WavEncoding enc = WavEncoding::Float32) {
  if (clip.samples.empty()) throw std::invalid_argument("audio: refusing to write an empty clip");
  if (clip.sample_rate <= 0) throw std::invalid_argument("audio: invalid sample rate");
  const std::uint32_t n = std::uint32_t(clip.samples.size());
  std::vector<unsigned char> out;
  out.reserve(64 + std::size_t(n) * 4);
  detail::append_tag(out, "RIFF");
  detail::append_u32(out, 0);  // patched below
  detail::append_tag(out, "WAVE");
  if (enc == WavEncoding::Float32) {
    detail::append_tag(out, "fmt ");
    detail::append_u32(out, 18);
    detail::append_u16(out, 3);  // IEEE float
    detail::append_u16(out, 1);
    detail::append_u32(out, std::uint32_t(clip.sample_rate));
    detail::append_u32(out, std::uint32_t(clip.sample_rate) * 4);
    detail::append_u16(out, 4);
    detail::append_u16(out, 32);
    detail::append_u16(out, 0);  // cbSize
    detail::append_tag(out, "fact");
    detail::append_u32(out, 4);
    detail::append_u32(out, n);
    detail::append_tag(out, "data");
    detail::append_u32(out, n * 4);
    for (double s : clip.samples) {
      const float v = float(s);
      unsigned char b[4];
      std::memcpy(b, &v, 4);
      out.insert(out.end(), b, b + 4);
    }
  } else {
    detail::append_tag(out, "fmt ");
    detail::append_u32(out, 16);
    detail::append_u16(out, 1);  // PCM
    detail::append_u16(out, 1);
    detail::append_u32(out, std::uint32_t(clip.sample_rate));
    detail::append_u32(out, std::uint32_t(clip.sample_rate) * 2);
    detail::append_u16(out, 2);
    detail::append_u16(out, 16);
    detail::append_tag(out, "data");
    detail::append_u32(out, n * 2);
    for (double s : clip.samples) {
      const double clamped = std::clamp(s, -1.0, 1.0);
      const std::int16_t v = std::int16_t(std::lrint(clamped * 32767.0));
      unsigned char b[2];
      std::memcpy(b, &v, 2);
      out.insert(out.end(), b, b + 2);
    }
  }
  const std::uint32_t riff_size = std::uint32_t(out.size() - 8);
  out[4] = riff_size & 0xff;
  out[5] = (riff_size >> 8) & 0xff;
  out[6] = (riff_size >> 16) & 0xff;
  out[7] = (riff_size >> 24) & 0xff;

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("audio: cannot write '" + path + "'");
  f.write(reinterpret_cast<const char*>(out.data()), std::streamsize(out.size()));
  if (!f) throw std::runtime_error("audio: short write on '" + path + "'");
}

namespace detail {

inline double bessel_i0(double x) {
  // power series; converges quickly for the beta values used here
  double sum = 1.0, term = 1.0;
  for (int k = 1; k < 64; ++k) {
    term *= (x / (2.0 * k)) * (x / (2.0 * k));
    sum += term;
    if (term < sum * 1e-18) break;
  }
  return sum;
}

inline double sinc(double v) {
  if (std::abs(v) < 1e-12) return 1.0;
  return std::sin(M_PI * v) / (M_PI * v);
}

}  // namespace detail

// Band-limited resampling with a Kaiser-windowed sinc kernel. Returns the
// clip unchanged when it is already at the target rate.
inline AudioClip resample(const AudioClip& clip, int target_rate) {
  if (target_rate <= 0) throw std::invalid_argument("resample: target rate must be positive");
  if (clip.sample_rate <= 0) throw std::invalid_argument("resample: clip has no sample rate");
  if (clip.samples.empty()) throw std::invalid_argument("resample: empty clip");
  if (clip.sample_rate == target_rate) return clip;

  const std::size_t n = clip.samples.size();
  const auto out_len = std::size_t(
      std::llround(double(n) * double(target_rate) / double(clip.sample_rate)));
  const double cutoff = std::min(1.0, double(target_rate) / double(clip.sample_rate));
  constexpr double kBaseHalfWidth = 32.0;
  constexpr double kKaiserBeta = 10.0;
  const int half = int(std::ceil(kBaseHalfWidth / cutoff));

  // Kaiser window sampled for lookup with linear interpolation.
  constexpr int kLutSize = 8192;
  const double i0_beta = detail::bessel_i0(kKaiserBeta);
  std::vector<double> win_lut(kLutSize + 2);
  for (int i = 0; i <= kLutSize; ++i) {
    const double frac = double(i) / double(kLutSize);
    win_lut[std::size_t(i)] =
        detail::bessel_i0(kKaiserBeta * std::sqrt(std::max(0.0, 1.0 - frac * frac))) / i0_beta;
  }
  win_lut[kLutSize + 1] = 0.0;
  const auto window = [&](double frac) {
    const double x = std::abs(frac) * kLutSize;
    const int idx = std::min(int(x), kLutSize);
    const double w = x - idx;
    return win_lut[std::size_t(idx)] * (1.0 - w) + win_lut[std::size_t(idx) + 1] * w;
  };

  AudioClip out;
  out.sample_rate = target_rate;
  out.label = clip.label;
  out.samples.resize(std::max<std::size_t>(out_len, 1));
  const double step = double(clip.sample_rate) / double(target_rate);
  for (std::size_t i = 0; i < out.samples.size(); ++i) {
    const double t = double(i) * step;
    const auto j_lo = std::max<std::ptrdiff_t>(0, std::ptrdiff_t(std::ceil(t)) - half);
    const auto j_hi = std::min<std::ptrdiff_t>(std::ptrdiff_t(n) - 1,
                                               std::ptrdiff_t(std::floor(t)) + half);
    double acc = 0.0, norm = 0.0;
    for (std::ptrdiff_t j = j_lo; j <= j_hi; ++j) {
      const double u = t - double(j);
      const double k = cutoff * detail::sinc(cutoff * u) * window(u / double(half));
      acc += clip.samples[std::size_t(j)] * k;
      norm += k;
    }
    out.samples[i] = norm > 1e-12 ? acc / norm : 0.0;
  }
  return out;
}

// Non-overlapping segments of exactly duration_s * sample_rate samples, in
// order; the trailing remainder is discarded. A clip shorter than one
// segment yields an empty list.
inline std::vector<AudioClip> segment(const AudioClip& clip, double duration_s) {
  if (duration_s <= 0.0) throw std::invalid_argument("segment: duration must be positive");
  if (clip.sample_rate <= 0) throw std::invalid_argument("segment: clip has no sample rate");
  const auto seg_len = std::size_t(std::llround(duration_s * clip.sample_rate));
  if (seg_len == 0) throw std::invalid_argument("segment: duration too short for sample rate");
  std::vector<AudioClip> out;
  const std::size_t count = clip.samples.size() / seg_len;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    AudioClip seg;
    seg.sample_rate = clip.sample_rate;
    seg.label = clip.label;
    seg.samples.assign(clip.samples.begin() + std::ptrdiff_t(i * seg_len),
                       clip.samples.begin() + std::ptrdiff_t((i + 1) * seg_len));
    out.push_back(std::move(seg));
  }
  return out;
}

}  // namespace sid
