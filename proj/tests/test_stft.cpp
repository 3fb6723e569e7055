#include <catch2/catch.hpp>

#include <sid/random.hpp>
#include <sid/stft.hpp>

using namespace sid;

namespace {

AudioClip random_clip(std::size_t n, int rate, std::uint64_t seed) {
  AudioClip c;
  c.sample_rate = rate;
  c.samples.resize(n);
  Rng rng(seed);
  for (auto& s : c.samples) s = rng.gaussian() * 0.3;
  return c;
}

}  // namespace

TEST_CASE("stft of silence is an all-zero spectrogram") {
  AudioClip c;
  c.sample_rate = 4160;
  c.samples.assign(4096, 0.0);
  const auto spec = stft(c, 512, 128);
  REQUIRE(spec.bins.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("stft frame geometry matches the centered-frame formula") {
  auto c = random_clip(4096, 4160, 1);
  const auto spec = stft(c, 1024, 256);
  REQUIRE(spec.bin_count() == 513);
  REQUIRE(spec.frames() == Eigen::Index(4096 / 256 + 1));
}

TEST_CASE("a bin-centered sine dominates a single frequency row") {
  const int n = 8192, win = 1024, hop = 256;
  const int bin = 40;  // frequency = bin * fs / win
  AudioClip c;
  c.sample_rate = 8192;
  c.samples.resize(n);
  for (int i = 0; i < n; ++i)
    c.samples[std::size_t(i)] = std::sin(2.0 * M_PI * double(bin) * double(i) / double(win));
  const auto spec = stft(c, win, hop);
  // inspect an interior frame
  const Eigen::Index m = spec.frames() / 2;
  double peak = std::abs(spec.bins(bin, m));
  double neighbor = std::max(std::abs(spec.bins(bin - 2, m)), std::abs(spec.bins(bin + 2, m)));
  REQUIRE(peak / (neighbor + 1e-300) > 100.0);
}

TEST_CASE("DC signal concentrates in bin zero") {
  AudioClip c;
  c.sample_rate = 1000;
  c.samples.assign(3000, 1.0);
  const auto spec = stft(c, 256, 64);
  const Eigen::Index m = spec.frames() / 2;
  REQUIRE(std::abs(spec.bins(0, m)) > 100.0 * std::abs(spec.bins(3, m)));
}

TEST_CASE("istft(stft(x)) reconstructs x to near machine precision") {
  for (std::size_t n : {3000u, 44100u}) {
    auto c = random_clip(n, 44100, n);
    const auto spec = stft(c, 1024, 256);
    const auto back = istft(spec);
    REQUIRE(back.samples.size() == c.samples.size());
    double err = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      err = std::max(err, std::abs(back.samples[i] - c.samples[i]));
    REQUIRE(err < 1e-10);
  }
}

TEST_CASE("istft of an all-zero spectrogram is silence") {
  auto c = random_clip(2048, 4160, 2);
  auto spec = stft(c, 512, 128);
  spec.bins.setZero();
  const auto back = istft(spec);
  for (double s : back.samples) REQUIRE(s == 0.0);
}

TEST_CASE("sine survives the stft/istft round trip") {
  AudioClip c;
  c.sample_rate = 4160;
  c.samples.resize(12480);
  for (std::size_t i = 0; i < c.samples.size(); ++i)
    c.samples[i] = std::sin(2.0 * M_PI * 100.0 * double(i) / 4160.0);
  const auto back = istft(stft(c, 1024, 256));
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < c.samples.size(); ++i) {
    num += (back.samples[i] - c.samples[i]) * (back.samples[i] - c.samples[i]);
    den += c.samples[i] * c.samples[i];
  }
  REQUIRE(std::sqrt(num / den) < 1e-8);
}

TEST_CASE("stft is linear to machine precision") {
  const auto x = random_clip(3000, 8000, 21);
  const auto y = random_clip(3000, 8000, 22);
  AudioClip z;
  z.sample_rate = 8000;
  z.samples.resize(3000);
  const double a = 1.7, b = -0.4;
  for (std::size_t i = 0; i < z.samples.size(); ++i)
    z.samples[i] = a * x.samples[i] + b * y.samples[i];
  const auto sx = stft(x, 512, 128);
  const auto sy = stft(y, 512, 128);
  const auto sz = stft(z, 512, 128);
  const double err = (sz.bins - (a * sx.bins + b * sy.bins)).cwiseAbs().maxCoeff();
  REQUIRE(err < 1e-10);
}

TEST_CASE("per-frame windowed energy satisfies Parseval") {
  const auto x = random_clip(5000, 8000, 30);
  const int win = 512, hop = 128;
  const auto spec = stft(x, win, hop);
  const auto w = hann_periodic(win);
  // middle frame: rebuild the windowed segment and compare energies
  const Eigen::Index m = spec.frames() / 2;
  const std::size_t start = std::size_t(m) * hop;  // padded coords; pad = win/2
  double time_energy = 0.0;
  for (int j = 0; j < win; ++j) {
    const auto idx = std::ptrdiff_t(start) + j - win / 2;
    const double v = x.samples[detail::reflect_index(idx, x.samples.size())] * w[std::size_t(j)];
    time_energy += v * v;
  }
  double spec_energy = std::norm(spec.bins(0, m)) + std::norm(spec.bins(win / 2, m));
  for (int k = 1; k < win / 2; ++k) spec_energy += 2.0 * std::norm(spec.bins(k, m));
  spec_energy /= double(win);
  REQUIRE(spec_energy == Approx(time_energy).epsilon(1e-8));
}

TEST_CASE("stft rejects bad geometry") {
  auto c = random_clip(100, 1000, 4);
  REQUIRE_THROWS_AS(stft(c, 513, 100), std::invalid_argument);   // not a power of two
  REQUIRE_THROWS_AS(stft(c, 1024, 2000), std::invalid_argument); // hop > window
  AudioClip shorty;
  shorty.sample_rate = 1000;
  shorty.samples.assign(100, 0.1);
  REQUIRE_THROWS_AS(stft(shorty, 1024, 256), std::invalid_argument);  // too short to pad
}

TEST_CASE("istft rejects inconsistent metadata") {
  auto c = random_clip(2048, 4000, 6);
  auto spec = stft(c, 512, 128);
  spec.hop = 1024;  // hop > window_len
  REQUIRE_THROWS_AS(istft(spec), std::invalid_argument);
}
