#include <catch2/catch.hpp>

#include <sid/random.hpp>
#include <sid/rpca.hpp>

using namespace sid;
using Eigen::MatrixXd;

namespace {

double nuclear_norm(const MatrixXd& m) {
  return Eigen::BDCSVD<MatrixXd>(m).singularValues().sum();
}

// rank-2 plus 5% +-10 spikes, deterministic
struct Planted {
  MatrixXd V, L0, S0;
};

Planted planted_problem(int n, std::uint64_t seed) {
  Rng rng(seed);
  MatrixXd U(n, 2), W(n, 2);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < 2; ++j) {
      U(i, j) = rng.gaussian();
      W(i, j) = rng.gaussian();
    }
  Planted p;
  p.L0 = U * W.transpose();
  p.S0 = MatrixXd::Zero(n, n);
  for (int s = 0; s < n * n / 20; ++s) {
    const auto i = Eigen::Index(rng.uniform_index(std::size_t(n)));
    const auto j = Eigen::Index(rng.uniform_index(std::size_t(n)));
    p.S0(i, j) = rng.uniform01() < 0.5 ? 10.0 : -10.0;
  }
  p.V = p.L0 + p.S0;
  return p;
}

double band_energy(const AudioClip& clip, double f_lo, double f_hi) {
  const auto p = power_spectrum(clip.samples);
  const double bin_hz = double(clip.sample_rate) / double(clip.samples.size());
  double e = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    const double f = double(k) * bin_hz;
    if (f >= f_lo && f <= f_hi) e += p[k];
  }
  return e;
}

}  // namespace

TEST_CASE("soft_threshold shrinks elementwise") {
  MatrixXd m(1, 3);
  m << 3.0, -0.5, 0.0;
  const MatrixXd out = soft_threshold(m, 1.0);
  REQUIRE(out(0, 0) == Approx(2.0));
  REQUIRE(out(0, 1) == 0.0);
  REQUIRE(out(0, 2) == 0.0);
  REQUIRE(soft_threshold(m, 0.0) == m);  // tau = 0 is the identity
}

TEST_CASE("soft_threshold never increases the l1 norm") {
  Rng rng(3);
  MatrixXd m(20, 20);
  for (int i = 0; i < 20; ++i)
    for (int j = 0; j < 20; ++j) m(i, j) = rng.gaussian();
  REQUIRE(soft_threshold(m, 0.3).cwiseAbs().sum() <= m.cwiseAbs().sum());
}

TEST_CASE("singular_value_threshold on closed-form cases") {
  SECTION("identity shrinks uniformly") {
    const MatrixXd out = singular_value_threshold(MatrixXd::Identity(2, 2), 0.5);
    REQUIRE((out - 0.5 * MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-12);
  }
  SECTION("tau above sigma_max zeroes the matrix") {
    MatrixXd m(2, 2);
    m << 1.0, 0.2, 0.1, 0.8;
    const MatrixXd out = singular_value_threshold(m, 10.0);
    REQUIRE(out.cwiseAbs().maxCoeff() == 0.0);
  }
  SECTION("diag(3,1) with tau=2 becomes diag(1,0)") {
    MatrixXd m = MatrixXd::Zero(2, 2);
    m(0, 0) = 3.0;
    m(1, 1) = 1.0;
    const MatrixXd out = singular_value_threshold(m, 2.0);
    REQUIRE(out(0, 0) == Approx(1.0).margin(1e-12));
    REQUIRE(std::abs(out(1, 1)) < 1e-12);
    REQUIRE(std::abs(out(0, 1)) < 1e-12);
  }
  SECTION("nuclear norm never increases") {
    Rng rng(5);
    MatrixXd m(15, 10);
    for (int i = 0; i < 15; ++i)
      for (int j = 0; j < 10; ++j) m(i, j) = rng.gaussian();
    REQUIRE(nuclear_norm(singular_value_threshold(m, 0.7)) <= nuclear_norm(m));
  }
  SECTION("non-finite input is rejected") {
    MatrixXd m = MatrixXd::Zero(2, 2);
    m(0, 0) = std::numeric_limits<double>::quiet_NaN();
    REQUIRE_THROWS_AS(singular_value_threshold(m, 0.1), std::invalid_argument);
  }
}

TEST_CASE("rpca_alm on the zero matrix is a one-iteration fixed point") {
  const auto dec = rpca_alm(MatrixXd::Zero(30, 40));
  REQUIRE(dec.iterations == 1);
  REQUIRE(dec.low_rank.cwiseAbs().maxCoeff() == 0.0);
  REQUIRE(dec.sparse.cwiseAbs().maxCoeff() == 0.0);
  REQUIRE(dec.final_residual == 0.0);
}

TEST_CASE("rpca_alm recovers a planted low-rank plus sparse split") {
  const auto p = planted_problem(200, 99);
  const auto dec = rpca_alm(p.V);
  REQUIRE(dec.final_residual <= 1e-7);
  REQUIRE(dec.iterations <= 200);
  REQUIRE((dec.low_rank - p.L0).norm() / p.L0.norm() < 1e-4);
  REQUIRE((dec.low_rank + dec.sparse - p.V).norm() / p.V.norm() <= 1e-7);

  // relative residual is non-increasing after the first iteration
  for (std::size_t i = 2; i < dec.residual_history.size(); ++i)
    REQUIRE(dec.residual_history[i] <= dec.residual_history[i - 1] * (1.0 + 1e-9));
}

TEST_CASE("rpca_alm leaves a pure rank-1 matrix in the low-rank part") {
  Rng rng(12);
  Eigen::VectorXd u(80), v(60);
  for (int i = 0; i < 80; ++i) u(i) = rng.gaussian();
  for (int i = 0; i < 60; ++i) v(i) = rng.gaussian();
  const MatrixXd V = u * v.transpose();
  const auto dec = rpca_alm(V);
  REQUIRE(dec.sparse.norm() / V.norm() < 1e-3);
}

TEST_CASE("separate_voice on silence yields silent stems") {
  AudioClip c;
  c.sample_rate = 4160;
  c.samples.assign(8320, 0.0);
  const auto [voice, music] = separate_voice(stft(c, 1024, 256));
  for (double s : voice.samples) REQUIRE(s == 0.0);
  for (double s : music.samples) REQUIRE(s == 0.0);
}

TEST_CASE("intermittent chirps separate from a steady chord into the voice stem") {
  const int rate = 4160;
  const std::size_t n = 4 * rate;
  AudioClip mix;
  mix.sample_rate = rate;
  mix.samples.assign(n, 0.0);
  // stationary organ chord
  for (std::size_t i = 0; i < n; ++i) {
    const double t = double(i) / rate;
    for (double f : {220.0, 275.0, 330.0, 440.0})
      mix.samples[i] += 0.2 * std::sin(2.0 * M_PI * f * t);
  }
  // distinct short glides inside 800-1600 Hz; each burst differs in sweep,
  // duration and level so the set is not itself a repeating (low-rank) pattern
  Rng rng(7);
  for (int burst = 0; burst < 7; ++burst) {
    const double t0 = 0.1 + (3.6 / 7.0) * burst + 0.08 * rng.uniform01();
    const double dur = 0.18 + 0.17 * rng.uniform01();
    const double f0 = 820.0 + 500.0 * rng.uniform01();
    const double f1 = std::clamp(
        f0 + (rng.uniform01() < 0.5 ? -1.0 : 1.0) * (250.0 + 350.0 * rng.uniform01()), 820.0,
        1580.0);
    const double amp = 0.4 + 0.3 * rng.uniform01();
    const double vib_phase = 2.0 * M_PI * rng.uniform01();
    const auto start = std::size_t(t0 * rate);
    const auto len = std::size_t(dur * rate);
    for (std::size_t i = 0; i < len && start + i < n; ++i) {
      const double t = double(i) / rate;
      const double phase = 2.0 * M_PI * (f0 * t + (f1 - f0) / (2.0 * dur) * t * t) +
                           6.0 * std::sin(2.0 * M_PI * 5.5 * t + vib_phase);
      const double env = std::sin(M_PI * double(i) / double(len));
      mix.samples[start + i] += amp * env * std::sin(phase);
    }
  }
  const auto [voice, music] = separate_voice(stft(mix, 1024, 256));
  const double voice_band = band_energy(voice, 800.0, 1600.0);
  const double music_band = band_energy(music, 800.0, 1600.0);
  REQUIRE(voice_band / (voice_band + music_band) >= 0.7);
}

TEST_CASE("voice and accompaniment stems sum back to the input") {
  const int rate = 4160;
  const std::size_t n = 4 * rate;
  AudioClip mix;
  mix.sample_rate = rate;
  mix.samples.assign(n, 0.0);
  Rng rng(31);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = double(i) / rate;
    mix.samples[i] = 0.3 * std::sin(2.0 * M_PI * 196.0 * t) +
                     0.3 * std::sin(2.0 * M_PI * 294.0 * t) +
                     0.25 * std::sin(2.0 * M_PI * (520.0 + 40.0 * std::sin(2.0 * M_PI * 0.8 * t)) * t) +
                     0.02 * rng.gaussian();
  }
  peak_normalize(mix);
  const auto [voice, music] = separate_voice(stft(mix, 1024, 256));
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = voice.samples[i] + music.samples[i] - mix.samples[i];
    num += d * d;
    den += mix.samples[i] * mix.samples[i];
  }
  REQUIRE(std::sqrt(num / den) <= 0.1);
}
