#include <catch2/catch.hpp>

#include <filesystem>

#include <sid/features.hpp>
#include <sid/pca.hpp>
#include <sid/random.hpp>

using namespace sid;

namespace {

AudioClip tone_segment(double freq, int rate, double seconds, const std::string& label = "") {
  AudioClip c;
  c.sample_rate = rate;
  c.label = label;
  c.samples.resize(std::size_t(seconds * rate));
  for (std::size_t i = 0; i < c.samples.size(); ++i)
    c.samples[i] = std::sin(2.0 * M_PI * freq * double(i) / rate);
  return c;
}

}  // namespace

TEST_CASE("band_mean") {
  REQUIRE(band_mean(std::vector<double>{1, 2, 3}) == Approx(2.0));
  REQUIRE(band_mean(std::vector<double>(8, 0.0)) == 0.0);
  REQUIRE(band_mean(std::vector<double>{-5, 5}) == 0.0);
}

TEST_CASE("band_std") {
  REQUIRE(band_std(std::vector<double>(10, 3.7)) == 0.0);
  REQUIRE(band_std(std::vector<double>{1, -1}) == Approx(1.0));
  // scaling by c scales the result by |c|
  std::vector<double> v{0.3, -1.2, 2.2, 0.7};
  std::vector<double> scaled(v);
  for (double& x : scaled) x *= -2.5;
  REQUIRE(band_std(scaled) == Approx(2.5 * band_std(v)).epsilon(1e-12));
}

TEST_CASE("band_entropy") {
  std::vector<double> onehot(16, 0.0);
  onehot[5] = 1.0;
  REQUIRE(band_entropy(onehot) == Approx(0.0).margin(1e-15));

  const std::size_t n = 64;
  std::vector<double> uniform(n, 1.0 / std::sqrt(double(n)));
  REQUIRE(band_entropy(uniform) == Approx(std::log(double(n))).epsilon(1e-12));

  REQUIRE(band_entropy(std::vector<double>(32, 0.0)) == 0.0);

  // range bound for arbitrary bands
  Rng rng(2);
  std::vector<double> v(100);
  for (auto& x : v) x = rng.gaussian();
  const double e = band_entropy(v);
  REQUIRE(e >= 0.0);
  REQUIRE(e <= std::log(100.0));
}

TEST_CASE("band_psd_summary") {
  REQUIRE(band_psd_summary(std::vector<double>(16, 0.0)) == 0.0);
  // ones, N=8: spectrum [8,0,0,0,0], mean 1.6
  REQUIRE(band_psd_summary(std::vector<double>(8, 1.0)) == Approx(1.6).margin(1e-12));
  // quadratic homogeneity
  std::vector<double> v{0.1, 0.5, -0.4, 0.9, -1.1};
  std::vector<double> scaled(v);
  for (double& x : scaled) x *= 2.0;
  REQUIRE(band_psd_summary(scaled) == Approx(4.0 * band_psd_summary(v)).epsilon(1e-12));
}

TEST_CASE("median handles even and odd counts") {
  REQUIRE(median(std::vector<double>{3, 1, 2}) == 2.0);
  REQUIRE(median(std::vector<double>{4, 1, 3, 2}) == Approx(2.5));
}

TEST_CASE("extract_dwt_features emits exactly 18 named values") {
  WaveletSpec spec{"db4", 4, WaveletExtension::symmetric};
  auto seg = tone_segment(260.0, 4160, 3.0, "a");
  const auto fv = extract_dwt_features(seg, spec, 0.3);
  REQUIRE(fv.values.size() == 18);
  REQUIRE(fv.feature_names.size() == 18);
  REQUIRE(fv.label == "a");
  REQUIRE(fv.feature_names[0] == "L4_absmean");
  REQUIRE(fv.feature_names[17] == "signal_psd_mean");
  for (double v : fv.values) REQUIRE(std::isfinite(v));
}

TEST_CASE("extract_dwt_features of silence is all zeros") {
  WaveletSpec spec{"db4", 4, WaveletExtension::symmetric};
  AudioClip seg;
  seg.sample_rate = 4160;
  seg.samples.assign(4160, 0.0);
  const auto fv = extract_dwt_features(seg, spec, 0.3);
  for (double v : fv.values) REQUIRE(v == Approx(0.0).margin(1e-12));
}

TEST_CASE("extract_dwt_features is deterministic") {
  WaveletSpec spec{"db4", 4, WaveletExtension::symmetric};
  auto seg = tone_segment(310.0, 4160, 3.0);
  const auto a = extract_dwt_features(seg, spec, 0.3);
  const auto b = extract_dwt_features(seg, spec, 0.3);
  REQUIRE(a.values == b.values);
}

TEST_CASE("extract_mfcc_features basics") {
  auto seg = tone_segment(440.0, 4160, 2.0);
  const auto a = extract_mfcc_features(seg, 13);
  REQUIRE(a.values.size() == 26);
  const auto b = extract_mfcc_features(seg, 13);
  REQUIRE(a.values == b.values);  // deterministic

  // sines an octave apart produce different vectors
  auto other = tone_segment(880.0, 4160, 2.0);
  const auto c = extract_mfcc_features(other, 13);
  double dist = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i)
    dist += (a.values[i] - c.values[i]) * (a.values[i] - c.values[i]);
  REQUIRE(std::sqrt(dist) > 0.1);
}

TEST_CASE("extract_mfcc_features rejects a segment shorter than one frame") {
  AudioClip seg;
  seg.sample_rate = 4160;
  seg.samples.assign(50, 0.1);  // 25 ms frame = 104 samples
  REQUIRE_THROWS_WITH(extract_mfcc_features(seg, 13), Catch::Contains("shorter than one frame"));
}

TEST_CASE("extract_raw_features resamples to a fixed-length vector") {
  auto seg = tone_segment(100.0, 4160, 2.0);
  const auto fv = extract_raw_features(seg, 1040);
  REQUIRE(fv.values.size() == 2080);
  REQUIRE(fv.feature_names[0] == "s0");
}

TEST_CASE("pca_fit on data varying along one axis keeps one component") {
  Eigen::MatrixXd X(40, 3);
  Rng rng(4);
  for (int i = 0; i < 40; ++i) {
    const double t = rng.gaussian();
    X(i, 0) = 2.0 * t;
    X(i, 1) = -t;
    X(i, 2) = 0.5 * t;
  }
  const auto model = pca_fit(X, 0.9999);
  REQUIRE(model.retained_count == 1);
}

TEST_CASE("pca_fit with full retention keeps the numerical rank") {
  Eigen::MatrixXd X(50, 4);
  Rng rng(5);
  for (int i = 0; i < 50; ++i) {
    const double a = rng.gaussian(), b = rng.gaussian();
    X(i, 0) = a;
    X(i, 1) = b;
    X(i, 2) = a + b;       // dependent
    X(i, 3) = 2.0 * a - b; // dependent
  }
  const auto model = pca_fit(X, 1.0);
  REQUIRE(model.retained_count == 2);
}

TEST_CASE("pca_fit on an isotropic 3-D sample at 50% retention keeps two components") {
  Eigen::MatrixXd X(500, 3);
  Rng rng(6);
  for (int i = 0; i < 500; ++i)
    for (int j = 0; j < 3; ++j) X(i, j) = rng.gaussian();
  const auto model = pca_fit(X, 0.5);
  REQUIRE(model.retained_count == 2);
}

TEST_CASE("pca components are orthonormal and the Gram path matches") {
  Rng rng(7);
  Eigen::MatrixXd X(12, 40);  // fewer rows than columns: Gram route
  for (int i = 0; i < 12; ++i)
    for (int j = 0; j < 40; ++j) X(i, j) = rng.gaussian();
  const auto model = pca_fit(X, 1.0);
  const Eigen::MatrixXd gtg =
      model.components.transpose() * model.components;
  REQUIRE((gtg - Eigen::MatrixXd::Identity(gtg.rows(), gtg.cols())).cwiseAbs().maxCoeff() < 1e-10);
  REQUIRE(model.retained_count <= 11);
}

TEST_CASE("pca_transform maps the mean to zero and preserves distances") {
  Rng rng(8);
  Eigen::MatrixXd X(60, 5);
  for (int i = 0; i < 60; ++i)
    for (int j = 0; j < 5; ++j) X(i, j) = rng.gaussian();
  const auto model = pca_fit(X, 1.0);
  REQUIRE(pca_transform(model, Eigen::VectorXd(model.mean_vector)).norm() < 1e-12);

  const Eigen::VectorXd a = X.row(3), b = X.row(17);
  const double orig = (a - b).norm();
  const double proj = (pca_transform(model, a) - pca_transform(model, b)).norm();
  // full-rank retention: projection is an isometry on the data span
  REQUIRE(proj == Approx(orig).epsilon(1e-10));
}

TEST_CASE("pca roundtrip error is bounded by the discarded variance") {
  Rng rng(9);
  Eigen::MatrixXd X(80, 6);
  for (int i = 0; i < 80; ++i)
    for (int j = 0; j < 6; ++j) X(i, j) = rng.gaussian() * double(j + 1);
  const auto model = pca_fit(X, 0.8);
  REQUIRE(model.retained_count < 6);

  double kept_ratio = 0.0;
  for (int i = 0; i < model.retained_count; ++i)
    kept_ratio += model.explained_variance_ratios[std::size_t(i)];
  const Eigen::MatrixXd centered = X.rowwise() - model.mean_vector.transpose();
  double resid = 0.0;
  for (int i = 0; i < 80; ++i) {
    const Eigen::VectorXd x = X.row(i);
    resid += (x - pca_reconstruct(model, pca_transform(model, x))).squaredNorm();
  }
  REQUIRE(resid <= (1.0 - kept_ratio) * centered.squaredNorm() * (1.0 + 1e-9) + 1e-9);
}

TEST_CASE("standardizer uses unit scale for constant features") {
  Eigen::MatrixXd X(3, 2);
  X << 1.0, 5.0, 2.0, 5.0, 3.0, 5.0;
  Standardizer s;
  s.fit(X);
  const Eigen::MatrixXd Z = s.transform(X);
  REQUIRE(Z.col(0).mean() == Approx(0.0).margin(1e-12));
  REQUIRE(Z(0, 1) == 0.0);
  REQUIRE(Z(2, 1) == 0.0);
}

TEST_CASE("feature CSV round-trips exactly") {
  Dataset data;
  Rng rng(10);
  for (int i = 0; i < 7; ++i) {
    FeatureVector fv;
    fv.feature_names = {"f0", "f1", "f2"};
    fv.values = {rng.gaussian(), rng.gaussian() * 1e-7, rng.gaussian() * 1e9};
    fv.label = i % 2 == 0 ? "alpha" : "beta";
    data.add(std::move(fv));
  }
  const auto path = std::filesystem::path("sid_test_tmp") / "features.csv";
  std::filesystem::create_directories(path.parent_path());
  write_feature_csv(data, path.string());
  const auto back = read_feature_csv(path.string());
  REQUIRE(back.rows.size() == data.rows.size());
  REQUIRE(back.class_names == std::vector<std::string>{"alpha", "beta"});
  for (std::size_t i = 0; i < data.rows.size(); ++i) {
    REQUIRE(back.rows[i].values == data.rows[i].values);
    REQUIRE(back.rows[i].label == data.rows[i].label);
  }
}

TEST_CASE("dataset rejects inconsistent dimensions") {
  Dataset data;
  FeatureVector a;
  a.feature_names = {"x"};
  a.values = {1.0};
  a.label = "l";
  data.add(a);
  FeatureVector b;
  b.feature_names = {"x", "y"};
  b.values = {1.0, 2.0};
  b.label = "l";
  REQUIRE_THROWS_AS(data.add(b), std::invalid_argument);
}
