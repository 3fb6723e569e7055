#include <catch2/catch.hpp>

#include <sid/gmm.hpp>
#include <sid/random.hpp>

using namespace sid;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

MatrixXd two_pair_points() {
  MatrixXd X(4, 2);
  X << 0.0, 0.0, 1.0, 0.0, 10.0, 10.0, 11.0, 10.0;
  return X;
}

}  // namespace

TEST_CASE("kmeans with k = n returns the points themselves") {
  MatrixXd X(3, 2);
  X << 0.0, 0.0, 5.0, 1.0, -2.0, 4.0;
  const MatrixXd centers = kmeans(X, 3, 123);
  // every point must appear exactly once among the centers
  std::vector<bool> seen(3, false);
  for (int c = 0; c < 3; ++c) {
    bool matched = false;
    for (int i = 0; i < 3; ++i)
      if (!seen[std::size_t(i)] && (centers.row(c) - X.row(i)).norm() < 1e-12) {
        seen[std::size_t(i)] = true;
        matched = true;
        break;
      }
    REQUIRE(matched);
  }
}

TEST_CASE("kmeans finds pair midpoints for two far-separated pairs") {
  const MatrixXd X = two_pair_points();
  const MatrixXd centers = kmeans(X, 2, 7);
  std::vector<Eigen::RowVector2d> expected{{0.5, 0.0}, {10.5, 10.0}};
  for (const auto& e : expected) {
    double best = 1e300;
    for (int c = 0; c < 2; ++c) best = std::min(best, (centers.row(c) - e).norm());
    REQUIRE(best < 1e-12);
  }
}

TEST_CASE("kmeans is deterministic for a fixed seed") {
  Rng rng(3);
  MatrixXd X(50, 3);
  for (int i = 0; i < 50; ++i)
    for (int j = 0; j < 3; ++j) X(i, j) = rng.gaussian();
  REQUIRE(kmeans(X, 5, 99) == kmeans(X, 5, 99));
  REQUIRE_THROWS_AS(kmeans(X, 51, 1), std::invalid_argument);
}

TEST_CASE("gmm membership weights sum to one per point") {
  Rng rng(5);
  MatrixXd X(200, 2);
  for (int i = 0; i < 200; ++i) {
    const double off = i % 2 == 0 ? -3.0 : 3.0;
    X(i, 0) = off + rng.gaussian();
    X(i, 1) = rng.gaussian();
  }
  const auto model = gmm_fit(X, 3, 11);
  for (int i = 0; i < 200; ++i) {
    const VectorXd w = gmm_membership(model, X.row(i).transpose());
    REQUIRE(w.sum() == Approx(1.0).margin(1e-12));
    for (Eigen::Index c = 0; c < w.size(); ++c) REQUIRE(w(c) >= 0.0);
  }
}

TEST_CASE("single-component fit recovers sample mean and population variance") {
  Rng rng(6);
  MatrixXd X(500, 2);
  for (int i = 0; i < 500; ++i) {
    X(i, 0) = 2.0 + 0.7 * rng.gaussian();
    X(i, 1) = -1.0 + 1.3 * rng.gaussian();
  }
  const auto model = gmm_fit(X, 1, 1);
  REQUIRE(model.weights(0) == Approx(1.0).margin(1e-12));
  for (int j = 0; j < 2; ++j) {
    REQUIRE(model.means(0, j) == Approx(X.col(j).mean()).margin(1e-9));
    const double var = (X.col(j).array() - X.col(j).mean()).square().mean();
    REQUIRE(model.variances(0, j) == Approx(var).epsilon(1e-9));
  }
}

TEST_CASE("EM recovers a planted two-component mixture") {
  Rng rng(42);
  const int n = 2000;
  MatrixXd X(n, 2);
  for (int i = 0; i < n; ++i) {
    const double off = i % 2 == 0 ? 5.0 : -5.0;
    X(i, 0) = off + rng.gaussian();
    X(i, 1) = off + rng.gaussian();
  }
  const auto model = gmm_fit(X, 2, 42);

  // match components to planted means
  const Eigen::RowVector2d plus(5.0, 5.0), minus(-5.0, -5.0);
  int ip = (model.means.row(0) - plus).norm() < (model.means.row(1) - plus).norm() ? 0 : 1;
  REQUIRE((model.means.row(ip) - plus).norm() < 0.1);
  REQUIRE((model.means.row(1 - ip) - minus).norm() < 0.1);
  REQUIRE(model.weights(0) == Approx(0.5).margin(0.05));
  REQUIRE(model.weights(1) == Approx(0.5).margin(0.05));

  // log-likelihood non-decreasing at every EM iteration
  const auto& ll = model.fit_log_likelihoods;
  REQUIRE(ll.size() >= 2);
  for (std::size_t i = 1; i < ll.size(); ++i)
    REQUIRE(ll[i] >= ll[i - 1] - 1e-9 * std::abs(ll[i - 1]));
}

TEST_CASE("gmm_fit is bit-reproducible for a fixed seed") {
  Rng rng(77);
  MatrixXd X(150, 2);
  for (int i = 0; i < 150; ++i) {
    const double off = i % 3 == 0 ? -4.0 : (i % 3 == 1 ? 0.0 : 4.0);
    X(i, 0) = off + rng.gaussian();
    X(i, 1) = rng.gaussian();
  }
  const auto a = gmm_fit(X, 3, 21);
  const auto b = gmm_fit(X, 3, 21);
  REQUIRE(a.weights == b.weights);
  REQUIRE(a.means == b.means);
  REQUIRE(a.variances == b.variances);
}

TEST_CASE("gmm weights stay on the simplex") {
  Rng rng(10);
  MatrixXd X(300, 3);
  for (int i = 0; i < 300; ++i)
    for (int j = 0; j < 3; ++j) X(i, j) = rng.gaussian() * (j + 1);
  const auto model = gmm_fit(X, 4, 3);
  REQUIRE(model.weights.sum() == Approx(1.0).margin(1e-10));
  for (int c = 0; c < 4; ++c) REQUIRE(model.weights(c) >= 0.0);
}

TEST_CASE("gmm_fit rejects degenerate inputs") {
  MatrixXd X(5, 2);
  X.setOnes();
  REQUIRE_THROWS_WITH(gmm_fit(X, 2, 1), Catch::Contains("identical"));
  MatrixXd Y(3, 2);
  Y << 1, 2, 3, 4, 5, 6;
  REQUIRE_THROWS_AS(gmm_fit(Y, 3, 1), std::invalid_argument);  // k >= rows
}

TEST_CASE("gmm_log_likelihood of a standard normal at its mode") {
  GmmModel m;
  m.components = 1;
  m.weights = VectorXd::Ones(1);
  m.means = MatrixXd::Zero(1, 1);
  m.variances = MatrixXd::Ones(1, 1);
  VectorXd x(1);
  x << 0.0;
  REQUIRE(gmm_log_likelihood(m, x) == Approx(std::log(1.0 / std::sqrt(2.0 * M_PI))).margin(1e-12));
}

TEST_CASE("membership is split 50/50 at the midpoint of symmetric components") {
  GmmModel m;
  m.components = 2;
  m.weights = VectorXd::Constant(2, 0.5);
  m.means = MatrixXd(2, 1);
  m.means << -2.0, 2.0;
  m.variances = MatrixXd::Ones(2, 1);
  VectorXd x(1);
  x << 0.0;
  const VectorXd w = gmm_membership(m, x);
  REQUIRE(w(0) == Approx(0.5).margin(1e-12));
  REQUIRE(w(1) == Approx(0.5).margin(1e-12));
}

TEST_CASE("likelihood decays monotonically away from a single mean") {
  GmmModel m;
  m.components = 1;
  m.weights = VectorXd::Ones(1);
  m.means = MatrixXd::Zero(1, 2);
  m.variances = MatrixXd::Ones(1, 2);
  double prev = gmm_log_likelihood(m, Eigen::Vector2d(0.0, 0.0));
  for (double r = 0.5; r < 5.0; r += 0.5) {
    const double ll = gmm_log_likelihood(m, Eigen::Vector2d(r, 0.0));
    REQUIRE(ll < prev);
    prev = ll;
  }
}

TEST_CASE("log-sum-exp keeps far points finite") {
  GmmModel m;
  m.components = 2;
  m.weights = VectorXd::Constant(2, 0.5);
  m.means = MatrixXd::Zero(2, 3);
  m.means.row(1).setConstant(1.0);
  m.variances = MatrixXd::Ones(2, 3);
  VectorXd x = VectorXd::Constant(3, 1e3);
  REQUIRE(std::isfinite(gmm_log_likelihood(m, x)));
}

TEST_CASE("gmm bank identifies planted classes on held-out draws") {
  Rng rng(55);
  const std::vector<std::string> names{"w", "x", "y", "z"};
  const double cx[4] = {0.0, 12.0, 0.0, 12.0};
  const double cy[4] = {0.0, 0.0, 12.0, 12.0};
  const int per_class = 200;
  MatrixXd X(4 * per_class, 2);
  std::vector<int> y(std::size_t(4 * per_class));
  for (int c = 0; c < 4; ++c)
    for (int i = 0; i < per_class; ++i) {
      const int r = c * per_class + i;
      X(r, 0) = cx[c] + rng.gaussian();
      X(r, 1) = cy[c] + rng.gaussian();
      y[std::size_t(r)] = c;
    }
  const auto bank = gmm_bank_train(X, y, names, 2, 9);
  REQUIRE(bank.models.size() == 4);

  // a point at one class mean belongs to that class
  REQUIRE(gmm_bank_predict(bank, Eigen::Vector2d(12.0, 12.0)) == 3);

  int correct = 0;
  const int trials = 200;
  for (int t = 0; t < trials; ++t) {
    const int c = t % 4;
    const Eigen::Vector2d probe(cx[c] + rng.gaussian(), cy[c] + rng.gaussian());
    correct += gmm_bank_predict(bank, probe) == c;
  }
  REQUIRE(double(correct) / trials >= 0.95);
}

TEST_CASE("bank prediction ties go to the lowest class index") {
  GmmModel m;
  m.components = 1;
  m.weights = VectorXd::Ones(1);
  m.means = MatrixXd::Zero(1, 1);
  m.variances = MatrixXd::Ones(1, 1);
  GmmBank bank;
  bank.class_names = {"a", "b"};
  bank.models = {m, m};
  VectorXd x(1);
  x << 0.3;
  REQUIRE(gmm_bank_predict(bank, x) == 0);
}
