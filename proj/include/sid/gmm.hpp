#pragma once

// Diagonal-covariance Gaussian mixtures trained by k-means-initialized EM,
// and the per-class bank scored by log-likelihood.

#include <Eigen/Core>
#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "sid/random.hpp"

namespace sid {

// k-means++ seeding followed by Lloyd iterations until the assignment
// fixpoint. Empty clusters are re-seeded with the farthest point.
inline Eigen::MatrixXd kmeans(const Eigen::MatrixXd& X, int k, std::uint64_t seed,
                              int max_iter = 100) {
  const auto n = std::size_t(X.rows());
  if (k < 1) throw std::invalid_argument("kmeans: k must be >= 1");
  if (std::size_t(k) > n) throw std::invalid_argument("kmeans: k exceeds the number of rows");

  Rng rng(seed);
  Eigen::MatrixXd centers(k, X.cols());
  std::vector<double> dist2(n, std::numeric_limits<double>::max());
  std::vector<bool> chosen(n, false);

  const std::size_t first = rng.uniform_index(n);
  centers.row(0) = X.row(Eigen::Index(first));
  chosen[first] = true;
  for (int c = 1; c < k; ++c) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = (X.row(Eigen::Index(i)) - centers.row(c - 1)).squaredNorm();
      dist2[i] = std::min(dist2[i], d);
      if (!chosen[i]) total += dist2[i];
    }
    std::size_t next = n;
    if (total > 0.0) {
      double r = rng.uniform01() * total;
      for (std::size_t i = 0; i < n; ++i) {
        if (chosen[i]) continue;
        r -= dist2[i];
        if (r <= 0.0) {
          next = i;
          break;
        }
      }
    }
    if (next == n) {  // duplicates or rounding: first unchosen point
      for (std::size_t i = 0; i < n; ++i)
        if (!chosen[i]) {
          next = i;
          break;
        }
    }
    centers.row(c) = X.row(Eigen::Index(next));
    chosen[next] = true;
  }

  std::vector<int> assign(n, -1);
  for (int it = 0; it < max_iter; ++it) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      int best = 0;
      double best_d = (X.row(Eigen::Index(i)) - centers.row(0)).squaredNorm();
      for (int c = 1; c < k; ++c) {
        const double d = (X.row(Eigen::Index(i)) - centers.row(c)).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (assign[i] != best) {
        assign[i] = best;
        changed = true;
      }
    }
    if (!changed) break;

    for (int c = 0; c < k; ++c) {
      Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(X.cols());
      int count = 0;
      for (std::size_t i = 0; i < n; ++i)
        if (assign[i] == c) {
          mean += X.row(Eigen::Index(i));
          ++count;
        }
      if (count > 0) {
        centers.row(c) = mean / double(count);
      } else {
        // farthest point from its own center, lowest index on ties
        std::size_t far = 0;
        double far_d = -1.0;
        for (std::size_t i = 0; i < n; ++i) {
          const double d = (X.row(Eigen::Index(i)) - centers.row(assign[i])).squaredNorm();
          if (d > far_d) {
            far_d = d;
            far = i;
          }
        }
        centers.row(c) = X.row(Eigen::Index(far));
        assign[far] = c;
      }
    }
  }
  return centers;
}

struct GmmModel {
  Eigen::VectorXd weights;   // K, on the simplex
  Eigen::MatrixXd means;     // K x D
  Eigen::MatrixXd variances; // K x D diagonal covariances
  int components = 0;
  std::vector<double> fit_log_likelihoods;  // per EM iteration, for diagnostics

  Eigen::Index dim() const { return means.cols(); }
};

namespace detail {

inline double log_gaussian_diag(const GmmModel& m, int k, const Eigen::VectorXd& x) {
  double acc = 0.0;
  for (Eigen::Index d = 0; d < m.dim(); ++d) {
    const double var = m.variances(k, d);
    const double diff = x(d) - m.means(k, d);
    acc += std::log(2.0 * M_PI * var) + diff * diff / var;
  }
  return -0.5 * acc;
}

}  // namespace detail

// log p(x | model) via log-sum-exp over the components
inline double gmm_log_likelihood(const GmmModel& model, const Eigen::VectorXd& x) {
  if (x.size() != model.dim()) throw std::invalid_argument("gmm_log_likelihood: dimension mismatch");
  double best = -std::numeric_limits<double>::infinity();
  std::vector<double> lg(std::size_t(model.components));
  for (int k = 0; k < model.components; ++k) {
    lg[std::size_t(k)] = std::log(model.weights(k)) + detail::log_gaussian_diag(model, k, x);
    best = std::max(best, lg[std::size_t(k)]);
  }
  if (!std::isfinite(best)) return best;
  double acc = 0.0;
  for (double v : lg) acc += std::exp(v - best);
  return best + std::log(acc);
}

// E-step membership weights for one point; rows of the full E-step matrix
inline Eigen::VectorXd gmm_membership(const GmmModel& model, const Eigen::VectorXd& x) {
  Eigen::VectorXd lg(model.components);
  double best = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < model.components; ++k) {
    lg(k) = std::log(model.weights(k)) + detail::log_gaussian_diag(model, k, x);
    best = std::max(best, lg(k));
  }
  Eigen::VectorXd w = (lg.array() - best).exp();
  return w / w.sum();
}

// EM with k-means initialization; diagonal covariances floored at var_floor.
// The per-iteration training log-likelihood is recorded and is
// non-decreasing up to floating-point slack.
inline GmmModel gmm_fit(const Eigen::MatrixXd& X, int k, std::uint64_t seed, double tol = 1e-6,
                        int max_iter = 200, double var_floor = 1e-6) {
  const auto n = X.rows();
  if (k < 1) throw std::invalid_argument("gmm_fit: k must be >= 1");
  if (n <= k) throw std::invalid_argument("gmm_fit: need more rows than components");
  bool all_same = true;
  for (Eigen::Index i = 1; i < n && all_same; ++i)
    all_same = (X.row(i) - X.row(0)).cwiseAbs().maxCoeff() == 0.0;
  if (all_same)
    throw std::invalid_argument("gmm_fit: all rows identical (degenerate density)");

  GmmModel m;
  m.components = k;
  m.means = kmeans(X, k, seed);
  m.weights.resize(k);
  m.variances.resize(k, X.cols());

  // hard-assignment initialization of weights and variances
  std::vector<int> assign(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    int best = 0;
    double best_d = (X.row(i) - m.means.row(0)).squaredNorm();
    for (int c = 1; c < k; ++c) {
      const double d = (X.row(i) - m.means.row(c)).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = c;
      }
    }
    assign[std::size_t(i)] = best;
  }
  for (int c = 0; c < k; ++c) {
    int count = 0;
    Eigen::RowVectorXd var = Eigen::RowVectorXd::Zero(X.cols());
    for (Eigen::Index i = 0; i < n; ++i)
      if (assign[std::size_t(i)] == c) {
        var += (X.row(i) - m.means.row(c)).array().square().matrix();
        ++count;
      }
    m.weights(c) = double(std::max(count, 1)) / double(n);
    if (count > 0) var /= double(count);
    m.variances.row(c) = var.array().max(var_floor);
  }
  m.weights /= m.weights.sum();

  Eigen::MatrixXd resp(n, k);
  double prev_ll = -std::numeric_limits<double>::infinity();
  for (int it = 0; it < max_iter; ++it) {
    // E-step with log-sum-exp
    double ll = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      double best = -std::numeric_limits<double>::infinity();
      for (int c = 0; c < k; ++c) {
        resp(i, c) = std::log(m.weights(c)) + detail::log_gaussian_diag(m, c, X.row(i).transpose());
        best = std::max(best, resp(i, c));
      }
      double denom = 0.0;
      for (int c = 0; c < k; ++c) denom += std::exp(resp(i, c) - best);
      ll += best + std::log(denom);
      for (int c = 0; c < k; ++c) resp(i, c) = std::exp(resp(i, c) - best) / denom;
    }
    m.fit_log_likelihoods.push_back(ll);
    if (it > 0 && ll - prev_ll < tol) break;
    prev_ll = ll;

    // M-step
    for (int c = 0; c < k; ++c) {
      const double nk = std::max(resp.col(c).sum(), 1e-10);
      m.weights(c) = nk / double(n);
      Eigen::RowVectorXd mu = Eigen::RowVectorXd::Zero(X.cols());
      for (Eigen::Index i = 0; i < n; ++i) mu += resp(i, c) * X.row(i);
      mu /= nk;
      Eigen::RowVectorXd var = Eigen::RowVectorXd::Zero(X.cols());
      for (Eigen::Index i = 0; i < n; ++i)
        var += resp(i, c) * (X.row(i) - mu).array().square().matrix();
      m.means.row(c) = mu;
      m.variances.row(c) = (var / nk).array().max(var_floor);
    }
    m.weights /= m.weights.sum();
  }
  return m;
}

struct GmmBank {
  std::vector<GmmModel> models;  // one per class, class order
  std::vector<std::string> class_names;
};

inline GmmBank gmm_bank_train(const Eigen::MatrixXd& X, const std::vector<int>& labels,
                              const std::vector<std::string>& class_names, int k,
                              std::uint64_t seed, double tol = 1e-6, int max_iter = 200) {
  if (class_names.size() < 2) throw std::invalid_argument("gmm_bank_train: need >= 2 classes");
  GmmBank bank;
  bank.class_names = class_names;
  for (std::size_t c = 0; c < class_names.size(); ++c) {
    std::vector<Eigen::Index> rows;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == int(c)) rows.push_back(Eigen::Index(i));
    if (rows.empty())
      throw std::invalid_argument("gmm_bank_train: class '" + class_names[c] + "' has no samples");
    Eigen::MatrixXd Xc(Eigen::Index(rows.size()), X.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) Xc.row(Eigen::Index(i)) = X.row(rows[i]);
    bank.models.push_back(gmm_fit(Xc, k, seed + c, tol, max_iter));
  }
  return bank;
}

// argmax class log-likelihood; ties go to the lowest class index
inline int gmm_bank_predict(const GmmBank& bank, const Eigen::VectorXd& x) {
  if (bank.models.empty()) throw std::invalid_argument("gmm_bank_predict: empty bank");
  int best = 0;
  double best_ll = gmm_log_likelihood(bank.models[0], x);
  for (std::size_t c = 1; c < bank.models.size(); ++c) {
    const double ll = gmm_log_likelihood(bank.models[c], x);
    if (ll > best_ll) {
      best_ll = ll;
      best = int(c);
    }
  }
  return best;
}

}  // namespace sid
