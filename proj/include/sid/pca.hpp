#pragma once

// Principal component analysis with variance-based component selection.
// When there are fewer samples than features the eigenproblem is solved on
// the Gram matrix instead of the covariance, which keeps the raw-waveform
// feature path (tens of thousands of columns) tractable.

#include <Eigen/Dense>
#include <stdexcept>
#include <vector>

#include "sid/features.hpp"

namespace sid {

struct PcaModel {
  Eigen::VectorXd mean_vector;
  Eigen::MatrixXd components;  // d x m, orthonormal columns
  std::vector<double> explained_variance_ratios;  // descending, over positive spectrum
  int retained_count = 0;
};

// Fits on rows of X, retaining the smallest leading set of components whose
// explained-variance ratios reach variance_retained. variance_retained = 1
// keeps the full (numerical) rank.
inline PcaModel pca_fit(const Eigen::MatrixXd& X, double variance_retained) {
  if (X.rows() < 2) throw std::invalid_argument("pca_fit: need at least 2 rows");
  if (variance_retained <= 0.0 || variance_retained > 1.0)
    throw std::invalid_argument("pca_fit: variance_retained must be in (0, 1]");

  PcaModel model;
  model.mean_vector = X.colwise().mean();
  const Eigen::MatrixXd centered = X.rowwise() - model.mean_vector.transpose();
  const Eigen::Index n = X.rows(), d = X.cols();

  Eigen::VectorXd eigvals;   // descending
  Eigen::MatrixXd eigvecs;   // d x count, orthonormal
  if (d <= n) {
    const Eigen::MatrixXd cov = centered.transpose() * centered / double(n - 1);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    eigvals = es.eigenvalues().reverse();
    eigvecs = es.eigenvectors().rowwise().reverse();
  } else {
    const Eigen::MatrixXd gram = centered * centered.transpose() / double(n - 1);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
    eigvals = es.eigenvalues().reverse();
    eigvecs.resize(d, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      Eigen::VectorXd v = centered.transpose() * es.eigenvectors().rowwise().reverse().col(i);
      const double norm = v.norm();
      eigvecs.col(i) = norm > 1e-300 ? Eigen::VectorXd(v / norm) : Eigen::VectorXd::Zero(d);
    }
  }

  // positive spectrum only; tiny/negative values are numerical rank deficiency
  double total = 0.0;
  const double floor = std::max(eigvals.size() > 0 ? eigvals(0) : 0.0, 0.0) * 1e-12;
  Eigen::Index rank = 0;
  for (Eigen::Index i = 0; i < eigvals.size(); ++i)
    if (eigvals(i) > floor && eigvals(i) > 0.0) {
      total += eigvals(i);
      ++rank;
    }
  if (rank == 0) {
    model.components.resize(d, 0);
    model.retained_count = 0;
    return model;
  }
  model.explained_variance_ratios.resize(std::size_t(rank));
  for (Eigen::Index i = 0; i < rank; ++i)
    model.explained_variance_ratios[std::size_t(i)] = eigvals(i) / total;

  double cum = 0.0;
  Eigen::Index keep = rank;
  for (Eigen::Index i = 0; i < rank; ++i) {
    cum += model.explained_variance_ratios[std::size_t(i)];
    if (cum >= variance_retained - 1e-12) {
      keep = i + 1;
      break;
    }
  }
  model.components = eigvecs.leftCols(keep);
  model.retained_count = int(keep);
  return model;
}

inline PcaModel pca_fit(const Dataset& data, double variance_retained) {
  return pca_fit(data.matrix(), variance_retained);
}

inline Eigen::VectorXd pca_transform(const PcaModel& model, const Eigen::VectorXd& x) {
  if (x.size() != model.mean_vector.size())
    throw std::invalid_argument("pca_transform: dimension mismatch");
  return model.components.transpose() * (x - model.mean_vector);
}

inline Eigen::MatrixXd pca_transform(const PcaModel& model, const Eigen::MatrixXd& X) {
  if (X.cols() != model.mean_vector.size())
    throw std::invalid_argument("pca_transform: dimension mismatch");
  return (X.rowwise() - model.mean_vector.transpose()) * model.components;
}

// back-projection into the original space (used to bound roundtrip error)
inline Eigen::VectorXd pca_reconstruct(const PcaModel& model, const Eigen::VectorXd& z) {
  return model.mean_vector + model.components * z;
}

}  // namespace sid
