#pragma once

// Robust PCA by the inexact augmented Lagrange multiplier method: splits a
// nonnegative spectrogram magnitude matrix into a low-rank part (steady
// accompaniment) and a sparse part (voice), and resynthesizes both stems
// with the mixture phase.

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <stdexcept>
#include <utility>
#include <vector>

#include "sid/stft.hpp"

namespace sid {

struct RpcaConfig {
  double lambda = 0.0;  // <= 0 selects 1/sqrt(max(n, p))
  double mu0 = 0.0;     // <= 0 selects 1.25 / ||V||_2
  double rho = 1.6;     // penalty growth, > 1
  double tol = 1e-7;    // relative Frobenius residual
  int max_iter = 500;
};

struct RpcaDecomposition {
  Eigen::MatrixXd low_rank;
  Eigen::MatrixXd sparse;
  int iterations = 0;
  double final_residual = 0.0;
  std::vector<double> residual_history;  // one entry per iteration

  bool converged(double tol) const { return final_residual <= tol; }
};

// Elementwise shrinkage sign(m) * max(|m| - tau, 0): the proximal operator
// of tau * ||.||_1.
inline Eigen::MatrixXd soft_threshold(const Eigen::MatrixXd& m, double tau) {
  if (tau < 0.0) throw std::invalid_argument("soft_threshold: tau must be >= 0");
  return m.unaryExpr([tau](double v) {
    const double mag = std::abs(v) - tau;
    return mag > 0.0 ? (v > 0.0 ? mag : -mag) : 0.0;
  });
}

// Proximal operator of tau * ||.||_*: SVD, shrink the singular values,
// rebuild from the surviving components.
inline Eigen::MatrixXd singular_value_threshold(const Eigen::MatrixXd& m, double tau) {
  if (tau < 0.0) throw std::invalid_argument("singular_value_threshold: tau must be >= 0");
  if (!m.allFinite())
    throw std::invalid_argument("singular_value_threshold: matrix has non-finite entries");
  Eigen::BDCSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  Eigen::Index rank = 0;
  while (rank < sv.size() && sv(rank) > tau) ++rank;
  if (rank == 0) return Eigen::MatrixXd::Zero(m.rows(), m.cols());
  return svd.matrixU().leftCols(rank) *
         (sv.head(rank).array() - tau).matrix().asDiagonal() *
         svd.matrixV().leftCols(rank).transpose();
}

// Inexact ALM iteration
//   L <- SVT(V - S + Y/mu, 1/mu)
//   S <- shrink(V - L + Y/mu, lambda/mu)
//   Y <- Y + mu (V - L - S);  mu <- rho mu
// until ||V - L - S||_F / ||V||_F <= tol. Non-convergence is reported via
// final_residual > tol rather than thrown.
inline RpcaDecomposition rpca_alm(const Eigen::MatrixXd& V, RpcaConfig config = {}) {
  if (V.size() == 0) throw std::invalid_argument("rpca_alm: empty matrix");
  if (!V.allFinite()) throw std::invalid_argument("rpca_alm: matrix has non-finite entries");
  if (config.rho <= 1.0) throw std::invalid_argument("rpca_alm: rho must be > 1");
  if (config.tol <= 0.0) throw std::invalid_argument("rpca_alm: tol must be > 0");
  if (config.max_iter < 1) throw std::invalid_argument("rpca_alm: max_iter must be >= 1");

  RpcaDecomposition out;
  const double norm_v = V.norm();
  if (norm_v == 0.0) {
    out.low_rank = Eigen::MatrixXd::Zero(V.rows(), V.cols());
    out.sparse = Eigen::MatrixXd::Zero(V.rows(), V.cols());
    out.iterations = 1;
    out.final_residual = 0.0;
    out.residual_history = {0.0};
    return out;
  }

  const double lambda =
      config.lambda > 0.0 ? config.lambda : 1.0 / std::sqrt(double(std::max(V.rows(), V.cols())));
  const double spectral = Eigen::BDCSVD<Eigen::MatrixXd>(V).singularValues()(0);
  double mu = config.mu0 > 0.0 ? config.mu0 : 1.25 / spectral;
  const double mu_cap = mu * 1e12;

  // standard dual-feasible start for Y
  const double y_scale = std::max(spectral, V.cwiseAbs().maxCoeff() / lambda);
  Eigen::MatrixXd Y = V / y_scale;
  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(V.rows(), V.cols());
  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(V.rows(), V.cols());

  for (int it = 1; it <= config.max_iter; ++it) {
    L = singular_value_threshold(V - S + Y / mu, 1.0 / mu);
    S = soft_threshold(V - L + Y / mu, lambda / mu);
    const Eigen::MatrixXd R = V - L - S;
    Y += mu * R;
    mu = std::min(mu * config.rho, mu_cap);
    const double residual = R.norm() / norm_v;
    out.residual_history.push_back(residual);
    out.iterations = it;
    out.final_residual = residual;
    if (residual <= config.tol) break;
  }
  out.low_rank = std::move(L);
  out.sparse = std::move(S);
  return out;
}

// Runs RPCA on the magnitude spectrogram, clamps negatives, reattaches the
// mixture phase and inverts. Returns (voice, accompaniment).
inline std::pair<AudioClip, AudioClip> separate_voice(const Spectrogram& spec,
                                                      RpcaConfig config = {}) {
  const Eigen::MatrixXd magnitude = spec.bins.cwiseAbs();
  RpcaDecomposition dec = rpca_alm(magnitude, config);

  Eigen::MatrixXcd phase(spec.bins.rows(), spec.bins.cols());
  for (Eigen::Index j = 0; j < spec.bins.cols(); ++j)
    for (Eigen::Index i = 0; i < spec.bins.rows(); ++i) {
      const cplx v = spec.bins(i, j);
      const double mag = std::abs(v);
      phase(i, j) = mag > 0.0 ? v / mag : cplx(1.0, 0.0);
    }

  Spectrogram voice_spec = spec;
  Spectrogram music_spec = spec;
  voice_spec.bins = dec.sparse.cwiseMax(0.0).cast<cplx>().cwiseProduct(phase);
  music_spec.bins = dec.low_rank.cwiseMax(0.0).cast<cplx>().cwiseProduct(phase);
  return {istft(voice_spec), istft(music_spec)};
}

}  // namespace sid
