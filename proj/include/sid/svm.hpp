#pragma once

// Kernel SVM trained by sequential minimal optimization on the dual, plus
// the one-against-all multiclass wrapper. The solver is deterministic: no
// random working-set choices, so identical data yields identical models.

#include <Eigen/Core>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace sid {

struct KernelSpec {
  enum class Kind { linear, polynomial, rbf };
  Kind kind = Kind::linear;
  int degree = 3;       // polynomial
  double alpha = 1.0;   // polynomial slope
  double c = 1.0;       // polynomial constant
  double gamma = 1.0;   // rbf

  static KernelSpec linear() { return {}; }
  static KernelSpec polynomial(int degree, double alpha = 1.0, double c = 1.0) {
    KernelSpec k;
    k.kind = Kind::polynomial;
    k.degree = degree;
    k.alpha = alpha;
    k.c = c;
    return k;
  }
  static KernelSpec rbf(double gamma) {
    KernelSpec k;
    k.kind = Kind::rbf;
    k.gamma = gamma;
    return k;
  }
  // gamma = 1/(2 sigma^2) convention
  static KernelSpec rbf_from_sigma(double sigma) { return rbf(1.0 / (2.0 * sigma * sigma)); }

  std::string name() const {
    switch (kind) {
      case Kind::linear: return "linear";
      case Kind::polynomial: return "polynomial";
      case Kind::rbf: return "rbf";
    }
    return "?";
  }
};

// works on any Eigen vector expression (rows of a column-major matrix
// included, which are not contiguous in memory)
template <typename DerivedA, typename DerivedB>
double kernel_eval(const KernelSpec& spec, const Eigen::MatrixBase<DerivedA>& x,
                   const Eigen::MatrixBase<DerivedB>& y) {
  if (x.size() != y.size()) throw std::invalid_argument("kernel_eval: dimension mismatch");
  switch (spec.kind) {
    case KernelSpec::Kind::linear:
      return x.dot(y);
    case KernelSpec::Kind::polynomial:
      if (spec.degree < 1) throw std::invalid_argument("kernel_eval: degree must be >= 1");
      return std::pow(spec.alpha * x.dot(y) + spec.c, spec.degree);
    case KernelSpec::Kind::rbf:
      if (spec.gamma <= 0.0) throw std::invalid_argument("kernel_eval: gamma must be > 0");
      return std::exp(-spec.gamma * (x - y).squaredNorm());
  }
  return 0.0;
}

inline double kernel_eval(const KernelSpec& spec, std::span<const double> x,
                          std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("kernel_eval: dimension mismatch");
  const Eigen::Map<const Eigen::VectorXd> mx(x.data(), Eigen::Index(x.size()));
  const Eigen::Map<const Eigen::VectorXd> my(y.data(), Eigen::Index(y.size()));
  return kernel_eval(spec, mx, my);
}

// sklearn-style default: 1 / (n_features * overall variance)
inline double rbf_gamma_heuristic(const Eigen::MatrixXd& X) {
  const double var = (X.array() - X.mean()).square().mean();
  const double g = 1.0 / (double(X.cols()) * std::max(var, 1e-12));
  return g;
}

struct BinarySvmModel {
  Eigen::MatrixXd support_vectors;     // one row per SV
  Eigen::VectorXd dual_coefficients;   // alpha_i * y_i
  double bias = 0.0;                   // f(x) = sum dual_i k(sv_i, x) + bias
  KernelSpec kernel;
  double C = 1.0;
};

inline double svm_decision(const BinarySvmModel& model, std::span<const double> x) {
  if (Eigen::Index(x.size()) != model.support_vectors.cols())
    throw std::invalid_argument("svm_decision: dimension mismatch");
  const Eigen::Map<const Eigen::VectorXd> mx(x.data(), Eigen::Index(x.size()));
  double f = model.bias;
  for (Eigen::Index i = 0; i < model.support_vectors.rows(); ++i)
    f += model.dual_coefficients(i) *
         kernel_eval(model.kernel, model.support_vectors.row(i).transpose(), mx);
  return f;
}

namespace detail {

// Platt's SMO with the |E1 - E2| second-choice heuristic and deterministic
// fallback scans. The full kernel matrix is cached.
class SmoSolver {
 public:
  SmoSolver(const Eigen::MatrixXd& X, const std::vector<int>& y, const KernelSpec& kernel,
            double C, double tol)
      : X_(X), y_(y), kernel_(kernel), C_(C), tol_(tol), n_(std::size_t(X.rows())) {
    if (n_ > 20000) throw std::invalid_argument("svm_train_binary: too many samples for exact solver");
    K_.resize(Eigen::Index(n_), Eigen::Index(n_));
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t j = i; j < n_; ++j) {
        const double v = kernel_eval(kernel_, X_.row(Eigen::Index(i)).transpose(),
                                     X_.row(Eigen::Index(j)).transpose());
        K_(Eigen::Index(i), Eigen::Index(j)) = v;
        K_(Eigen::Index(j), Eigen::Index(i)) = v;
      }
    alpha_.assign(n_, 0.0);
    f_.assign(n_, 0.0);  // decision value cache, starts at b = 0
  }

  void solve() {
    const std::size_t max_steps = 500000 + 5000 * n_;
    std::size_t num_changed = 0;
    bool examine_all = true;
    while (num_changed > 0 || examine_all) {
      num_changed = 0;
      for (std::size_t i = 0; i < n_; ++i) {
        if (!examine_all && !is_free(i)) continue;
        num_changed += examine(i) ? 1 : 0;
        if (steps_ > max_steps)
          throw std::runtime_error(
              "svm_train_binary: SMO did not converge (steps=" + std::to_string(steps_) +
              ", max KKT violation=" + std::to_string(max_kkt_violation()) + ")");
      }
      if (examine_all)
        examine_all = false;
      else if (num_changed == 0)
        examine_all = true;
    }
  }

  BinarySvmModel extract() const {
    std::vector<Eigen::Index> sv;
    for (std::size_t i = 0; i < n_; ++i)
      if (alpha_[i] > 1e-12) sv.push_back(Eigen::Index(i));
    if (sv.empty()) throw std::runtime_error("svm_train_binary: training produced no support vectors");
    BinarySvmModel model;
    model.kernel = kernel_;
    model.C = C_;
    model.bias = b_;
    model.support_vectors.resize(Eigen::Index(sv.size()), X_.cols());
    model.dual_coefficients.resize(Eigen::Index(sv.size()));
    for (std::size_t s = 0; s < sv.size(); ++s) {
      model.support_vectors.row(Eigen::Index(s)) = X_.row(sv[s]);
      model.dual_coefficients(Eigen::Index(s)) = alpha_[std::size_t(sv[s])] * y_[std::size_t(sv[s])];
    }
    return model;
  }

  double max_kkt_violation() const {
    double worst = 0.0;
    for (std::size_t i = 0; i < n_; ++i) {
      const double margin = y_[i] * f(i);
      if (alpha_[i] < C_ - eps_) worst = std::max(worst, 1.0 - margin);
      if (alpha_[i] > eps_) worst = std::max(worst, margin - 1.0);
    }
    return worst;
  }

 private:
  double f(std::size_t i) const { return f_[i] + b_; }
  bool is_free(std::size_t i) const { return alpha_[i] > eps_ && alpha_[i] < C_ - eps_; }

  bool examine(std::size_t i2) {
    const double y2 = y_[i2];
    const double e2 = f(i2) - y2;
    const double r2 = e2 * y2;
    const bool violates = (r2 < -tol_ && alpha_[i2] < C_ - eps_) || (r2 > tol_ && alpha_[i2] > eps_);
    if (!violates) return false;

    // best |E1 - E2| among free points
    std::ptrdiff_t best = -1;
    double best_gap = 0.0;
    for (std::size_t i = 0; i < n_; ++i) {
      if (!is_free(i)) continue;
      const double gap = std::abs(f(i) - y_[i] - e2);
      if (gap > best_gap) {
        best_gap = gap;
        best = std::ptrdiff_t(i);
      }
    }
    if (best >= 0 && take_step(std::size_t(best), i2)) return true;
    for (std::size_t i = 0; i < n_; ++i)
      if (is_free(i) && take_step(i, i2)) return true;
    for (std::size_t i = 0; i < n_; ++i)
      if (take_step(i, i2)) return true;
    return false;
  }

  bool take_step(std::size_t i1, std::size_t i2) {
    if (i1 == i2) return false;
    ++steps_;
    const double y1 = y_[i1], y2 = y_[i2];
    const double a1_old = alpha_[i1], a2_old = alpha_[i2];
    const double e1 = f(i1) - y1, e2 = f(i2) - y2;
    const double s = y1 * y2;

    double lo, hi;
    if (s < 0) {
      lo = std::max(0.0, a2_old - a1_old);
      hi = std::min(C_, C_ + a2_old - a1_old);
    } else {
      lo = std::max(0.0, a1_old + a2_old - C_);
      hi = std::min(C_, a1_old + a2_old);
    }
    if (lo >= hi - 1e-15) return false;

    const double k11 = K_(Eigen::Index(i1), Eigen::Index(i1));
    const double k12 = K_(Eigen::Index(i1), Eigen::Index(i2));
    const double k22 = K_(Eigen::Index(i2), Eigen::Index(i2));
    const double eta = k11 + k22 - 2.0 * k12;

    double a2;
    if (eta > 1e-12) {
      a2 = a2_old + y2 * (e1 - e2) / eta;
      a2 = std::clamp(a2, lo, hi);
    } else {
      // flat direction: evaluate the dual objective at both ends
      // (e - b_ recovers the biasless kernel sum minus the label)
      const double f1 = y1 * (e1 - b_) - a1_old * k11 - s * a2_old * k12;
      const double f2 = y2 * (e2 - b_) - s * a1_old * k12 - a2_old * k22;
      const double l1 = a1_old + s * (a2_old - lo);
      const double h1 = a1_old + s * (a2_old - hi);
      const double obj_lo = l1 * f1 + lo * f2 + 0.5 * l1 * l1 * k11 + 0.5 * lo * lo * k22 +
                            s * lo * l1 * k12;
      const double obj_hi = h1 * f1 + hi * f2 + 0.5 * h1 * h1 * k11 + 0.5 * hi * hi * k22 +
                            s * hi * h1 * k12;
      if (obj_lo < obj_hi - 1e-12)
        a2 = lo;
      else if (obj_hi < obj_lo - 1e-12)
        a2 = hi;
      else
        return false;
    }
    if (std::abs(a2 - a2_old) < 1e-12 * (a2 + a2_old + 1e-12)) return false;
    double a1 = a1_old + s * (a2_old - a2);
    if (a1 < 0.0) a1 = 0.0;
    if (a1 > C_) a1 = C_;

    const double da1 = a1 - a1_old, da2 = a2 - a2_old;
    const double b1 = b_ - e1 - y1 * da1 * k11 - y2 * da2 * k12;
    const double b2 = b_ - e2 - y1 * da1 * k12 - y2 * da2 * k22;
    double b_new;
    if (a1 > eps_ && a1 < C_ - eps_)
      b_new = b1;
    else if (a2 > eps_ && a2 < C_ - eps_)
      b_new = b2;
    else
      b_new = 0.5 * (b1 + b2);

    for (std::size_t i = 0; i < n_; ++i)
      f_[i] += y1 * da1 * K_(Eigen::Index(i1), Eigen::Index(i)) +
               y2 * da2 * K_(Eigen::Index(i2), Eigen::Index(i));
    b_ = b_new;
    alpha_[i1] = a1;
    alpha_[i2] = a2;
    return true;
  }

  const Eigen::MatrixXd& X_;
  const std::vector<int>& y_;
  KernelSpec kernel_;
  double C_;
  double tol_;
  std::size_t n_;
  Eigen::MatrixXd K_;
  std::vector<double> alpha_;
  std::vector<double> f_;  // sum_j alpha_j y_j K(j, i), bias excluded
  double b_ = 0.0;
  std::size_t steps_ = 0;
  static constexpr double eps_ = 1e-10;
};

}  // namespace detail

// Trains a soft-margin binary SVM; y entries must be -1 or +1 with both
// classes present.
inline BinarySvmModel svm_train_binary(const Eigen::MatrixXd& X, const std::vector<int>& y,
                                       const KernelSpec& kernel, double C, double tol = 1e-3) {
  if (X.rows() < 2) throw std::invalid_argument("svm_train_binary: need at least 2 samples");
  if (std::size_t(X.rows()) != y.size())
    throw std::invalid_argument("svm_train_binary: label count mismatch");
  if (C <= 0.0) throw std::invalid_argument("svm_train_binary: C must be > 0");
  bool has_pos = false, has_neg = false;
  for (int v : y) {
    if (v == 1) has_pos = true;
    else if (v == -1) has_neg = true;
    else throw std::invalid_argument("svm_train_binary: labels must be -1 or +1");
  }
  if (!has_pos || !has_neg)
    throw std::invalid_argument("svm_train_binary: both classes must be present");

  detail::SmoSolver solver(X, y, kernel, C, tol);
  solver.solve();
  return solver.extract();
}

struct OvaSvmModel {
  std::vector<BinarySvmModel> models;  // one per class, class order
  std::vector<std::string> class_names;
};

// One binary model per class: that class positive, the rest negative.
inline OvaSvmModel ova_train(const Eigen::MatrixXd& X, const std::vector<int>& labels,
                             const std::vector<std::string>& class_names, const KernelSpec& kernel,
                             double C, double tol = 1e-3) {
  if (class_names.size() < 2) throw std::invalid_argument("ova_train: need at least 2 classes");
  OvaSvmModel model;
  model.class_names = class_names;
  for (std::size_t c = 0; c < class_names.size(); ++c) {
    std::vector<int> y(labels.size());
    bool any = false;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      y[i] = labels[i] == int(c) ? 1 : -1;
      any = any || y[i] == 1;
    }
    if (!any)
      throw std::invalid_argument("ova_train: class '" + class_names[c] + "' has no samples");
    model.models.push_back(svm_train_binary(X, y, kernel, C, tol));
  }
  return model;
}

// argmax of the per-class decision values; ties go to the lowest index.
inline int ova_predict(const OvaSvmModel& model, std::span<const double> x) {
  if (model.models.empty()) throw std::invalid_argument("ova_predict: empty model");
  int best = 0;
  double best_val = svm_decision(model.models[0], x);
  for (std::size_t c = 1; c < model.models.size(); ++c) {
    const double v = svm_decision(model.models[c], x);
    if (v > best_val) {
      best_val = v;
      best = int(c);
    }
  }
  return best;
}

}  // namespace sid
