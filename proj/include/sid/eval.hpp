#pragma once

// Repeated, shuffled k-fold cross-validation with leakage-free
// preprocessing: standardization and PCA are fitted on each training fold
// only, the classifier is trained per fold, and per-repeat accuracies are
// pooled over folds.

#include <chrono>
#include <functional>
#include <iostream>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "sid/features.hpp"
#include "sid/gmm.hpp"
#include "sid/pca.hpp"
#include "sid/svm.hpp"

namespace sid {

enum class ModelVariant { svm_linear, svm_poly, svm_rbf, gmm };

inline ModelVariant parse_model_variant(const std::string& name) {
  if (name == "svm-linear") return ModelVariant::svm_linear;
  if (name == "svm-poly") return ModelVariant::svm_poly;
  if (name == "svm-rbf") return ModelVariant::svm_rbf;
  if (name == "gmm") return ModelVariant::gmm;
  throw std::invalid_argument("unknown model variant '" + name +
                              "' (expected svm-linear|svm-poly|svm-rbf|gmm)");
}

inline std::string model_variant_name(ModelVariant v) {
  switch (v) {
    case ModelVariant::svm_linear: return "svm-linear";
    case ModelVariant::svm_poly: return "svm-poly";
    case ModelVariant::svm_rbf: return "svm-rbf";
    case ModelVariant::gmm: return "gmm";
  }
  return "?";
}

struct ModelParams {
  double svm_c = 1.0;
  int poly_degree = 3;
  double poly_alpha = 1.0;
  double poly_c = 1.0;
  double rbf_gamma = 0.0;  // <= 0: heuristic from the training fold
  double svm_tol = 1e-3;
  int gmm_components = 8;
  double gmm_tol = 1e-6;
  int gmm_max_iter = 200;
};

struct CvPlan {
  int folds = 10;
  int repeats = 15;
  std::uint64_t seed = 0;
  std::string pipeline_variant = "dwt";  // none | mfcc | dwt (report metadata)
  ModelVariant model = ModelVariant::svm_linear;
  ModelParams params;
  double pca_retention = 0.9999;  // in (0, 1]
  bool stratified = false;
  bool standardize = true;
};

struct EvalReport {
  std::vector<double> accuracies;     // one per repeat, pooled over folds
  double mean_accuracy = 0.0;
  double std_accuracy = 0.0;          // population std over repeats
  Eigen::MatrixXi confusion;          // rows: true class, cols: predicted
  std::vector<std::string> class_names;
  std::vector<double> train_seconds;  // model-fitting wall clock per repeat
};

// Seeded shuffle then contiguous split; the first n % folds folds get the
// extra element. Test sets are disjoint and exhaustive.
inline std::vector<std::pair<std::vector<std::size_t>, std::vector<std::size_t>>> kfold_split(
    std::size_t n, int folds, std::uint64_t seed) {
  if (folds < 2) throw std::invalid_argument("kfold_split: folds must be >= 2");
  if (std::size_t(folds) > n) throw std::invalid_argument("kfold_split: folds exceed sample count");
  Rng rng(seed);
  const auto perm = rng.permutation(n);

  std::vector<std::pair<std::vector<std::size_t>, std::vector<std::size_t>>> out;
  const std::size_t base = n / std::size_t(folds);
  const std::size_t rem = n % std::size_t(folds);
  std::size_t start = 0;
  for (int f = 0; f < folds; ++f) {
    const std::size_t len = base + (std::size_t(f) < rem ? 1 : 0);
    std::vector<std::size_t> test(perm.begin() + std::ptrdiff_t(start),
                                  perm.begin() + std::ptrdiff_t(start + len));
    std::vector<std::size_t> train;
    train.reserve(n - len);
    train.insert(train.end(), perm.begin(), perm.begin() + std::ptrdiff_t(start));
    train.insert(train.end(), perm.begin() + std::ptrdiff_t(start + len), perm.end());
    out.emplace_back(std::move(train), std::move(test));
    start += len;
  }
  return out;
}

// Per-class shuffle dealt round-robin across folds, so every fold sees every
// class when counts allow.
inline std::vector<std::pair<std::vector<std::size_t>, std::vector<std::size_t>>>
stratified_kfold_split(const std::vector<int>& labels, int n_classes, int folds,
                       std::uint64_t seed) {
  const std::size_t n = labels.size();
  if (folds < 2) throw std::invalid_argument("stratified_kfold_split: folds must be >= 2");
  if (std::size_t(folds) > n)
    throw std::invalid_argument("stratified_kfold_split: folds exceed sample count");
  Rng rng(seed);
  std::vector<std::vector<std::size_t>> fold_members(static_cast<std::size_t>(folds));
  std::size_t dealt = 0;
  for (int c = 0; c < n_classes; ++c) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < n; ++i)
      if (labels[i] == c) members.push_back(i);
    rng.shuffle(members);
    for (std::size_t j = 0; j < members.size(); ++j)
      fold_members[(dealt + j) % std::size_t(folds)].push_back(members[j]);
    dealt += members.size();
  }
  std::vector<std::pair<std::vector<std::size_t>, std::vector<std::size_t>>> out;
  for (int f = 0; f < folds; ++f) {
    std::vector<std::size_t> train;
    for (int g = 0; g < folds; ++g)
      if (g != f)
        train.insert(train.end(), fold_members[std::size_t(g)].begin(),
                     fold_members[std::size_t(g)].end());
    out.emplace_back(std::move(train), fold_members[std::size_t(f)]);
  }
  return out;
}

// Test-only observation hook: sees the indices and the fitted fold
// preprocessing, which makes the no-leakage contract assertable.
using FoldObserver =
    std::function<void(int repeat, int fold, const std::vector<std::size_t>& train,
                       const std::vector<std::size_t>& test, const Standardizer& standardizer,
                       const PcaModel& pca)>;

// Test-only model injection: returns a predictor for the given training fold.
using CustomTrainer = std::function<std::function<int(const Eigen::VectorXd&)>(
    const Eigen::MatrixXd& X, const std::vector<int>& y)>;

inline EvalReport cross_validate(const Dataset& data, const CvPlan& plan,
                                 const FoldObserver& observer = {},
                                 const CustomTrainer& custom_trainer = {}) {
  const std::size_t n = data.rows.size();
  if (data.class_names.size() < 2)
    throw std::invalid_argument("cross_validate: need at least 2 classes");
  if (plan.folds < 2) throw std::invalid_argument("cross_validate: folds must be >= 2");
  if (plan.repeats < 1) throw std::invalid_argument("cross_validate: repeats must be >= 1");
  if (std::size_t(plan.folds) > n)
    throw std::invalid_argument("cross_validate: folds exceed sample count");
  if (plan.pca_retention <= 0.0 || plan.pca_retention > 1.0)
    throw std::invalid_argument("cross_validate: pca_retention must be in (0, 1]");

  const int n_classes = int(data.class_names.size());
  const auto labels = data.label_indices();
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] < 0)
      throw std::invalid_argument("cross_validate: row " + std::to_string(i) + " has no label");
  {
    std::vector<std::size_t> counts(std::size_t(n_classes), 0);
    for (int l : labels) ++counts[std::size_t(l)];
    for (int c = 0; c < n_classes; ++c)
      if (counts[std::size_t(c)] < std::size_t(plan.folds))
        std::cerr << "cross_validate: warning: class '" << data.class_names[std::size_t(c)]
                  << "' has fewer members (" << counts[std::size_t(c)] << ") than folds ("
                  << plan.folds << ")\n";
  }

  const Eigen::MatrixXd X = data.matrix();
  EvalReport report;
  report.class_names = data.class_names;
  report.confusion = Eigen::MatrixXi::Zero(n_classes, n_classes);

  for (int r = 0; r < plan.repeats; ++r) {
    const std::uint64_t repeat_seed = plan.seed + std::uint64_t(r);
    const auto splits = plan.stratified
                            ? stratified_kfold_split(labels, n_classes, plan.folds, repeat_seed)
                            : kfold_split(n, plan.folds, repeat_seed);
    std::size_t correct = 0, total = 0;
    double fit_seconds = 0.0;

    for (int f = 0; f < plan.folds; ++f) {
      const auto& [train_idx, test_idx] = splits[std::size_t(f)];
      Eigen::MatrixXd Xtr(Eigen::Index(train_idx.size()), X.cols());
      std::vector<int> ytr(train_idx.size());
      for (std::size_t i = 0; i < train_idx.size(); ++i) {
        Xtr.row(Eigen::Index(i)) = X.row(Eigen::Index(train_idx[i]));
        ytr[i] = labels[train_idx[i]];
      }

      Standardizer standardizer;
      Eigen::MatrixXd Ztr;
      if (plan.standardize) {
        standardizer.fit(Xtr);
        Ztr = standardizer.transform(Xtr);
      } else {
        Ztr = Xtr;
      }
      const PcaModel pca = pca_fit(Ztr, plan.pca_retention);
      const Eigen::MatrixXd Ptr = pca_transform(pca, Ztr);
      if (observer) observer(r, f, train_idx, test_idx, standardizer, pca);

      const auto project = [&](std::size_t row) {
        Eigen::VectorXd x = X.row(Eigen::Index(row));
        if (plan.standardize) x = standardizer.transform(x);
        return Eigen::VectorXd(pca_transform(pca, x));
      };

      std::function<int(const Eigen::VectorXd&)> predict;
      const auto t0 = std::chrono::steady_clock::now();
      if (custom_trainer) {
        predict = custom_trainer(Ptr, ytr);
      } else if (plan.model == ModelVariant::gmm) {
        const std::uint64_t model_seed = repeat_seed * 1000003ull + std::uint64_t(f) * 101ull;
        const GmmBank bank =
            gmm_bank_train(Ptr, ytr, data.class_names, plan.params.gmm_components, model_seed,
                           plan.params.gmm_tol, plan.params.gmm_max_iter);
        predict = [bank](const Eigen::VectorXd& x) { return gmm_bank_predict(bank, x); };
      } else {
        KernelSpec kernel;
        if (plan.model == ModelVariant::svm_poly)
          kernel = KernelSpec::polynomial(plan.params.poly_degree, plan.params.poly_alpha,
                                          plan.params.poly_c);
        else if (plan.model == ModelVariant::svm_rbf)
          kernel = KernelSpec::rbf(plan.params.rbf_gamma > 0.0 ? plan.params.rbf_gamma
                                                               : rbf_gamma_heuristic(Ptr));
        const OvaSvmModel model = ova_train(Ptr, ytr, data.class_names, kernel, plan.params.svm_c,
                                            plan.params.svm_tol);
        predict = [model](const Eigen::VectorXd& x) {
          return ova_predict(model, std::span<const double>(x.data(), std::size_t(x.size())));
        };
      }
      fit_seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

      for (std::size_t t : test_idx) {
        const int truth = labels[t];
        const int guess = predict(project(t));
        report.confusion(truth, guess) += 1;
        correct += guess == truth;
        ++total;
      }
    }
    report.accuracies.push_back(double(correct) / double(total));
    report.train_seconds.push_back(fit_seconds);
  }

  double mean = 0.0;
  for (double a : report.accuracies) mean += a;
  mean /= double(report.accuracies.size());
  double var = 0.0;
  for (double a : report.accuracies) var += (a - mean) * (a - mean);
  report.mean_accuracy = mean;
  report.std_accuracy = std::sqrt(var / double(report.accuracies.size()));
  return report;
}

namespace detail {

inline std::string confusion_path(const std::string& csv_path) {
  const std::string suffix = ".csv";
  if (csv_path.size() > suffix.size() &&
      csv_path.compare(csv_path.size() - suffix.size(), suffix.size(), suffix) == 0)
    return csv_path.substr(0, csv_path.size() - suffix.size()) + ".confusion.csv";
  return csv_path + ".confusion.csv";
}

}  // namespace detail

// Writes `repeat,accuracy,train_seconds` plus a confusion-matrix sidecar.
// with_timing=false zeroes the timing column, making the bytes a pure
// function of (data, plan).
inline void emit_report(const EvalReport& report, const std::string& path,
                        bool with_timing = true) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("emit_report: cannot write '" + path + "'");
  f << "repeat,accuracy,train_seconds\n" << std::setprecision(17);
  for (std::size_t r = 0; r < report.accuracies.size(); ++r)
    f << r << ',' << report.accuracies[r] << ','
      << (with_timing ? report.train_seconds[r] : 0.0) << '\n';
  if (!f) throw std::runtime_error("emit_report: short write on '" + path + "'");

  std::ofstream c(detail::confusion_path(path), std::ios::trunc);
  if (!c) throw std::runtime_error("emit_report: cannot write confusion sidecar");
  c << "true\\pred";
  for (const auto& name : report.class_names) c << ',' << name;
  c << '\n';
  for (Eigen::Index i = 0; i < report.confusion.rows(); ++i) {
    c << report.class_names[std::size_t(i)];
    for (Eigen::Index j = 0; j < report.confusion.cols(); ++j) c << ',' << report.confusion(i, j);
    c << '\n';
  }
  if (!c) throw std::runtime_error("emit_report: short write on confusion sidecar");
}

// Reads back what emit_report wrote (accuracies and timing; confusion if the
// sidecar exists).
inline EvalReport parse_report(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("parse_report: cannot open '" + path + "'");
  std::string line;
  if (!std::getline(f, line) || line != "repeat,accuracy,train_seconds")
    throw std::runtime_error("parse_report: bad header");
  EvalReport report;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::stringstream ls(line);
    std::string cell;
    std::getline(ls, cell, ',');
    std::getline(ls, cell, ',');
    report.accuracies.push_back(std::stod(cell));
    std::getline(ls, cell, ',');
    report.train_seconds.push_back(std::stod(cell));
  }
  double mean = 0.0;
  for (double a : report.accuracies) mean += a;
  if (!report.accuracies.empty()) mean /= double(report.accuracies.size());
  double var = 0.0;
  for (double a : report.accuracies) var += (a - mean) * (a - mean);
  report.mean_accuracy = mean;
  report.std_accuracy =
      report.accuracies.empty() ? 0.0 : std::sqrt(var / double(report.accuracies.size()));

  std::ifstream c(detail::confusion_path(path));
  if (c) {
    if (std::getline(c, line)) {
      std::stringstream hs(line);
      std::string cell;
      std::getline(hs, cell, ',');  // corner label
      while (std::getline(hs, cell, ',')) report.class_names.push_back(cell);
      const int k = int(report.class_names.size());
      report.confusion = Eigen::MatrixXi::Zero(k, k);
      for (int i = 0; i < k && std::getline(c, line); ++i) {
        std::stringstream ls(line);
        std::getline(ls, cell, ',');  // row label
        for (int j = 0; j < k; ++j) {
          std::getline(ls, cell, ',');
          report.confusion(i, j) = std::stoi(cell);
        }
      }
    }
  }
  return report;
}

}  // namespace sid
