#pragma once

// Versioned JSON serialization of trained models: the classifier (OvA SVM
// ensemble or per-class GMM bank) together with the fitted standardization
// and PCA parameters needed to score raw feature vectors.

#include <fstream>
#include <json.hpp>

#include "sid/eval.hpp"

namespace sid {

struct TrainedModel {
  static constexpr int kFormatVersion = 1;

  std::string variant;  // svm-linear | svm-poly | svm-rbf | gmm
  std::vector<std::string> class_names;
  std::vector<std::string> feature_names;
  bool standardized = false;
  Standardizer standardizer;
  PcaModel pca;
  OvaSvmModel svm;
  GmmBank gmm;

  int predict(const Eigen::VectorXd& raw) const {
    Eigen::VectorXd x = standardized ? standardizer.transform(raw) : raw;
    x = pca_transform(pca, x);
    if (variant == "gmm") return gmm_bank_predict(gmm, x);
    return ova_predict(svm, std::span<const double>(x.data(), std::size_t(x.size())));
  }
};

namespace detail {

inline nlohmann::json to_json(const Eigen::VectorXd& v) {
  nlohmann::json a = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

inline nlohmann::json to_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Eigen::VectorXd vector_from_json(const nlohmann::json& a) {
  Eigen::VectorXd v(Eigen::Index(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i) v(Eigen::Index(i)) = a[i].get<double>();
  return v;
}

inline Eigen::MatrixXd matrix_from_json(const nlohmann::json& a) {
  const auto rows = Eigen::Index(a.size());
  const auto cols = rows > 0 ? Eigen::Index(a[0].size()) : 0;
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j)
      m(i, j) = a[std::size_t(i)][std::size_t(j)].get<double>();
  return m;
}

inline nlohmann::json kernel_to_json(const KernelSpec& k) {
  return {{"kind", k.name()},
          {"degree", k.degree},
          {"alpha", k.alpha},
          {"c", k.c},
          {"gamma", k.gamma}};
}

inline KernelSpec kernel_from_json(const nlohmann::json& j) {
  KernelSpec k;
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "linear")
    k.kind = KernelSpec::Kind::linear;
  else if (kind == "polynomial")
    k.kind = KernelSpec::Kind::polynomial;
  else if (kind == "rbf")
    k.kind = KernelSpec::Kind::rbf;
  else
    throw std::runtime_error("model: unknown kernel kind '" + kind + "'");
  k.degree = j.at("degree").get<int>();
  k.alpha = j.at("alpha").get<double>();
  k.c = j.at("c").get<double>();
  k.gamma = j.at("gamma").get<double>();
  return k;
}

}  // namespace detail

inline void save_model(const TrainedModel& model, const std::string& path) {
  nlohmann::json j;
  j["format"] = "sid-model";
  j["version"] = TrainedModel::kFormatVersion;
  j["variant"] = model.variant;
  j["classes"] = model.class_names;
  j["feature_names"] = model.feature_names;
  j["standardized"] = model.standardized;
  if (model.standardized)
    j["standardizer"] = {{"means", detail::to_json(model.standardizer.means)},
                         {"stds", detail::to_json(model.standardizer.stds)}};
  j["pca"] = {{"mean", detail::to_json(model.pca.mean_vector)},
              {"components", detail::to_json(model.pca.components)},
              {"explained_variance_ratios", model.pca.explained_variance_ratios},
              {"retained", model.pca.retained_count}};
  if (model.variant == "gmm") {
    nlohmann::json models = nlohmann::json::array();
    for (const auto& g : model.gmm.models)
      models.push_back({{"weights", detail::to_json(g.weights)},
                        {"means", detail::to_json(g.means)},
                        {"variances", detail::to_json(g.variances)},
                        {"components", g.components}});
    j["gmm"] = {{"models", std::move(models)}};
  } else {
    nlohmann::json models = nlohmann::json::array();
    for (const auto& b : model.svm.models)
      models.push_back({{"support_vectors", detail::to_json(b.support_vectors)},
                        {"dual_coefficients", detail::to_json(b.dual_coefficients)},
                        {"bias", b.bias},
                        {"kernel", detail::kernel_to_json(b.kernel)},
                        {"C", b.C}});
    j["svm"] = {{"models", std::move(models)}};
  }

  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("save_model: cannot write '" + path + "'");
  f << j.dump(2) << '\n';
  if (!f) throw std::runtime_error("save_model: short write on '" + path + "'");
}

inline TrainedModel load_model(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("load_model: cannot open '" + path + "'");
  nlohmann::json j;
  try {
    f >> j;
  } catch (const std::exception& e) {
    throw std::runtime_error("load_model: invalid JSON in '" + path + "': " + e.what());
  }
  if (j.value("format", "") != "sid-model")
    throw std::runtime_error("load_model: '" + path + "' is not a model file");
  if (j.value("version", -1) != TrainedModel::kFormatVersion)
    throw std::runtime_error("load_model: unsupported model version in '" + path + "'");

  TrainedModel model;
  model.variant = j.at("variant").get<std::string>();
  model.class_names = j.at("classes").get<std::vector<std::string>>();
  model.feature_names = j.at("feature_names").get<std::vector<std::string>>();
  model.standardized = j.at("standardized").get<bool>();
  if (model.standardized) {
    model.standardizer.means = detail::vector_from_json(j.at("standardizer").at("means"));
    model.standardizer.stds = detail::vector_from_json(j.at("standardizer").at("stds"));
  }
  model.pca.mean_vector = detail::vector_from_json(j.at("pca").at("mean"));
  model.pca.components = detail::matrix_from_json(j.at("pca").at("components"));
  model.pca.explained_variance_ratios =
      j.at("pca").at("explained_variance_ratios").get<std::vector<double>>();
  model.pca.retained_count = j.at("pca").at("retained").get<int>();
  if (model.variant == "gmm") {
    model.gmm.class_names = model.class_names;
    for (const auto& m : j.at("gmm").at("models")) {
      GmmModel g;
      g.weights = detail::vector_from_json(m.at("weights"));
      g.means = detail::matrix_from_json(m.at("means"));
      g.variances = detail::matrix_from_json(m.at("variances"));
      g.components = m.at("components").get<int>();
      model.gmm.models.push_back(std::move(g));
    }
  } else {
    model.svm.class_names = model.class_names;
    for (const auto& m : j.at("svm").at("models")) {
      BinarySvmModel b;
      b.support_vectors = detail::matrix_from_json(m.at("support_vectors"));
      b.dual_coefficients = detail::vector_from_json(m.at("dual_coefficients"));
      b.bias = m.at("bias").get<double>();
      b.kernel = detail::kernel_from_json(m.at("kernel"));
      b.C = m.at("C").get<double>();
      model.svm.models.push_back(std::move(b));
    }
  }
  return model;
}

// Fits preprocessing and a classifier on the full dataset (the CLI `train`
// path; evaluation uses per-fold fits instead).
inline TrainedModel train_model(const Dataset& data, const CvPlan& plan) {
  if (data.class_names.size() < 2)
    throw std::invalid_argument("train_model: need at least 2 classes");
  TrainedModel model;
  model.variant = model_variant_name(plan.model);
  model.class_names = data.class_names;
  model.feature_names = data.rows.at(0).feature_names;
  model.standardized = plan.standardize;

  const Eigen::MatrixXd X = data.matrix();
  const auto labels = data.label_indices();
  Eigen::MatrixXd Z = X;
  if (plan.standardize) {
    model.standardizer.fit(X);
    Z = model.standardizer.transform(X);
  }
  model.pca = pca_fit(Z, plan.pca_retention);
  const Eigen::MatrixXd P = pca_transform(model.pca, Z);

  if (plan.model == ModelVariant::gmm) {
    model.gmm = gmm_bank_train(P, labels, data.class_names, plan.params.gmm_components, plan.seed,
                               plan.params.gmm_tol, plan.params.gmm_max_iter);
  } else {
    KernelSpec kernel;
    if (plan.model == ModelVariant::svm_poly)
      kernel =
          KernelSpec::polynomial(plan.params.poly_degree, plan.params.poly_alpha, plan.params.poly_c);
    else if (plan.model == ModelVariant::svm_rbf)
      kernel = KernelSpec::rbf(plan.params.rbf_gamma > 0.0 ? plan.params.rbf_gamma
                                                           : rbf_gamma_heuristic(P));
    model.svm =
        ova_train(P, labels, data.class_names, kernel, plan.params.svm_c, plan.params.svm_tol);
  }
  return model;
}

}  // namespace sid
