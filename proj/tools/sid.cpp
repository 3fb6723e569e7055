// sid: singer-identification pipeline CLI.
// Subcommands: separate, denoise, extract, train, evaluate, pipeline.
// Exit codes: 0 success, 1 runtime failure, 2 usage/config error.

#include <CLI11.hpp>
#include <filesystem>
#include <iostream>

#include <sid/model_io.hpp>
#include <sid/pipeline.hpp>

namespace fs = std::filesystem;
using namespace sid;

namespace {

struct GlobalOpts {
  std::uint64_t seed = 0;
  int workers = 1;
  std::string config;
  bool verbose = false;
};

std::ostream& info(const GlobalOpts& g) {
  static std::ofstream null_sink;
  if (g.verbose) return std::cerr;
  null_sink.setstate(std::ios::badbit);
  return null_sink;
}

ModelVariant parse_model_or_usage(const std::string& name) {
  try {
    return parse_model_variant(name);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

void add_model_flags(CLI::App* cmd, std::string& model_name, ModelParams& params,
                     double& pca_retention) {
  cmd->add_option("--model", model_name, "Classifier: svm-linear|svm-poly|svm-rbf|gmm")
      ->capture_default_str();
  cmd->add_option("--svm-c", params.svm_c, "SVM soft-margin C")->capture_default_str();
  cmd->add_option("--rbf-gamma", params.rbf_gamma, "RBF gamma (<=0: variance heuristic)")
      ->capture_default_str();
  cmd->add_option("--poly-degree", params.poly_degree, "Polynomial kernel degree")
      ->capture_default_str();
  cmd->add_option("--poly-alpha", params.poly_alpha, "Polynomial kernel slope")
      ->capture_default_str();
  cmd->add_option("--poly-c", params.poly_c, "Polynomial kernel constant")->capture_default_str();
  cmd->add_option("--gmm-components", params.gmm_components, "Gaussians per class")
      ->capture_default_str();
  cmd->add_option("--pca", pca_retention, "PCA variance retention in (0,1]")
      ->capture_default_str();
}

int cmd_separate(const GlobalOpts& g, const std::string& input, const std::string& outdir,
                 int window, int hop, int rate, const RpcaConfig& rpca_cfg) {
  AudioClip clip = load_audio(input);
  info(g) << "loaded " << clip.samples.size() << " samples at " << clip.sample_rate << " Hz\n";
  if (rate > 0) clip = resample(clip, rate);
  const auto spec = stft(clip, window, hop);
  const auto [voice, music] = separate_voice(spec, rpca_cfg);
  fs::create_directories(outdir);
  const std::string stem = fs::path(input).stem().string();
  const auto voice_path = fs::path(outdir) / (stem + ".voice.wav");
  const auto music_path = fs::path(outdir) / (stem + ".music.wav");
  save_audio(voice, voice_path.string());
  save_audio(music, music_path.string());
  std::cout << voice_path.string() << "\n" << music_path.string() << "\n";
  return 0;
}

int cmd_denoise(const GlobalOpts& g, const std::string& input, const std::string& output,
                const std::string& family, int levels, double k, const std::string& mode,
                int rate, const std::string& bands_csv) {
  AudioClip clip = load_audio(input);
  if (rate > 0) clip = resample(clip, rate);
  const WaveletSpec spec{family, levels, WaveletExtension::symmetric};
  if (!bands_csv.empty()) {
    // coefficient dump of the thresholded decomposition, one row per value
    WaveletDecomposition dec = wavedec(clip.samples, spec, clip.sample_rate);
    const double sigma = estimate_noise_sigma(dec.details.back());
    const double lambda = universal_threshold(sigma, clip.samples.size(), k);
    apply_threshold(dec, lambda, parse_threshold_mode(mode));
    std::ofstream f(bands_csv, std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write '" + bands_csv + "'");
    f << "band,index,value\n" << std::setprecision(17);
    const auto labels = band_labels(levels);
    for (std::size_t i = 0; i < dec.approx.size(); ++i)
      f << labels[0] << ',' << i << ',' << dec.approx[i] << '\n';
    for (std::size_t b = 0; b < dec.details.size(); ++b)
      for (std::size_t i = 0; i < dec.details[b].size(); ++i)
        f << labels[b + 1] << ',' << i << ',' << dec.details[b][i] << '\n';
    info(g) << "wrote band coefficients to " << bands_csv << "\n";
  }
  clip.samples = denoise(clip.samples, spec, k, parse_threshold_mode(mode));
  save_audio(clip, output);
  std::cout << output << "\n";
  return 0;
}

int cmd_extract(const GlobalOpts& g, const std::string& manifest, PipelineConfig cfg,
                const std::string& out_csv) {
  cfg.manifest = manifest;
  cfg.workers = g.workers;
  const auto entries = read_manifest(manifest);
  std::vector<AudioClip> clips;
  std::size_t skipped = 0;
  for (const auto& e : entries) {
    if (!fs::exists(e.path)) {
      std::cerr << "extract: warning: missing file '" << e.path << "' (row skipped)\n";
      ++skipped;
      continue;
    }
    AudioClip clip = load_audio(e.path);
    clip = resample(clip, cfg.working_rate);
    clip.label = e.label;
    clips.push_back(std::move(clip));
  }
  if (clips.empty()) throw std::runtime_error("extract: no readable inputs");
  const Dataset data = extract_features(clips, cfg, cfg.denoise_k);
  if (data.rows.empty())
    throw std::runtime_error("extract: no segments (inputs shorter than segment length?)");
  write_feature_csv(data, out_csv);
  std::cout << out_csv << " (" << data.rows.size() << " rows, " << skipped << " files skipped)\n";
  return 0;
}

int cmd_train(const GlobalOpts& g, const std::string& features_csv, const std::string& model_name,
              const ModelParams& params, double pca_retention, const std::string& out_model) {
  CvPlan plan;
  plan.seed = g.seed;
  plan.model = parse_model_or_usage(model_name);
  plan.params = params;
  plan.pca_retention = pca_retention;
  const Dataset data = read_feature_csv(features_csv);
  const TrainedModel model = train_model(data, plan);
  save_model(model, out_model);

  std::size_t correct = 0;
  for (const auto& row : data.rows) {
    const Eigen::VectorXd x =
        Eigen::Map<const Eigen::VectorXd>(row.values.data(), Eigen::Index(row.values.size()));
    correct += model.class_names[std::size_t(model.predict(x))] == row.label;
  }
  std::cout << out_model << " (training accuracy "
            << double(correct) / double(data.rows.size()) << ")\n";
  info(g) << "classes:";
  for (const auto& c : model.class_names) info(g) << ' ' << c;
  info(g) << "\n";
  return 0;
}

int cmd_evaluate(const GlobalOpts& g, const std::string& features_csv,
                 const std::string& model_name, const ModelParams& params, double pca_retention,
                 int folds, int repeats, bool stratified, bool no_timing,
                 const std::string& outdir) {
  CvPlan plan;
  plan.folds = folds;
  plan.repeats = repeats;
  plan.seed = g.seed;
  plan.model = parse_model_or_usage(model_name);
  plan.params = params;
  plan.pca_retention = pca_retention;
  plan.stratified = stratified;
  if (plan.folds < 2) throw ConfigError("evaluate: folds must be >= 2");
  if (plan.repeats < 1) throw ConfigError("evaluate: repeats must be >= 1");

  const Dataset data = read_feature_csv(features_csv);
  const EvalReport report = cross_validate(data, plan);
  fs::create_directories(outdir);
  const auto report_path = fs::path(outdir) / "report.csv";
  emit_report(report, report_path.string(), !no_timing);
  std::cout << "mean accuracy " << report.mean_accuracy << " (std " << report.std_accuracy
            << ") over " << repeats << " repeats -> " << report_path.string() << "\n";
  return 0;
}

int cmd_pipeline(const GlobalOpts& g, const std::string& init_path) {
  if (!init_path.empty()) {
    std::ofstream f(init_path, std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write '" + init_path + "'");
    f << default_config_json().dump(2) << '\n';
    std::cout << init_path << "\n";
    return 0;
  }
  if (g.config.empty())
    throw ConfigError("pipeline: --config is required (or --init to write a template)");
  PipelineConfig cfg = load_config(g.config);
  if (g.workers > 1) cfg.workers = g.workers;
  if (g.seed != 0) cfg.seed = g.seed;
  const PipelineResult result = run_pipeline(cfg, g.verbose ? std::cerr : std::cout);
  std::cout << "mean accuracy " << result.report.mean_accuracy << " -> " << result.report_csv
            << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"singer-identification pipeline: RPCA separation, wavelet denoising, "
               "DWT/MFCC features, SVM/GMM classification"};
  app.require_subcommand(1);
  GlobalOpts g;
  app.add_option("--seed", g.seed, "Random seed")->envname("SID_SEED");
  app.add_option("--workers", g.workers, "Parallel workers for per-file stages")
      ->envname("SID_WORKERS");
  app.add_option("--config", g.config, "Pipeline config JSON")->envname("SID_CONFIG");
  app.add_flag("--verbose", g.verbose, "Verbose logging to stderr")->envname("SID_VERBOSE");

  // separate
  auto* sep = app.add_subcommand("separate", "Split a WAV into voice and accompaniment stems");
  std::string sep_input, sep_outdir = ".";
  int sep_window = 1024, sep_hop = 256, sep_rate = 0;
  RpcaConfig rpca_cfg;
  sep->add_option("input", sep_input, "Input WAV")->required();
  sep->add_option("-o,--outdir", sep_outdir, "Output directory")->capture_default_str();
  sep->add_option("--window", sep_window, "STFT window (power of two)")->capture_default_str();
  sep->add_option("--hop", sep_hop, "STFT hop")->capture_default_str();
  sep->add_option("--rate", sep_rate, "Resample before separation (0: native)")
      ->capture_default_str();
  sep->add_option("--rpca-lambda", rpca_cfg.lambda, "Sparsity trade-off (<=0: 1/sqrt(max dim))")
      ->capture_default_str();
  sep->add_option("--rpca-tol", rpca_cfg.tol, "Relative residual tolerance")
      ->capture_default_str();
  sep->add_option("--rpca-max-iter", rpca_cfg.max_iter, "Iteration cap")->capture_default_str();
  sep->add_option("--rpca-rho", rpca_cfg.rho, "Penalty growth factor")->capture_default_str();
  sep->add_option("--rpca-mu0", rpca_cfg.mu0, "Initial penalty (<=0: 1.25/||V||_2)")
      ->capture_default_str();

  // denoise
  auto* den = app.add_subcommand("denoise", "Wavelet-threshold denoise a WAV");
  std::string den_input, den_output, den_family = "db4", den_mode = "soft", den_bands;
  int den_levels = 4, den_rate = 0;
  double den_k = 0.3;
  den->add_option("input", den_input, "Input WAV")->required();
  den->add_option("output", den_output, "Output WAV")->required();
  den->add_option("--family", den_family, "Wavelet family db1..db8")->capture_default_str();
  den->add_option("--levels", den_levels, "Decomposition levels")->capture_default_str();
  den->add_option("--k", den_k, "Universal-threshold scale in [0,1]")->capture_default_str();
  den->add_option("--mode", den_mode, "soft|hard")->capture_default_str();
  den->add_option("--rate", den_rate, "Resample before denoising (0: keep)")
      ->capture_default_str();
  den->add_option("--bands-csv", den_bands, "Dump thresholded band coefficients to CSV");

  // extract
  auto* ext = app.add_subcommand("extract", "Extract per-segment features from a manifest");
  std::string ext_manifest, ext_out = "features.csv";
  PipelineConfig ext_cfg;
  ext->add_option("--manifest", ext_manifest, "CSV of `path,label` rows")->required();
  ext->add_option("-o,--out", ext_out, "Output feature CSV")->capture_default_str();
  ext->add_option("--variant", ext_cfg.feature_variant, "dwt|mfcc|raw")->capture_default_str();
  ext->add_option("--rate", ext_cfg.working_rate, "Working sample rate")->capture_default_str();
  ext->add_option("--segment-seconds", ext_cfg.segment_seconds, "Segment length")
      ->capture_default_str();
  ext->add_option("--family", ext_cfg.wavelet_family, "Wavelet family")->capture_default_str();
  ext->add_option("--levels", ext_cfg.wavelet_levels, "Decomposition levels")
      ->capture_default_str();
  ext->add_option("--k", ext_cfg.denoise_k, "Denoise threshold scale")->capture_default_str();
  ext->add_option("--mode", ext_cfg.threshold_mode, "soft|hard")->capture_default_str();
  ext->add_option("--mfcc-coeffs", ext_cfg.mfcc_coeffs, "MFCC coefficient count")
      ->capture_default_str();
  ext->add_option("--raw-rate", ext_cfg.raw_rate, "Raw-variant resample rate (0: working rate)")
      ->capture_default_str();

  // train
  auto* tr = app.add_subcommand("train", "Train a model on a feature CSV and serialize it");
  std::string tr_features, tr_model_name = "svm-linear", tr_out = "model.json";
  ModelParams tr_params;
  double tr_pca = 0.9999;
  tr->add_option("--features", tr_features, "Feature CSV")->required();
  tr->add_option("-o,--out", tr_out, "Output model JSON")->capture_default_str();
  add_model_flags(tr, tr_model_name, tr_params, tr_pca);

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "Repeated k-fold cross-validation on a feature CSV");
  std::string ev_features, ev_model_name = "svm-linear", ev_outdir = "eval_out";
  ModelParams ev_params;
  double ev_pca = 0.9999;
  int ev_folds = 10, ev_repeats = 15;
  bool ev_stratified = false, ev_no_timing = false;
  ev->add_option("--features", ev_features, "Feature CSV")->required();
  ev->add_option("-o,--outdir", ev_outdir, "Report output directory")->capture_default_str();
  ev->add_option("--folds", ev_folds, "Cross-validation folds")->capture_default_str();
  ev->add_option("--repeats", ev_repeats, "Shuffle repeats")->capture_default_str();
  ev->add_flag("--stratified", ev_stratified, "Stratified fold assignment");
  ev->add_flag("--no-timing", ev_no_timing, "Zero the timing column (reproducible bytes)");
  add_model_flags(ev, ev_model_name, ev_params, ev_pca);

  // pipeline
  auto* pipe = app.add_subcommand("pipeline", "Run separate -> denoise -> extract -> evaluate");
  std::string pipe_init;
  pipe->add_option("--init", pipe_init, "Write a default config template and exit");

  // let the global flags appear after the subcommand name too
  for (auto* sub : {sep, den, ext, tr, ev, pipe}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (sep->parsed())
      return cmd_separate(g, sep_input, sep_outdir, sep_window, sep_hop, sep_rate, rpca_cfg);
    if (den->parsed())
      return cmd_denoise(g, den_input, den_output, den_family, den_levels, den_k, den_mode,
                         den_rate, den_bands);
    if (ext->parsed()) return cmd_extract(g, ext_manifest, ext_cfg, ext_out);
    if (tr->parsed()) return cmd_train(g, tr_features, tr_model_name, tr_params, tr_pca, tr_out);
    if (ev->parsed())
      return cmd_evaluate(g, ev_features, ev_model_name, ev_params, ev_pca, ev_folds, ev_repeats,
                          ev_stratified, ev_no_timing, ev_outdir);
    if (pipe->parsed()) return cmd_pipeline(g, pipe_init);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
