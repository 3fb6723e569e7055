#pragma once

// End-to-end experiment pipeline: manifest-driven separation, denoising,
// feature extraction and cross-validated evaluation, with content-hash
// caching per stage so unchanged work is skipped on re-runs.

#include <atomic>
#include <string_view>
#include <filesystem>
#include <json.hpp>
#include <mutex>
#include <thread>

#include "sid/eval.hpp"
#include "sid/model_io.hpp"
#include "sid/rpca.hpp"

namespace sid {

// configuration/usage mistakes map to exit code 2 in the CLI
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ManifestEntry {
  std::string path;
  std::string label;
};

// CSV lines `path,label`; blank lines and #-comments are skipped. Relative
// paths resolve against the manifest's own directory.
inline std::vector<ManifestEntry> read_manifest(const std::string& manifest_path) {
  std::ifstream f(manifest_path);
  if (!f) throw ConfigError("manifest: cannot open '" + manifest_path + "'");
  const auto base = std::filesystem::path(manifest_path).parent_path();
  std::vector<ManifestEntry> entries;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(f, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos)
      throw ConfigError("manifest: missing label at line " + std::to_string(line_no));
    ManifestEntry e;
    e.label = line.substr(comma + 1);
    std::filesystem::path p = line.substr(0, comma);
    if (p.is_relative()) p = base / p;
    e.path = p.string();
    if (e.label.empty())
      throw ConfigError("manifest: empty label at line " + std::to_string(line_no));
    entries.push_back(std::move(e));
  }
  if (entries.empty()) throw ConfigError("manifest: no entries in '" + manifest_path + "'");
  return entries;
}

struct PipelineConfig {
  std::string manifest;
  std::string outdir = "out";
  int workers = 1;
  std::uint64_t seed = 0;

  int working_rate = 4160;   // rate for denoise/features
  int separate_rate = 0;     // 0: separate at the input's native rate
  double segment_seconds = 12.0;

  int stft_window = 1024;
  int stft_hop = 256;
  RpcaConfig rpca;

  std::string wavelet_family = "db4";
  int wavelet_levels = 4;
  double denoise_k = 0.3;
  std::string threshold_mode = "soft";

  std::string feature_variant = "dwt";  // dwt | mfcc | raw
  int mfcc_coeffs = 13;
  int raw_rate = 0;  // 0: working_rate

  ModelVariant model = ModelVariant::svm_linear;
  ModelParams params;
  int folds = 10;
  int repeats = 15;
  double pca_retention = 0.9999;
  bool stratified = false;
  bool with_timing = true;
};

inline ThresholdMode parse_threshold_mode(const std::string& name) {
  if (name == "soft") return ThresholdMode::soft;
  if (name == "hard") return ThresholdMode::hard;
  throw ConfigError("unknown threshold mode '" + name + "' (expected soft|hard)");
}

inline nlohmann::json default_config_json() {
  return nlohmann::json{
      {"manifest", "manifest.csv"},
      {"outdir", "out"},
      {"workers", 1},
      {"seed", 0},
      {"audio",
       {{"working_rate", 4160}, {"separate_rate", 0}, {"segment_seconds", 12.0}}},
      {"stft", {{"window", 1024}, {"hop", 256}}},
      {"rpca",
       {{"lambda", 0.0}, {"mu0", 0.0}, {"rho", 1.6}, {"tol", 1e-7}, {"max_iter", 500}}},
      {"denoise", {{"family", "db4"}, {"levels", 4}, {"k", 0.3}, {"mode", "soft"}}},
      {"features", {{"variant", "dwt"}, {"mfcc_coeffs", 13}, {"raw_rate", 0}}},
      {"model",
       {{"variant", "svm-linear"},
        {"svm_c", 1.0},
        {"rbf_gamma", 0.0},
        {"poly_degree", 3},
        {"poly_alpha", 1.0},
        {"poly_c", 1.0},
        {"gmm_components", 8},
        {"gmm_tol", 1e-6},
        {"gmm_max_iter", 200}}},
      {"evaluation",
       {{"folds", 10},
        {"repeats", 15},
        {"pca_retention", 0.9999},
        {"stratified", false},
        {"with_timing", true}}}};
}

inline PipelineConfig parse_config(const nlohmann::json& j) {
  PipelineConfig cfg;
  try {
    cfg.manifest = j.at("manifest").get<std::string>();
    cfg.outdir = j.value("outdir", cfg.outdir);
    cfg.workers = j.value("workers", cfg.workers);
    cfg.seed = j.value("seed", cfg.seed);
    if (j.contains("audio")) {
      const auto& a = j["audio"];
      cfg.working_rate = a.value("working_rate", cfg.working_rate);
      cfg.separate_rate = a.value("separate_rate", cfg.separate_rate);
      cfg.segment_seconds = a.value("segment_seconds", cfg.segment_seconds);
    }
    if (j.contains("stft")) {
      cfg.stft_window = j["stft"].value("window", cfg.stft_window);
      cfg.stft_hop = j["stft"].value("hop", cfg.stft_hop);
    }
    if (j.contains("rpca")) {
      const auto& r = j["rpca"];
      cfg.rpca.lambda = r.value("lambda", cfg.rpca.lambda);
      cfg.rpca.mu0 = r.value("mu0", cfg.rpca.mu0);
      cfg.rpca.rho = r.value("rho", cfg.rpca.rho);
      cfg.rpca.tol = r.value("tol", cfg.rpca.tol);
      cfg.rpca.max_iter = r.value("max_iter", cfg.rpca.max_iter);
    }
    if (j.contains("denoise")) {
      const auto& d = j["denoise"];
      cfg.wavelet_family = d.value("family", cfg.wavelet_family);
      cfg.wavelet_levels = d.value("levels", cfg.wavelet_levels);
      cfg.denoise_k = d.value("k", cfg.denoise_k);
      cfg.threshold_mode = d.value("mode", cfg.threshold_mode);
    }
    if (j.contains("features")) {
      const auto& fe = j["features"];
      cfg.feature_variant = fe.value("variant", cfg.feature_variant);
      cfg.mfcc_coeffs = fe.value("mfcc_coeffs", cfg.mfcc_coeffs);
      cfg.raw_rate = fe.value("raw_rate", cfg.raw_rate);
    }
    if (j.contains("model")) {
      const auto& m = j["model"];
      cfg.model = parse_model_variant(m.value("variant", std::string("svm-linear")));
      cfg.params.svm_c = m.value("svm_c", cfg.params.svm_c);
      cfg.params.rbf_gamma = m.value("rbf_gamma", cfg.params.rbf_gamma);
      cfg.params.poly_degree = m.value("poly_degree", cfg.params.poly_degree);
      cfg.params.poly_alpha = m.value("poly_alpha", cfg.params.poly_alpha);
      cfg.params.poly_c = m.value("poly_c", cfg.params.poly_c);
      cfg.params.gmm_components = m.value("gmm_components", cfg.params.gmm_components);
      cfg.params.gmm_tol = m.value("gmm_tol", cfg.params.gmm_tol);
      cfg.params.gmm_max_iter = m.value("gmm_max_iter", cfg.params.gmm_max_iter);
    }
    if (j.contains("evaluation")) {
      const auto& e = j["evaluation"];
      cfg.folds = e.value("folds", cfg.folds);
      cfg.repeats = e.value("repeats", cfg.repeats);
      cfg.pca_retention = e.value("pca_retention", cfg.pca_retention);
      cfg.stratified = e.value("stratified", cfg.stratified);
      cfg.with_timing = e.value("with_timing", cfg.with_timing);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return cfg;
}

inline PipelineConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("config: cannot open '" + path + "'");
  nlohmann::json j;
  try {
    f >> j;
  } catch (const std::exception& e) {
    throw ConfigError("config: invalid JSON in '" + path + "': " + e.what());
  }
  return parse_config(j);
}

// Rejects invalid settings before any work starts.
inline void validate_config(const PipelineConfig& cfg) {
  if (!std::filesystem::exists(cfg.manifest))
    throw ConfigError("config: manifest '" + cfg.manifest + "' does not exist");
  if (cfg.workers < 1) throw ConfigError("config: workers must be >= 1");
  if (cfg.working_rate <= 0) throw ConfigError("config: working_rate must be positive");
  if (cfg.separate_rate < 0) throw ConfigError("config: separate_rate must be >= 0");
  if (cfg.segment_seconds <= 0.0) throw ConfigError("config: segment_seconds must be positive");
  if (cfg.stft_window < 2 || !is_power_of_two(std::size_t(cfg.stft_window)))
    throw ConfigError("config: stft window must be a power of two >= 2");
  if (cfg.stft_hop <= 0 || cfg.stft_hop > cfg.stft_window)
    throw ConfigError("config: stft hop must be in (0, window]");
  if (cfg.rpca.rho <= 1.0) throw ConfigError("config: rpca rho must be > 1");
  if (cfg.rpca.tol <= 0.0) throw ConfigError("config: rpca tol must be > 0");
  if (cfg.rpca.max_iter < 1) throw ConfigError("config: rpca max_iter must be >= 1");
  if (cfg.wavelet_levels < 1) throw ConfigError("config: wavelet levels must be >= 1");
  if (cfg.denoise_k < 0.0 || cfg.denoise_k > 1.0)
    throw ConfigError("config: denoise k must be in [0, 1]");
  parse_threshold_mode(cfg.threshold_mode);
  if (cfg.feature_variant != "dwt" && cfg.feature_variant != "mfcc" &&
      cfg.feature_variant != "raw")
    throw ConfigError("config: feature variant must be dwt|mfcc|raw");
  if (cfg.mfcc_coeffs < 1) throw ConfigError("config: mfcc_coeffs must be >= 1");
  if (cfg.raw_rate < 0) throw ConfigError("config: raw_rate must be >= 0");
  if (cfg.folds < 2) throw ConfigError("config: folds must be >= 2");
  if (cfg.repeats < 1) throw ConfigError("config: repeats must be >= 1");
  if (cfg.pca_retention <= 0.0 || cfg.pca_retention > 1.0)
    throw ConfigError("config: pca_retention must be in (0, 1]");
  try {
    wavelet_filter(cfg.wavelet_family);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

namespace detail {

inline std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ull) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::uint64_t file_digest(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read '" + path + "' for hashing");
  std::uint64_t h = 0xcbf29ce484222325ull;
  char buf[65536];
  while (f.read(buf, sizeof buf) || f.gcount() > 0)
    h = fnv1a(std::string_view(buf, std::size_t(f.gcount())), h);
  return h;
}

inline std::string hex_key(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// a stage output is reusable when its key file matches and outputs exist
inline bool cache_valid(const std::filesystem::path& key_file, const std::string& key,
                        const std::vector<std::filesystem::path>& outputs) {
  std::ifstream f(key_file);
  if (!f) return false;
  std::string stored;
  std::getline(f, stored);
  if (stored != key) return false;
  for (const auto& p : outputs)
    if (!std::filesystem::exists(p)) return false;
  return true;
}

inline void write_key(const std::filesystem::path& key_file, const std::string& key) {
  std::ofstream f(key_file, std::ios::trunc);
  f << key << '\n';
}

template <typename Fn>
void parallel_for(std::size_t count, int workers, Fn&& fn) {
  const int threads = int(std::min<std::size_t>(std::size_t(std::max(workers, 1)), count));
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::mutex err_mutex;
  std::exception_ptr error;
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t)
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= count) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(err_mutex);
          if (!error) error = std::current_exception();
          return;
        }
      }
    });
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

inline std::string entry_stem(const ManifestEntry& e, std::size_t index) {
  return std::to_string(index) + "_" + std::filesystem::path(e.path).stem().string();
}

}  // namespace detail

struct StageStatus {
  std::string name;
  std::size_t computed = 0;
  std::size_t cached = 0;
  std::size_t skipped = 0;  // missing inputs
};

struct PipelineResult {
  std::vector<StageStatus> stages;
  std::string features_csv;
  std::string report_csv;
  EvalReport report;

  const StageStatus& stage(const std::string& name) const {
    for (const auto& s : stages)
      if (s.name == name) return s;
    throw std::out_of_range("no stage '" + name + "'");
  }
};

// Extracts one feature row per segment from already-conditioned vocal clips.
// denoise_k applies to the dwt variant only (the pipeline passes 0 because
// its denoise stage already ran; the standalone `extract` command passes the
// configured k).
inline Dataset extract_features(const std::vector<AudioClip>& clips, const PipelineConfig& cfg,
                                double denoise_k) {
  Dataset data;
  const WaveletSpec spec{cfg.wavelet_family, cfg.wavelet_levels, WaveletExtension::symmetric};
  const ThresholdMode mode = parse_threshold_mode(cfg.threshold_mode);
  std::vector<std::vector<FeatureVector>> per_clip(clips.size());
  detail::parallel_for(clips.size(), cfg.workers, [&](std::size_t i) {
    for (const auto& seg : segment(clips[i], cfg.segment_seconds)) {
      if (cfg.feature_variant == "dwt")
        per_clip[i].push_back(extract_dwt_features(seg, spec, denoise_k, mode));
      else if (cfg.feature_variant == "mfcc")
        per_clip[i].push_back(extract_mfcc_features(seg, cfg.mfcc_coeffs));
      else
        per_clip[i].push_back(
            extract_raw_features(seg, cfg.raw_rate > 0 ? cfg.raw_rate : cfg.working_rate));
    }
  });
  for (auto& rows : per_clip)
    for (auto& row : rows) data.add(std::move(row));
  return data;
}

inline CvPlan plan_from_config(const PipelineConfig& cfg) {
  CvPlan plan;
  plan.folds = cfg.folds;
  plan.repeats = cfg.repeats;
  plan.seed = cfg.seed;
  plan.pipeline_variant = cfg.feature_variant;
  plan.model = cfg.model;
  plan.params = cfg.params;
  plan.pca_retention = cfg.pca_retention;
  plan.stratified = cfg.stratified;
  return plan;
}

// separate -> denoise -> extract -> evaluate, with per-stage caching keyed
// by input content and the parameters that affect the stage.
inline PipelineResult run_pipeline(const PipelineConfig& cfg, std::ostream& log) {
  validate_config(cfg);
  const auto entries = read_manifest(cfg.manifest);
  namespace fs = std::filesystem;
  const fs::path outdir(cfg.outdir);
  fs::create_directories(outdir / "separated");
  fs::create_directories(outdir / "denoised");

  PipelineResult result;

  // --- separate ---
  StageStatus sep{"separate"};
  std::vector<std::string> voice_paths(entries.size());
  std::vector<std::string> separate_keys(entries.size());
  std::vector<char> available(entries.size(), 0);
  {
    std::vector<int> outcome(entries.size(), 0);  // 0 skip, 1 cached, 2 computed
    detail::parallel_for(entries.size(), cfg.workers, [&](std::size_t i) {
      const auto& e = entries[i];
      if (!fs::exists(e.path)) {
        return;  // counted as skipped below
      }
      std::string key_src = "separate;";
      key_src += std::to_string(cfg.stft_window) + "," + std::to_string(cfg.stft_hop) + "," +
                 std::to_string(cfg.separate_rate) + "," + std::to_string(cfg.rpca.lambda) + "," +
                 std::to_string(cfg.rpca.mu0) + "," + std::to_string(cfg.rpca.rho) + "," +
                 std::to_string(cfg.rpca.tol) + "," + std::to_string(cfg.rpca.max_iter) + "," +
                 detail::hex_key(detail::file_digest(e.path));
      const std::string key = detail::hex_key(detail::fnv1a(key_src));
      separate_keys[i] = key;

      const std::string stem = detail::entry_stem(e, i);
      const fs::path voice = outdir / "separated" / (stem + ".voice.wav");
      const fs::path music = outdir / "separated" / (stem + ".music.wav");
      const fs::path key_file = outdir / "separated" / (stem + ".key");
      voice_paths[i] = voice.string();
      available[i] = 1;
      if (detail::cache_valid(key_file, key, {voice, music})) {
        outcome[i] = 1;
        return;
      }
      AudioClip clip = load_audio(e.path);
      if (cfg.separate_rate > 0) clip = resample(clip, cfg.separate_rate);
      const auto [v, m] = separate_voice(stft(clip, cfg.stft_window, cfg.stft_hop), cfg.rpca);
      save_audio(v, voice.string());
      save_audio(m, music.string());
      detail::write_key(key_file, key);
      outcome[i] = 2;
    });
    for (std::size_t i = 0; i < entries.size(); ++i) {
      if (!available[i]) {
        ++sep.skipped;
        log << "separate: warning: missing input '" << entries[i].path << "' (skipped)\n";
      } else if (outcome[i] == 1) {
        ++sep.cached;
      } else {
        ++sep.computed;
      }
    }
  }
  log << "stage separate: " << sep.computed << " computed, " << sep.cached << " cached, "
      << sep.skipped << " skipped\n";
  result.stages.push_back(sep);
  if (sep.computed + sep.cached == 0) throw std::runtime_error("pipeline: no usable inputs");

  // --- denoise ---
  StageStatus den{"denoise"};
  std::vector<std::string> denoised_paths(entries.size());
  std::vector<std::string> denoise_keys(entries.size());
  {
    std::vector<int> outcome(entries.size(), 0);
    detail::parallel_for(entries.size(), cfg.workers, [&](std::size_t i) {
      if (!available[i]) return;
      std::string key_src = "denoise;";
      key_src += separate_keys[i] + "," + cfg.wavelet_family + "," +
                 std::to_string(cfg.wavelet_levels) + "," + std::to_string(cfg.denoise_k) + "," +
                 cfg.threshold_mode + "," + std::to_string(cfg.working_rate);
      const std::string key = detail::hex_key(detail::fnv1a(key_src));
      denoise_keys[i] = key;
      const std::string stem = detail::entry_stem(entries[i], i);
      const fs::path out = outdir / "denoised" / (stem + ".wav");
      const fs::path key_file = outdir / "denoised" / (stem + ".key");
      denoised_paths[i] = out.string();
      if (detail::cache_valid(key_file, key, {out})) {
        outcome[i] = 1;
        return;
      }
      AudioClip clip = load_audio(voice_paths[i]);
      clip = resample(clip, cfg.working_rate);
      const WaveletSpec spec{cfg.wavelet_family, cfg.wavelet_levels, WaveletExtension::symmetric};
      clip.samples = denoise(clip.samples, spec, cfg.denoise_k,
                             parse_threshold_mode(cfg.threshold_mode));
      save_audio(clip, out.string());
      detail::write_key(key_file, key);
      outcome[i] = 2;
    });
    for (std::size_t i = 0; i < entries.size(); ++i) {
      if (!available[i]) continue;
      if (outcome[i] == 1)
        ++den.cached;
      else
        ++den.computed;
    }
  }
  log << "stage denoise: " << den.computed << " computed, " << den.cached << " cached\n";
  result.stages.push_back(den);

  // --- extract ---
  StageStatus ext{"extract"};
  const fs::path features_csv = outdir / ("features_" + cfg.feature_variant + ".csv");
  result.features_csv = features_csv.string();
  std::string extract_key;
  {
    std::string key_src = "extract;";
    for (std::size_t i = 0; i < entries.size(); ++i)
      if (available[i]) key_src += denoise_keys[i] + "=" + entries[i].label + ";";
    key_src += cfg.feature_variant + "," + std::to_string(cfg.segment_seconds) + "," +
               std::to_string(cfg.mfcc_coeffs) + "," + std::to_string(cfg.raw_rate);
    extract_key = detail::hex_key(detail::fnv1a(key_src));
    const fs::path key_file = outdir / ("features_" + cfg.feature_variant + ".key");
    if (detail::cache_valid(key_file, extract_key, {features_csv})) {
      ext.cached = 1;
    } else {
      std::vector<AudioClip> clips;
      for (std::size_t i = 0; i < entries.size(); ++i) {
        if (!available[i]) continue;
        AudioClip clip = load_audio(denoised_paths[i]);
        clip.label = entries[i].label;
        clips.push_back(std::move(clip));
      }
      const Dataset data = extract_features(clips, cfg, /*denoise_k=*/0.0);
      if (data.rows.empty())
        throw std::runtime_error("pipeline: extraction produced no rows (clips too short?)");
      write_feature_csv(data, features_csv.string());
      detail::write_key(key_file, extract_key);
      ext.computed = 1;
    }
  }
  log << "stage extract: " << (ext.cached ? "cached" : "computed") << " -> "
      << result.features_csv << "\n";
  result.stages.push_back(ext);

  // --- evaluate ---
  StageStatus ev{"evaluate"};
  const fs::path report_csv = outdir / ("report_" + cfg.feature_variant + ".csv");
  result.report_csv = report_csv.string();
  {
    std::string key_src = "evaluate;";
    key_src += extract_key + "," + model_variant_name(cfg.model) + "," +
               std::to_string(cfg.params.svm_c) + "," + std::to_string(cfg.params.rbf_gamma) +
               "," + std::to_string(cfg.params.poly_degree) + "," +
               std::to_string(cfg.params.poly_alpha) + "," + std::to_string(cfg.params.poly_c) +
               "," + std::to_string(cfg.params.gmm_components) + "," +
               std::to_string(cfg.params.gmm_tol) + "," +
               std::to_string(cfg.params.gmm_max_iter) + "," + std::to_string(cfg.folds) + "," +
               std::to_string(cfg.repeats) + "," + std::to_string(cfg.seed) + "," +
               std::to_string(cfg.pca_retention) + "," + std::to_string(cfg.stratified) + "," +
               std::to_string(cfg.with_timing);
    const std::string key = detail::hex_key(detail::fnv1a(key_src));
    const fs::path key_file = outdir / ("report_" + cfg.feature_variant + ".key");
    const fs::path confusion(detail::confusion_path(report_csv.string()));
    if (detail::cache_valid(key_file, key, {report_csv, confusion})) {
      ev.cached = 1;
      result.report = parse_report(report_csv.string());
    } else {
      const Dataset data = read_feature_csv(features_csv.string());
      result.report = cross_validate(data, plan_from_config(cfg));
      emit_report(result.report, report_csv.string(), cfg.with_timing);
      detail::write_key(key_file, key);
      ev.computed = 1;
    }
  }
  log << "stage evaluate: " << (ev.cached ? "cached" : "computed") << " -> " << result.report_csv
      << " (mean accuracy " << result.report.mean_accuracy << ")\n";
  result.stages.push_back(ev);
  return result;
}

}  // namespace sid
