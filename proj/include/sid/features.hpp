#pragma once

// Feature extraction: DWT sub-band statistics (the 18-value vector used by
// the classifiers), a frame-wise MFCC baseline, raw resampled sample
// vectors, the z-score standardizer and the feature CSV format.

#include <Eigen/Core>
#include <algorithm>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "sid/audio.hpp"
#include "sid/fft.hpp"
#include "sid/stft.hpp"
#include "sid/wavelet.hpp"

namespace sid {

struct FeatureVector {
  std::vector<double> values;
  std::vector<std::string> feature_names;
  std::string label;  // empty when unlabeled
};

struct Dataset {
  std::vector<FeatureVector> rows;
  std::vector<std::string> class_names;  // first-appearance order

  std::size_t dim() const { return rows.empty() ? 0 : rows[0].values.size(); }

  // appends a row, registering its label and checking dimensions
  void add(FeatureVector row) {
    if (!rows.empty() && row.values.size() != dim())
      throw std::invalid_argument("Dataset: inconsistent feature dimension");
    if (!row.label.empty() &&
        std::find(class_names.begin(), class_names.end(), row.label) == class_names.end())
      class_names.push_back(row.label);
    rows.push_back(std::move(row));
  }

  int class_index(const std::string& label) const {
    const auto it = std::find(class_names.begin(), class_names.end(), label);
    return it == class_names.end() ? -1 : int(it - class_names.begin());
  }

  Eigen::MatrixXd matrix() const {
    Eigen::MatrixXd m(Eigen::Index(rows.size()), Eigen::Index(dim()));
    for (std::size_t i = 0; i < rows.size(); ++i)
      for (std::size_t j = 0; j < rows[i].values.size(); ++j)
        m(Eigen::Index(i), Eigen::Index(j)) = rows[i].values[j];
    return m;
  }

  std::vector<int> label_indices() const {
    std::vector<int> y(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) y[i] = class_index(rows[i].label);
    return y;
  }
};

inline double band_mean(std::span<const double> band) {
  if (band.empty()) throw std::invalid_argument("band_mean: empty band");
  return std::accumulate(band.begin(), band.end(), 0.0) / double(band.size());
}

// population standard deviation (divisor N)
inline double band_std(std::span<const double> band) {
  if (band.empty()) throw std::invalid_argument("band_std: empty band");
  const double mu = band_mean(band);
  double acc = 0.0;
  for (double v : band) acc += (v - mu) * (v - mu);
  return std::sqrt(acc / double(band.size()));
}

// Shannon entropy of the l2-normalized coefficients: -sum p_i ln p_i with
// p_i = x_i^2 / sum x^2; zero coefficients contribute nothing, and an
// all-zero band is 0 by convention.
inline double band_entropy(std::span<const double> band) {
  if (band.empty()) throw std::invalid_argument("band_entropy: empty band");
  double total = 0.0;
  for (double v : band) total += v * v;
  if (total <= 0.0) return 0.0;
  double e = 0.0;
  for (double v : band) {
    const double p = v * v / total;
    if (p > 0.0) e -= p * std::log(p);
  }
  return e;
}

// mean of the one-sided power spectrum |F|^2 / N
inline double band_psd_summary(std::span<const double> band) {
  if (band.empty()) throw std::invalid_argument("band_psd_summary: empty band");
  const auto p = power_spectrum(band);
  return std::accumulate(p.begin(), p.end(), 0.0) / double(p.size());
}

inline double median(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("median: empty input");
  std::vector<double> v(values.begin(), values.end());
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + std::ptrdiff_t(mid), v.end());
  double m = v[mid];
  if (v.size() % 2 == 0) {
    std::nth_element(v.begin(), v.begin() + std::ptrdiff_t(mid - 1), v.begin() + std::ptrdiff_t(mid));
    m = 0.5 * (m + v[mid - 1]);
  }
  return m;
}

// Denoise, decompose into levels+1 sub-bands and summarize: per band the
// mean |coefficient|, standard deviation and spectral entropy, then three
// whole-signal statistics (median, std, mean PSD). levels=4 gives the
// 18-value vector, ordered [L4, H4, H3, H2, H1] x {absmean, std, entropy}
// then {median, std, psd_mean}.
inline FeatureVector extract_dwt_features(const AudioClip& seg, const WaveletSpec& spec, double k,
                                          ThresholdMode mode = ThresholdMode::soft) {
  if (seg.samples.empty()) throw std::invalid_argument("extract_dwt_features: empty segment");
  const std::vector<double> clean = denoise(seg.samples, spec, k, mode);
  const WaveletDecomposition dec = wavedec(clean, spec, seg.sample_rate);

  FeatureVector fv;
  fv.label = seg.label;
  const auto labels = band_labels(spec.levels);
  std::vector<const std::vector<double>*> bands;
  bands.push_back(&dec.approx);
  for (const auto& d : dec.details) bands.push_back(&d);

  for (std::size_t b = 0; b < bands.size(); ++b) {
    std::vector<double> mag(bands[b]->size());
    for (std::size_t i = 0; i < mag.size(); ++i) mag[i] = std::abs((*bands[b])[i]);
    fv.values.push_back(band_mean(mag));
    fv.feature_names.push_back(labels[b] + "_absmean");
    fv.values.push_back(band_std(*bands[b]));
    fv.feature_names.push_back(labels[b] + "_std");
    fv.values.push_back(band_entropy(*bands[b]));
    fv.feature_names.push_back(labels[b] + "_entropy");
  }
  fv.values.push_back(median(clean));
  fv.feature_names.push_back("signal_median");
  fv.values.push_back(band_std(clean));
  fv.feature_names.push_back("signal_std");
  fv.values.push_back(band_psd_summary(clean));
  fv.feature_names.push_back("signal_psd_mean");
  return fv;
}

struct MfccConfig {
  double frame_ms = 25.0;
  double hop_ms = 10.0;
  int n_filters = 26;
  double preemphasis = 0.97;
};

namespace detail {

inline double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
inline double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

// triangular mel filterbank over the one-sided bins of an nfft transform
inline std::vector<std::vector<double>> mel_filterbank(int n_filters, int nfft, int rate) {
  const int bins = nfft / 2 + 1;
  const double mel_max = hz_to_mel(double(rate) / 2.0);
  std::vector<double> edges(std::size_t(n_filters) + 2);
  for (int i = 0; i < n_filters + 2; ++i)
    edges[std::size_t(i)] = mel_to_hz(mel_max * double(i) / double(n_filters + 1));
  std::vector<std::vector<double>> fb(std::size_t(n_filters), std::vector<double>(std::size_t(bins), 0.0));
  for (int m = 0; m < n_filters; ++m) {
    const double lo = edges[std::size_t(m)], mid = edges[std::size_t(m) + 1], hi = edges[std::size_t(m) + 2];
    for (int k = 0; k < bins; ++k) {
      const double f = double(k) * double(rate) / double(nfft);
      if (f > lo && f < mid)
        fb[std::size_t(m)][std::size_t(k)] = (f - lo) / (mid - lo);
      else if (f >= mid && f < hi)
        fb[std::size_t(m)][std::size_t(k)] = (hi - f) / (hi - mid);
    }
  }
  return fb;
}

}  // namespace detail

// Frame-wise MFCCs (mel filterbank on the power spectrum, log, orthonormal
// DCT-II), summarized as per-coefficient mean and std across frames:
// 2 * n_coeffs values.
inline FeatureVector extract_mfcc_features(const AudioClip& seg, int n_coeffs = 13,
                                           MfccConfig cfg = {}) {
  if (seg.samples.empty()) throw std::invalid_argument("extract_mfcc_features: empty segment");
  if (n_coeffs < 1) throw std::invalid_argument("extract_mfcc_features: n_coeffs must be >= 1");
  const auto frame_len = std::size_t(std::lround(cfg.frame_ms * seg.sample_rate / 1000.0));
  const auto hop = std::size_t(std::lround(cfg.hop_ms * seg.sample_rate / 1000.0));
  if (frame_len < 2 || hop < 1)
    throw std::invalid_argument("extract_mfcc_features: frame geometry too small for sample rate");
  if (seg.samples.size() < frame_len)
    throw std::invalid_argument("extract_mfcc_features: segment shorter than one frame");
  if (n_coeffs > cfg.n_filters)
    throw std::invalid_argument("extract_mfcc_features: n_coeffs cannot exceed n_filters");

  std::vector<double> emphasized(seg.samples.size());
  emphasized[0] = seg.samples[0];
  for (std::size_t i = 1; i < seg.samples.size(); ++i)
    emphasized[i] = seg.samples[i] - cfg.preemphasis * seg.samples[i - 1];

  const std::size_t nfft = next_power_of_two(frame_len);
  const auto fb = detail::mel_filterbank(cfg.n_filters, int(nfft), seg.sample_rate);
  const auto window = hann_periodic(int(frame_len));
  const std::size_t n_frames = (emphasized.size() - frame_len) / hop + 1;

  Eigen::MatrixXd coeffs(Eigen::Index(n_frames), n_coeffs);
  std::vector<double> frame(nfft, 0.0);
  std::vector<double> log_mel(std::size_t(cfg.n_filters));
  for (std::size_t m = 0; m < n_frames; ++m) {
    std::fill(frame.begin(), frame.end(), 0.0);
    for (std::size_t j = 0; j < frame_len; ++j)
      frame[j] = emphasized[m * hop + j] * window[j];
    const auto power = power_spectrum(frame);
    for (int f = 0; f < cfg.n_filters; ++f) {
      double mel_energy = 0.0;
      for (std::size_t k = 0; k < power.size(); ++k)
        mel_energy += fb[std::size_t(f)][k] * power[k];
      log_mel[std::size_t(f)] = std::log(std::max(mel_energy, 1e-10));
    }
    for (int c = 0; c < n_coeffs; ++c) {
      double acc = 0.0;
      for (int f = 0; f < cfg.n_filters; ++f)
        acc += log_mel[std::size_t(f)] *
               std::cos(M_PI * double(c) * (2.0 * f + 1.0) / (2.0 * cfg.n_filters));
      const double scale =
          c == 0 ? std::sqrt(1.0 / cfg.n_filters) : std::sqrt(2.0 / cfg.n_filters);
      coeffs(Eigen::Index(m), c) = scale * acc;
    }
  }

  FeatureVector fv;
  fv.label = seg.label;
  for (int c = 0; c < n_coeffs; ++c) {
    fv.values.push_back(coeffs.col(c).mean());
    fv.feature_names.push_back("mfcc" + std::to_string(c) + "_mean");
  }
  for (int c = 0; c < n_coeffs; ++c) {
    const double mu = coeffs.col(c).mean();
    fv.values.push_back(std::sqrt((coeffs.col(c).array() - mu).square().mean()));
    fv.feature_names.push_back("mfcc" + std::to_string(c) + "_std");
  }
  return fv;
}

// The no-extraction baseline: the segment itself, resampled to raw_rate so
// every row has the same fixed length.
inline FeatureVector extract_raw_features(const AudioClip& seg, int raw_rate) {
  if (seg.samples.empty()) throw std::invalid_argument("extract_raw_features: empty segment");
  const AudioClip r = resample(seg, raw_rate);
  FeatureVector fv;
  fv.label = seg.label;
  fv.values = r.samples;
  fv.feature_names.resize(fv.values.size());
  for (std::size_t i = 0; i < fv.values.size(); ++i)
    fv.feature_names[i] = "s" + std::to_string(i);
  return fv;
}

// Per-feature z-score fitted on training rows only. Constant features get
// unit scale so they pass through as zeros.
struct Standardizer {
  Eigen::VectorXd means;
  Eigen::VectorXd stds;

  void fit(const Eigen::MatrixXd& X) {
    if (X.rows() < 1) throw std::invalid_argument("Standardizer: no rows");
    means = X.colwise().mean();
    stds.resize(X.cols());
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
      const double var = (X.col(j).array() - means(j)).square().mean();
      const double sd = std::sqrt(var);
      stds(j) = sd > 1e-12 ? sd : 1.0;
    }
  }

  Eigen::MatrixXd transform(const Eigen::MatrixXd& X) const {
    if (X.cols() != means.size()) throw std::invalid_argument("Standardizer: dimension mismatch");
    return (X.rowwise() - means.transpose()).array().rowwise() / stds.transpose().array();
  }

  Eigen::VectorXd transform(const Eigen::VectorXd& x) const {
    if (x.size() != means.size()) throw std::invalid_argument("Standardizer: dimension mismatch");
    return (x - means).cwiseQuotient(stds);
  }
};

// Feature CSV: header of feature names plus `label`, one row per segment,
// doubles at full round-trip precision.
inline void write_feature_csv(const Dataset& data, const std::string& path) {
  if (data.rows.empty()) throw std::invalid_argument("write_feature_csv: empty dataset");
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("write_feature_csv: cannot write '" + path + "'");
  const auto& names = data.rows[0].feature_names;
  for (const auto& n : names) {
    if (n.find(',') != std::string::npos)
      throw std::invalid_argument("write_feature_csv: comma in feature name");
    f << n << ',';
  }
  f << "label\n";
  f << std::setprecision(17);
  for (const auto& row : data.rows) {
    if (row.label.find(',') != std::string::npos)
      throw std::invalid_argument("write_feature_csv: comma in label");
    for (double v : row.values) f << v << ',';
    f << row.label << '\n';
  }
  if (!f) throw std::runtime_error("write_feature_csv: short write on '" + path + "'");
}

inline Dataset read_feature_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("read_feature_csv: cannot open '" + path + "'");
  std::string line;
  if (!std::getline(f, line)) throw std::runtime_error("read_feature_csv: empty file");
  std::vector<std::string> header;
  std::stringstream hs(line);
  std::string cell;
  while (std::getline(hs, cell, ',')) header.push_back(cell);
  if (header.empty() || header.back() != "label")
    throw std::runtime_error("read_feature_csv: last header column must be 'label'");
  header.pop_back();

  Dataset data;
  std::size_t line_no = 1;
  while (std::getline(f, line)) {
    ++line_no;
    if (line.empty()) continue;
    FeatureVector row;
    row.feature_names = header;
    std::stringstream ls(line);
    std::vector<std::string> cells;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.push_back("");
    if (cells.size() != header.size() + 1)
      throw std::runtime_error("read_feature_csv: wrong column count at line " +
                               std::to_string(line_no));
    row.values.resize(header.size());
    for (std::size_t i = 0; i < header.size(); ++i) {
      try {
        row.values[i] = std::stod(cells[i]);
      } catch (...) {
        throw std::runtime_error("read_feature_csv: bad number at line " + std::to_string(line_no));
      }
    }
    row.label = cells.back();
    data.add(std::move(row));
  }
  return data;
}

}  // namespace sid
