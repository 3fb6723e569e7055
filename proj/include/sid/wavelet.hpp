#pragma once

// Discrete wavelet transform engine: Daubechies analysis/synthesis filter
// banks (db1-db8), multi-level decomposition with symmetric or periodized
// boundary handling, and universal-threshold denoising.
//
// Filter coefficients are derived at first use by spectral factorization of
// the Daubechies polynomial (companion-matrix roots plus Newton polishing)
// rather than typed in from tables.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <mutex>
#include <stdexcept>
#include <string>
#include <vector>

namespace sid {

enum class WaveletExtension { symmetric, periodized };
enum class ThresholdMode { soft, hard };

struct WaveletSpec {
  std::string family = "db4";  // db1..db8
  int levels = 4;
  WaveletExtension extension = WaveletExtension::symmetric;
};

struct WaveletFilter {
  std::vector<double> dec_lo, dec_hi, rec_lo, rec_hi;
  int vanishing_moments = 0;
  std::size_t length() const { return dec_lo.size(); }
};

namespace detail {

inline std::vector<double> poly_mul(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> out(a.size() + b.size() - 1, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
  return out;
}

// Roots of a polynomial with ascending real coefficients, via the companion
// matrix, then polished with a few Newton steps.
inline std::vector<std::complex<double>> poly_roots(const std::vector<double>& coeffs) {
  const std::size_t deg = coeffs.size() - 1;
  if (deg == 0) return {};
  Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(Eigen::Index(deg), Eigen::Index(deg));
  const double lead = coeffs.back();
  for (std::size_t i = 0; i < deg; ++i) {
    companion(Eigen::Index(i), Eigen::Index(deg - 1)) = -coeffs[i] / lead;
    if (i > 0) companion(Eigen::Index(i), Eigen::Index(i - 1)) = 1.0;
  }
  Eigen::EigenSolver<Eigen::MatrixXd> es(companion, false);
  std::vector<std::complex<double>> roots(deg);
  for (std::size_t i = 0; i < deg; ++i) {
    std::complex<double> r = es.eigenvalues()(Eigen::Index(i));
    for (int it = 0; it < 4; ++it) {
      std::complex<double> p(0.0, 0.0), dp(0.0, 0.0);
      for (std::size_t j = coeffs.size(); j-- > 0;) {
        dp = dp * r + p;
        p = p * r + coeffs[j];
      }
      if (std::abs(dp) < 1e-300) break;
      r -= p / dp;
    }
    roots[i] = r;
  }
  return roots;
}

inline double binomial(int n, int k) {
  double v = 1.0;
  for (int i = 1; i <= k; ++i) v = v * double(n - k + i) / double(i);
  return v;
}

inline WaveletFilter compute_daubechies(int vanishing_moments) {
  const int N = vanishing_moments;
  // q(z) = sum_k C(N-1+k,k) * (-(z-1)^2)^k * (4z)^(N-1-k), degree 2N-2.
  // Its roots pair as (r, 1/r); the factors inside the unit circle give the
  // minimum-phase half of |L|^2 in h(z) = (1+z)^N L(z).
  std::vector<double> q(std::size_t(2 * N - 1), 0.0);
  for (int k = 0; k < N; ++k) {
    std::vector<double> term{1.0};
    std::vector<double> zm1_sq{1.0, -2.0, 1.0};  // (z-1)^2
    for (int r = 0; r < k; ++r) term = poly_mul(term, zm1_sq);
    const double sign = (k % 2 == 0) ? 1.0 : -1.0;
    const double scale = sign * binomial(N - 1 + k, k) * std::pow(4.0, double(N - 1 - k));
    const int shift = N - 1 - k;  // times z^(N-1-k)
    for (std::size_t i = 0; i < term.size(); ++i) q[i + std::size_t(shift)] += scale * term[i];
  }

  std::vector<double> lowpass{1.0};
  if (N > 1) {
    auto roots = poly_roots(q);
    std::vector<std::complex<double>> inside;
    for (const auto& r : roots)
      if (std::abs(r) < 1.0) inside.push_back(r);
    std::sort(inside.begin(), inside.end(), [](const auto& a, const auto& b) {
      if (a.real() != b.real()) return a.real() < b.real();
      return a.imag() < b.imag();
    });
    std::vector<bool> used(inside.size(), false);
    for (std::size_t i = 0; i < inside.size(); ++i) {
      if (used[i]) continue;
      used[i] = true;
      const auto r = inside[i];
      if (std::abs(r.imag()) < 1e-9) {
        lowpass = poly_mul(lowpass, {-r.real(), 1.0});
      } else {
        std::size_t partner = i;
        double best = 1e300;
        for (std::size_t j = i + 1; j < inside.size(); ++j) {
          if (used[j]) continue;
          const double d = std::abs(inside[j] - std::conj(r));
          if (d < best) {
            best = d;
            partner = j;
          }
        }
        used[partner] = true;
        lowpass = poly_mul(lowpass, {std::norm(r), -2.0 * r.real(), 1.0});
      }
    }
  }

  std::vector<double> ones_pow(std::size_t(N) + 1);  // (1+z)^N
  for (int j = 0; j <= N; ++j) ones_pow[std::size_t(j)] = binomial(N, j);
  std::vector<double> h = poly_mul(ones_pow, lowpass);

  double sum = 0.0;
  for (double v : h) sum += v;
  const double scale = std::sqrt(2.0) / sum;
  for (double& v : h) v *= scale;
  // standard extremal-phase layout keeps the large taps at the front
  if (std::abs(h.front()) < std::abs(h.back())) std::reverse(h.begin(), h.end());

  WaveletFilter filt;
  filt.vanishing_moments = N;
  filt.rec_lo = h;
  filt.dec_lo.assign(h.rbegin(), h.rend());
  const std::size_t len = h.size();
  filt.rec_hi.resize(len);
  for (std::size_t n = 0; n < len; ++n)
    filt.rec_hi[n] = ((n % 2 == 0) ? 1.0 : -1.0) * filt.rec_lo[len - 1 - n];
  filt.dec_hi.assign(filt.rec_hi.rbegin(), filt.rec_hi.rend());
  return filt;
}

}  // namespace detail

// Cached filter bank for dbN (N vanishing moments, 2N taps).
inline const WaveletFilter& daubechies_filter(int vanishing_moments) {
  if (vanishing_moments < 1 || vanishing_moments > 8)
    throw std::invalid_argument("daubechies_filter: supported range is db1..db8");
  static std::map<int, WaveletFilter> cache;
  static std::mutex mutex;
  std::lock_guard<std::mutex> lock(mutex);
  auto it = cache.find(vanishing_moments);
  if (it == cache.end())
    it = cache.emplace(vanishing_moments, detail::compute_daubechies(vanishing_moments)).first;
  return it->second;
}

inline const WaveletFilter& wavelet_filter(const std::string& family) {
  if (family.size() < 3 || family.compare(0, 2, "db") != 0)
    throw std::invalid_argument("wavelet_filter: unknown family '" + family + "'");
  int n = 0;
  try {
    n = std::stoi(family.substr(2));
  } catch (...) {
    throw std::invalid_argument("wavelet_filter: unknown family '" + family + "'");
  }
  return daubechies_filter(n);
}

struct WaveletDecomposition {
  std::vector<double> approx;                // final low band, e.g. L4
  std::vector<std::vector<double>> details;  // coarsest to finest: [H4, H3, H2, H1]
  WaveletSpec spec;
  std::size_t original_length = 0;
  int sample_rate = 0;  // optional; 0 when unknown
};

namespace detail {

// half-sample symmetric extension: ... x1 x0 | x0 x1 ... xn-1 | xn-1 xn-2 ...
inline double sym_at(const std::vector<double>& x, std::ptrdiff_t i) {
  const auto n = std::ptrdiff_t(x.size());
  while (i < 0 || i >= n) {
    if (i < 0) i = -i - 1;
    if (i >= n) i = 2 * n - 1 - i;
  }
  return x[std::size_t(i)];
}

inline std::size_t sym_band_length(std::size_t n, std::size_t flen) {
  return (n + flen) / 2;  // ceil((n + flen - 1) / 2)
}

inline void dwt_single(const std::vector<double>& x, const WaveletFilter& f,
                       WaveletExtension ext, std::vector<double>& approx,
                       std::vector<double>& detail_band) {
  const std::size_t n = x.size();
  const std::size_t flen = f.length();
  if (ext == WaveletExtension::symmetric) {
    const std::size_t out_len = sym_band_length(n, flen);
    approx.assign(out_len, 0.0);
    detail_band.assign(out_len, 0.0);
    for (std::size_t k = 0; k < out_len; ++k) {
      const auto t = std::ptrdiff_t(2 * k);
      double lo = 0.0, hi = 0.0;
      for (std::size_t j = 0; j < flen; ++j) {
        const double v = sym_at(x, t - std::ptrdiff_t(j));
        lo += f.dec_lo[j] * v;
        hi += f.dec_hi[j] * v;
      }
      approx[k] = lo;
      detail_band[k] = hi;
    }
  } else {
    const std::size_t out_len = n / 2;
    approx.assign(out_len, 0.0);
    detail_band.assign(out_len, 0.0);
    for (std::size_t k = 0; k < out_len; ++k) {
      double lo = 0.0, hi = 0.0;
      for (std::size_t j = 0; j < flen; ++j) {
        auto t = std::ptrdiff_t(2 * k) - std::ptrdiff_t(j);
        t %= std::ptrdiff_t(n);
        if (t < 0) t += std::ptrdiff_t(n);
        const double v = x[std::size_t(t)];
        lo += f.dec_lo[j] * v;
        hi += f.dec_hi[j] * v;
      }
      approx[k] = lo;
      detail_band[k] = hi;
    }
  }
}

inline std::vector<double> idwt_single(const std::vector<double>& approx,
                                       const std::vector<double>& detail_band,
                                       const WaveletFilter& f, WaveletExtension ext,
                                       std::size_t out_len) {
  const std::size_t flen = f.length();
  if (approx.size() != detail_band.size())
    throw std::invalid_argument("waverec: band-length inconsistency between approx and detail");
  std::vector<double> x(out_len, 0.0);
  if (ext == WaveletExtension::symmetric) {
    const std::size_t m = out_len + flen - 1;
    if (approx.size() != sym_band_length(out_len, flen))
      throw std::invalid_argument("waverec: band-length inconsistency with stored signal length");
    for (std::size_t i = 0; i < out_len; ++i) {
      double acc = 0.0;
      for (std::size_t d = 0; d < flen; ++d) {
        const std::size_t t = i + d;
        if (t >= m || (t & 1u)) continue;
        const std::size_t k = t / 2;
        acc += f.dec_lo[d] * approx[k] + f.dec_hi[d] * detail_band[k];
      }
      x[i] = acc;
    }
  } else {
    if (approx.size() != out_len / 2)
      throw std::invalid_argument("waverec: band-length inconsistency with stored signal length");
    for (std::size_t i = 0; i < out_len; ++i) {
      double acc = 0.0;
      for (std::size_t d = 0; d < flen; ++d) {
        const std::size_t t = (i + d) % out_len;
        if (t & 1u) continue;
        const std::size_t k = t / 2;
        acc += f.dec_lo[d] * approx[k] + f.dec_hi[d] * detail_band[k];
      }
      x[i] = acc;
    }
  }
  return x;
}

inline void check_level_length(std::size_t n, std::size_t flen, WaveletExtension ext, int level) {
  if (n < flen)
    throw std::invalid_argument("wavelet: signal too short at level " + std::to_string(level) +
                                " (need at least " + std::to_string(flen) + " samples)");
  if (ext == WaveletExtension::periodized && (n % 2) != 0)
    throw std::invalid_argument("wavelet: periodized mode needs an even length at level " +
                                std::to_string(level));
}

}  // namespace detail

// One analysis split: approximation (low-pass) and detail (high-pass), each
// downsampled by two. Symmetric mode yields ceil((n + filter_len - 1) / 2)
// coefficients per band; periodized mode yields exactly n/2.
inline std::pair<std::vector<double>, std::vector<double>> dwt_level(
    const std::vector<double>& signal, const WaveletSpec& spec) {
  const auto& f = wavelet_filter(spec.family);
  detail::check_level_length(signal.size(), f.length(), spec.extension, 1);
  std::vector<double> a, d;
  detail::dwt_single(signal, f, spec.extension, a, d);
  return {std::move(a), std::move(d)};
}

// Multi-level analysis; details are stored coarsest-first.
inline WaveletDecomposition wavedec(const std::vector<double>& signal, const WaveletSpec& spec,
                                    int sample_rate = 0) {
  if (spec.levels < 1) throw std::invalid_argument("wavedec: levels must be >= 1");
  const auto& f = wavelet_filter(spec.family);
  WaveletDecomposition dec;
  dec.spec = spec;
  dec.original_length = signal.size();
  dec.sample_rate = sample_rate;
  std::vector<double> cur = signal;
  std::vector<std::vector<double>> finest_first;
  for (int lvl = 1; lvl <= spec.levels; ++lvl) {
    detail::check_level_length(cur.size(), f.length(), spec.extension, lvl);
    std::vector<double> a, d;
    detail::dwt_single(cur, f, spec.extension, a, d);
    finest_first.push_back(std::move(d));
    cur = std::move(a);
  }
  dec.approx = std::move(cur);
  dec.details.assign(finest_first.rbegin(), finest_first.rend());
  return dec;
}

// Inverse cascade, truncated to the recorded original length.
inline std::vector<double> waverec(const WaveletDecomposition& dec) {
  const auto& f = wavelet_filter(dec.spec.family);
  const int levels = dec.spec.levels;
  if (int(dec.details.size()) != levels)
    throw std::invalid_argument("waverec: detail band count does not match levels");
  std::vector<std::size_t> lens(std::size_t(levels) + 1);
  lens[0] = dec.original_length;
  for (int j = 1; j <= levels; ++j)
    lens[std::size_t(j)] = dec.spec.extension == WaveletExtension::symmetric
                               ? detail::sym_band_length(lens[std::size_t(j - 1)], f.length())
                               : lens[std::size_t(j - 1)] / 2;
  if (dec.approx.size() != lens[std::size_t(levels)])
    throw std::invalid_argument("waverec: band-length inconsistency in approximation band");
  std::vector<double> cur = dec.approx;
  for (int lvl = levels; lvl >= 1; --lvl) {
    // details[0] is the coarsest band H_levels
    const auto& d = dec.details[std::size_t(levels - lvl)];
    if (d.size() != lens[std::size_t(lvl)])
      throw std::invalid_argument("waverec: band-length inconsistency at level " +
                                  std::to_string(lvl));
    cur = detail::idwt_single(cur, d, f, dec.spec.extension, lens[std::size_t(lvl - 1)]);
  }
  return cur;
}

// Band labels coarsest-first, e.g. levels=4 -> L4, H4, H3, H2, H1.
inline std::vector<std::string> band_labels(int levels) {
  std::vector<std::string> names;
  names.push_back("L" + std::to_string(levels));
  for (int j = levels; j >= 1; --j) names.push_back("H" + std::to_string(j));
  return names;
}

// Nominal frequency ranges for each band, coarsest-first, using the halving
// convention where the finest detail band spans [rate/2, rate].
inline std::vector<std::pair<double, double>> band_frequency_ranges(int levels, int sample_rate) {
  std::vector<std::pair<double, double>> ranges;
  const double top = double(sample_rate);
  ranges.emplace_back(0.0, top / std::pow(2.0, levels));
  for (int j = levels; j >= 1; --j)
    ranges.emplace_back(top / std::pow(2.0, j), top / std::pow(2.0, j - 1));
  return ranges;
}

// Robust MAD estimate of the noise level from the finest detail band.
inline double estimate_noise_sigma(const std::vector<double>& finest_detail) {
  if (finest_detail.empty())
    throw std::invalid_argument("estimate_noise_sigma: empty band");
  std::vector<double> mag(finest_detail.size());
  for (std::size_t i = 0; i < mag.size(); ++i) mag[i] = std::abs(finest_detail[i]);
  const std::size_t n = mag.size();
  const std::size_t mid = n / 2;
  std::nth_element(mag.begin(), mag.begin() + std::ptrdiff_t(mid), mag.end());
  double med = mag[mid];
  if (n % 2 == 0) {
    std::nth_element(mag.begin(), mag.begin() + std::ptrdiff_t(mid - 1),
                     mag.begin() + std::ptrdiff_t(mid));
    med = 0.5 * (med + mag[mid - 1]);
  }
  return med / 0.6745;
}

// k-scaled universal threshold k * sigma * sqrt(2 ln n). k = 0 disables
// shrinkage entirely.
inline double universal_threshold(double sigma, std::size_t n, double k) {
  if (n < 2) throw std::invalid_argument("universal_threshold: need n >= 2");
  if (k < 0.0 || k > 1.0) throw std::invalid_argument("universal_threshold: k must be in [0, 1]");
  if (sigma < 0.0) throw std::invalid_argument("universal_threshold: sigma must be >= 0");
  return k * sigma * std::sqrt(2.0 * std::log(double(n)));
}

inline void threshold_band(std::vector<double>& band, double lambda, ThresholdMode mode) {
  if (mode == ThresholdMode::soft) {
    for (double& v : band) {
      const double mag = std::abs(v) - lambda;
      v = mag > 0.0 ? (v > 0.0 ? mag : -mag) : 0.0;
    }
  } else {
    for (double& v : band)
      if (std::abs(v) <= lambda) v = 0.0;
  }
}

// Thresholds every detail band in place; the approximation is untouched.
inline void apply_threshold(WaveletDecomposition& dec, double lambda, ThresholdMode mode) {
  for (auto& band : dec.details) threshold_band(band, lambda, mode);
}

// Wavelet-threshold denoising: decompose, shrink all detail bands with the
// k-scaled universal threshold (sigma estimated from the finest band, N the
// signal length), reconstruct.
inline std::vector<double> denoise(const std::vector<double>& signal, const WaveletSpec& spec,
                                   double k, ThresholdMode mode = ThresholdMode::soft) {
  WaveletDecomposition dec = wavedec(signal, spec);
  const double sigma = estimate_noise_sigma(dec.details.back());
  const double lambda = universal_threshold(sigma, signal.size(), k);
  apply_threshold(dec, lambda, mode);
  return waverec(dec);
}

}  // namespace sid
