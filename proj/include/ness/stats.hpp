#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "ness/error.hpp"
#include "ness/rng.hpp"

namespace ness::stats {

inline double mean(std::span<const double> x) {
  if (x.empty()) throw AnalysisError("mean of an empty series");
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

/// Unbiased sample variance.
inline double variance(std::span<const double> x) {
  if (x.size() < 2) throw AnalysisError("variance needs at least two values");
  const double m = mean(x);
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return s / static_cast<double>(x.size() - 1);
}

struct BatchMeans {
  double mean = 0.0;
  double se = 0.0;
  std::size_t batches = 0;
  std::size_t batch_length = 0;
};

/// Non-overlapping batch means; trailing samples that do not fill a batch are dropped.
inline BatchMeans batch_means(std::span<const double> x, std::size_t batch_count) {
  if (batch_count < 2) throw AnalysisError("batch means needs at least two batches");
  const std::size_t len = x.size() / batch_count;
  if (len == 0) throw AnalysisError("series too short for the requested batch count");
  std::vector<double> means(batch_count);
  for (std::size_t b = 0; b < batch_count; ++b) means[b] = mean(x.subspan(b * len, len));
  return {mean(means), std::sqrt(variance(means) / static_cast<double>(batch_count)), batch_count, len};
}

/// Autocovariance gamma(k) = (1/N) sum_i (x_i - m)(x_{i+k} - m), k = 0..max_lag, via FFT
/// with zero padding.
inline std::vector<double> autocovariance(std::span<const double> x, std::size_t max_lag) {
  const std::size_t n = x.size();
  if (n < 2) throw AnalysisError("autocovariance needs at least two samples");
  max_lag = std::min(max_lag, n - 1);
  std::size_t size = 1;
  while (size < 2 * n) size <<= 1;
  const double m = mean(x);
  std::vector<double> padded(size, 0.0);
  for (std::size_t i = 0; i < n; ++i) padded[i] = x[i] - m;
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> spec;
  fft.fwd(spec, padded);
  for (auto& z : spec) z = std::norm(z);
  std::vector<double> back;
  fft.inv(back, spec);
  std::vector<double> out(max_lag + 1);
  for (std::size_t k = 0; k <= max_lag; ++k) out[k] = back[k] / static_cast<double>(n);
  return out;
}

/// Raw lagged products c(k) = (1/(N-k)) sum_i x_i x_{i+k} without mean subtraction, for
/// series whose mean is known to vanish.
inline std::vector<double> lagged_products(std::span<const double> x, std::size_t max_lag) {
  const std::size_t n = x.size();
  if (n < 2) throw AnalysisError("lagged products need at least two samples");
  max_lag = std::min(max_lag, n - 1);
  std::size_t size = 1;
  while (size < 2 * n) size <<= 1;
  std::vector<double> padded(size, 0.0);
  std::copy(x.begin(), x.end(), padded.begin());
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> spec;
  fft.fwd(spec, padded);
  for (auto& z : spec) z = std::norm(z);
  std::vector<double> back;
  fft.inv(back, spec);
  std::vector<double> out(max_lag + 1);
  for (std::size_t k = 0; k <= max_lag; ++k) out[k] = back[k] / static_cast<double>(n - k);
  return out;
}

/// Normalized autocorrelation rho(k) = gamma(k)/gamma(0).
inline std::vector<double> autocorrelation(std::span<const double> x, std::size_t max_lag) {
  auto g = autocovariance(x, max_lag);
  const double g0 = g[0];
  if (!(g0 > 0.0)) throw AnalysisError("constant series has no autocorrelation");
  for (double& v : g) v /= g0;
  return g;
}

struct AutocorrelationTime {
  double tau = 1.0;        ///< integrated time in samples, 1 + 2 sum_{k=1}^{W} rho(k)
  std::size_t window = 0;  ///< W
  bool converged = false;  ///< window found before running out of lags
};

/// Integrated autocorrelation time with Sokal's self-consistent window W >= c tau(W).
inline AutocorrelationTime integrated_autocorrelation_time(std::span<const double> x, double c = 5.0) {
  const std::size_t max_lag = std::max<std::size_t>(1, x.size() / 4);
  std::vector<double> rho;
  try {
    rho = autocorrelation(x, max_lag);
  } catch (const AnalysisError&) {
    return {1.0, 0, true};
  }
  AutocorrelationTime out;
  double tau = 1.0;
  for (std::size_t w = 1; w < rho.size(); ++w) {
    tau += 2.0 * rho[w];
    if (static_cast<double>(w) >= c * tau) {
      out.tau = std::max(tau, 1e-12);
      out.window = w;
      out.converged = true;
      return out;
    }
  }
  out.tau = std::max(tau, 1e-12);
  out.window = rho.size() - 1;
  return out;
}

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_se = 0.0;
  double intercept_se = 0.0;
  double r2 = 0.0;
  std::size_t n = 0;
};

/// Ordinary least squares y = a + b x. Standard errors from the residual variance
/// (zero when n == 2).
inline LinearFit ols(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = x.size();
  if (n != y.size() || n < 2) throw AnalysisError("linear fit needs at least two (x, y) pairs");
  const double mx = mean(x), my = mean(y);
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (!(sxx > 0.0)) throw AnalysisError("linear fit with constant abscissa");
  LinearFit f;
  f.n = n;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double rss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = y[i] - f.intercept - f.slope * x[i];
    rss += e * e;
  }
  f.r2 = syy > 0.0 ? 1.0 - rss / syy : 1.0;
  if (n > 2) {
    const double s2 = rss / static_cast<double>(n - 2);
    f.slope_se = std::sqrt(s2 / sxx);
    f.intercept_se = std::sqrt(s2 * (1.0 / static_cast<double>(n) + mx * mx / sxx));
  }
  return f;
}

/// Weighted least squares with weights 1/sigma_i^2; standard errors from the given sigmas.
inline LinearFit wls(std::span<const double> x, std::span<const double> y, std::span<const double> sigma) {
  const std::size_t n = x.size();
  if (n != y.size() || n != sigma.size() || n < 2) throw AnalysisError("weighted fit needs matching inputs");
  double sw = 0, swx = 0, swy = 0, swxx = 0, swxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!(sigma[i] > 0.0)) throw AnalysisError("weighted fit needs positive sigmas");
    const double w = 1.0 / (sigma[i] * sigma[i]);
    sw += w;
    swx += w * x[i];
    swy += w * y[i];
    swxx += w * x[i] * x[i];
    swxy += w * x[i] * y[i];
  }
  const double det = sw * swxx - swx * swx;
  if (!(det > 0.0)) throw AnalysisError("weighted fit is degenerate");
  LinearFit f;
  f.n = n;
  f.slope = (sw * swxy - swx * swy) / det;
  f.intercept = (swxx * swy - swx * swxy) / det;
  f.slope_se = std::sqrt(sw / det);
  f.intercept_se = std::sqrt(swxx / det);
  const double my = swy / sw;
  double rss = 0.0, tss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double w = 1.0 / (sigma[i] * sigma[i]);
    const double e = y[i] - f.intercept - f.slope * x[i];
    rss += w * e * e;
    tss += w * (y[i] - my) * (y[i] - my);
  }
  f.r2 = tss > 0.0 ? 1.0 - rss / tss : 1.0;
  return f;
}

inline double log_sum_exp(std::span<const double> x) {
  if (x.empty()) return -std::numeric_limits<double>::infinity();
  const double m = *std::max_element(x.begin(), x.end());
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double v : x) s += std::exp(v - m);
  return m + std::log(s);
}

inline double log_mean_exp(std::span<const double> x) {
  return log_sum_exp(x) - std::log(static_cast<double>(x.size()));
}

/// Kish effective sample size (sum w)^2 / sum w^2 of weights w_i = exp(log_w_i).
inline double effective_sample_size(std::span<const double> log_w) {
  if (log_w.empty()) return 0.0;
  const double m = *std::max_element(log_w.begin(), log_w.end());
  double s1 = 0.0, s2 = 0.0;
  for (double v : log_w) {
    const double w = std::exp(v - m);
    s1 += w;
    s2 += w * w;
  }
  return s1 * s1 / s2;
}

/// Pool-adjacent-violators: weighted least-squares fit that is non-increasing.
inline std::vector<double> isotonic_decreasing(std::span<const double> y, std::span<const double> w) {
  struct Block {
    double value, weight;
    std::size_t count;
  };
  std::vector<Block> blocks;
  for (std::size_t i = 0; i < y.size(); ++i) {
    blocks.push_back({y[i], w[i], 1});
    while (blocks.size() > 1 && blocks[blocks.size() - 2].value < blocks.back().value) {
      Block b = blocks.back();
      blocks.pop_back();
      Block& a = blocks.back();
      a.value = (a.value * a.weight + b.value * b.weight) / (a.weight + b.weight);
      a.weight += b.weight;
      a.count += b.count;
    }
  }
  std::vector<double> out;
  for (const auto& b : blocks) out.insert(out.end(), b.count, b.value);
  return out;
}

/// Bootstrap index draws from a dedicated stream.
class Bootstrap {
 public:
  Bootstrap(std::uint64_t seed, std::size_t n) : rng_(seed, 0xB007), n_(n) {}

  void resample(std::vector<std::size_t>& idx) {
    idx.resize(n_);
    for (auto& i : idx) i = std::min(n_ - 1, static_cast<std::size_t>(rng_.uniform() * static_cast<double>(n_)));
  }

 private:
  RandomStream rng_;
  std::size_t n_;
};

/// q-quantile by linear interpolation of the sorted sample.
inline double quantile(std::vector<double> x, double q) {
  if (x.empty()) throw AnalysisError("quantile of an empty sample");
  std::sort(x.begin(), x.end());
  const double pos = q * static_cast<double>(x.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, x.size() - 1);
  return x[lo] + (pos - static_cast<double>(lo)) * (x[hi] - x[lo]);
}

}  // namespace ness::stats
