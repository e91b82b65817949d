#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ness/dynamics.hpp"
#include "ness/error.hpp"
#include "ness/observables.hpp"
#include "ness/record.hpp"
#include "ness/stats.hpp"

namespace ness {

// ---------------------------------------------------------------------------
// Energy shells

/// Fixed probe directions in phase space: q-only and p-only unit vectors on every site
/// (energy concentrated on one oscillator, interior sites included), followed by
/// `random_count` Gaussian directions over (p, q, r).
inline std::vector<SystemState> shell_directions(const SystemConfig& c, std::size_t random_count, std::uint64_t seed) {
  std::vector<SystemState> dirs;
  for (std::size_t v = 0; v < c.vertex_count(); ++v) {
    SystemState s = SystemState::zeros(c);
    s.q[v] = 1.0;
    dirs.push_back(s);
    s.q[v] = 0.0;
    s.p[v] = 1.0;
    dirs.push_back(std::move(s));
  }
  RandomStream rng(seed, 0x5E11);
  for (std::size_t i = 0; i < random_count; ++i) {
    SystemState s = SystemState::zeros(c);
    for (double& x : s.p) x = rng.normal();
    for (double& x : s.q) x = rng.normal();
    for (double& x : s.r) x = rng.normal();
    dirs.push_back(std::move(s));
  }
  return dirs;
}

/// The point s * d with G(s * d) = E, by bracketing and bisection on s > 0.
inline SystemState scale_to_energy(const SystemConfig& c, const SystemState& d, double energy) {
  auto at = [&](double scale) {
    SystemState x = d;
    for (double& v : x.p) v *= scale;
    for (double& v : x.q) v *= scale;
    for (double& v : x.r) v *= scale;
    x.t = 0.0;
    return x;
  };
  auto g = [&](double scale) { return total_energy_G(c, at(scale)); };
  if (!(energy > g(0.0))) throw ConfigError("shell energy " + format_real(energy) + " is not above G at the origin");
  double lo = 0.0, hi = 1.0;
  while (g(hi) < energy) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e150) throw AnalysisError("cannot reach shell energy along a probe direction");
  }
  for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (g(mid) < energy ? lo : hi) = mid;
  }
  return at(hi);
}

// ---------------------------------------------------------------------------
// Lyapunov bound T^t W <= kappa(E) W + b(E) chi_{G <= E}

struct LyapunovProbeOptions {
  double theta = 0.25;
  double time = 1.0;
  double dt = 1e-3;
  std::size_t random_directions = 8;
  std::size_t paths = 200;  ///< noise realizations per starting point (1 at zero temperature)
  std::vector<double> b_fractions{0.1, 0.5};  ///< inner shells E*f used for b(E)
  std::uint64_t seed = 1;
  std::size_t workers = 1;
};

struct ShellEstimate {
  double energy = 0.0;
  double log_kappa = 0.0;     ///< max over directions of log E[W(x_t)] - log W(x)
  double log_kappa_se = 0.0;  ///< delta-method s.e. at the maximizing direction
  std::size_t argmax_direction = 0;
  double log_b = -std::numeric_limits<double>::infinity();  ///< -inf when no inner point exceeds kappa W
};

struct LyapunovProbeReport {
  std::vector<ShellEstimate> shells;
  double theta = 0.0;
  bool theta_in_range = true;        ///< theta * T_max < 1
  bool shells_above_temperature = true;  ///< every E above dof * T_max
  bool strictly_decreasing = false;  ///< kappa_hat(E) strictly decreasing in E
  bool significantly_decreasing = false;  ///< every consecutive drop exceeds 3 combined s.e.
};

namespace detail {

struct LogRatio {
  double value = 0.0;
  double se = 0.0;
};

/// log E[exp(theta (G(x_t) - G(x)))] over `paths` noise realizations. Path k of direction i
/// uses the same stream for every shell (common random numbers).
inline std::vector<LogRatio> log_ratios(const SystemConfig& c, std::span<const SystemState> starts,
                                        const LyapunovProbeOptions& opt) {
  const std::size_t paths = c.max_temperature() == 0.0 ? 1 : std::max<std::size_t>(opt.paths, 2);
  const IntegratorSpec spec{Scheme::splitting, opt.dt, std::nullopt};
  const std::size_t steps = step_count(opt.time, opt.dt);
  std::vector<double> logs(starts.size() * paths);
  for_each_index(logs.size(), opt.workers, [&](std::size_t idx) {
    const std::size_t i = idx / paths, k = idx % paths;
    RandomStream rng(opt.seed, (static_cast<std::uint64_t>(i) << 32) | k);
    Integrator integ(c, spec);
    SystemState s = starts[i];
    const double g0 = total_energy_G(c, s);
    for (std::size_t n = 0; n < steps; ++n) integ.advance(s, rng);
    integ.check(s, std::nullopt);
    logs[idx] = opt.theta * (total_energy_G(c, s) - g0);
  });
  std::vector<LogRatio> out(starts.size());
  for (std::size_t i = 0; i < starts.size(); ++i) {
    const std::span<const double> l(logs.data() + i * paths, paths);
    out[i].value = stats::log_mean_exp(l);
    if (paths > 1) {
      std::vector<double> w(paths);
      for (std::size_t k = 0; k < paths; ++k) w[k] = std::exp(l[k] - out[i].value);  // mean 1
      out[i].se = std::sqrt(stats::variance(w) / static_cast<double>(paths));
    }
  }
  return out;
}

}  // namespace detail

/// Monte Carlo probe of the Lyapunov bound on energy shells G = E. kappa_hat(E) is the max
/// over a fixed direction set of E[W_theta(x_t)]/W_theta(x), in log domain; b_hat(E) is the
/// largest excess T^t W - kappa_hat W over points on inner shells.
inline LyapunovProbeReport lyapunov_probe(const SystemConfig& c, std::span<const double> energies,
                                          const LyapunovProbeOptions& opt = {}) {
  if (energies.empty()) throw ConfigError("no energy shells given");
  if (!(opt.theta > 0.0)) throw ConfigError("theta must be positive");
  if (!(opt.time > 0.0 && opt.dt > 0.0)) throw ConfigError("probe time and dt must be positive");
  LyapunovProbeReport rep;
  rep.theta = opt.theta;
  rep.theta_in_range = opt.theta * c.max_temperature() < 1.0;
  const auto dof = static_cast<double>(2 * c.vertex_count() + c.aux_count());
  const auto dirs = shell_directions(c, opt.random_directions, opt.seed);

  for (double e : energies) {
    if (!(e > dof * c.max_temperature())) rep.shells_above_temperature = false;
    std::vector<SystemState> starts;
    for (const auto& d : dirs) starts.push_back(scale_to_energy(c, d, e));
    const auto lr = detail::log_ratios(c, starts, opt);
    ShellEstimate sh;
    sh.energy = e;
    sh.log_kappa = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < lr.size(); ++i) {
      if (lr[i].value > sh.log_kappa) {
        sh.log_kappa = lr[i].value;
        sh.log_kappa_se = lr[i].se;
        sh.argmax_direction = i;
      }
    }
    for (double f : opt.b_fractions) {
      std::vector<SystemState> inner;
      for (const auto& d : dirs) inner.push_back(scale_to_energy(c, d, f * e));
      const auto li = detail::log_ratios(c, inner, opt);
      for (std::size_t i = 0; i < li.size(); ++i) {
        if (li[i].value <= sh.log_kappa) continue;
        // log(exp(log W + l) - exp(log W + log kappa))
        const double log_w = opt.theta * total_energy_G(c, inner[i]);
        const double excess = log_w + li[i].value + std::log1p(-std::exp(sh.log_kappa - li[i].value));
        sh.log_b = std::max(sh.log_b, excess);
      }
    }
    rep.shells.push_back(sh);
  }

  std::vector<ShellEstimate> sorted = rep.shells;
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.energy < b.energy; });
  rep.strictly_decreasing = sorted.size() >= 2;
  rep.significantly_decreasing = sorted.size() >= 2;
  for (std::size_t k = 1; k < sorted.size(); ++k) {
    const double drop = sorted[k - 1].log_kappa - sorted[k].log_kappa;
    rep.strictly_decreasing = rep.strictly_decreasing && drop > 0.0;
    rep.significantly_decreasing =
        rep.significantly_decreasing && drop > 3.0 * std::hypot(sorted[k - 1].log_kappa_se, sorted[k].log_kappa_se);
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Zero-temperature dissipation G(1) - G(0) <= -c E^{2/k2}

struct DissipationOptions {
  double dt = 1e-3;
  double unit_time = 1.0;
  std::size_t random_directions = 8;
  std::uint64_t seed = 1;
};

struct DissipationPoint {
  double energy = 0.0;
  double worst_drop = 0.0;  ///< min over directions of G(0) - G(1)
  std::size_t worst_direction = 0;
  std::vector<double> drops;  ///< per direction
};

struct DissipationReport {
  std::vector<DissipationPoint> points;
  double exponent = 0.0;  ///< slope of log(worst drop) against log E
  double exponent_se = 0.0;
  double c_estimate = 0.0;  ///< exp(intercept)
  double r2 = 0.0;
  double bound_exponent = 0.0;  ///< 2/k2
  bool fault = false;           ///< some energy did not decrease
  bool consistent = false;      ///< exponent >= 2/k2 - exponent_se
};

/// Worst-case energy drop over [0, unit_time] of the noiseless dynamics from a fixed set of
/// directions rescaled to each E, and its power-law fit in E.
inline DissipationReport dissipation_scaling(const SystemConfig& c, std::span<const double> energies,
                                             const DissipationOptions& opt = {}) {
  if (c.max_temperature() != 0.0) throw ConfigError("dissipation scaling needs all reservoir temperatures = 0");
  if (energies.size() < 3) throw ConfigError("dissipation scaling needs at least three energies");
  const auto [emin, emax] = std::minmax_element(energies.begin(), energies.end());
  if (!(*emin > 0.0) || *emax / *emin < 100.0 * (1.0 - 1e-12)) {
    throw ConfigError("energies must be positive and span at least two decades");
  }
  DissipationReport rep;
  rep.bound_exponent = 2.0 / static_cast<double>(c.pair().degree());
  const auto dirs = shell_directions(c, opt.random_directions, opt.seed);
  std::vector<double> lx, ly;
  for (double e : energies) {
    DissipationPoint pt;
    pt.energy = e;
    pt.worst_drop = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < dirs.size(); ++i) {
      const auto res = relax_deterministic(c, scale_to_energy(c, dirs[i], e), opt.dt, opt.unit_time,
                                           step_count(opt.unit_time, opt.dt));
      const double drop = res.G_initial - res.G_final;
      pt.drops.push_back(drop);
      if (drop < pt.worst_drop) {
        pt.worst_drop = drop;
        pt.worst_direction = i;
      }
    }
    if (!(pt.worst_drop > 0.0)) rep.fault = true;
    rep.points.push_back(std::move(pt));
  }
  if (rep.fault) return rep;
  for (const auto& pt : rep.points) {
    lx.push_back(std::log(pt.energy));
    ly.push_back(std::log(pt.worst_drop));
  }
  const auto fit = stats::ols(lx, ly);
  rep.exponent = fit.slope;
  rep.exponent_se = fit.slope_se;
  rep.c_estimate = std::exp(fit.intercept);
  rep.r2 = fit.r2;
  // slack for exact fits (harmonic: slope 1 to rounding)
  rep.consistent = rep.exponent >= rep.bound_exponent - rep.exponent_se - 1e-9;
  return rep;
}

// ---------------------------------------------------------------------------
// Exponential decay of correlations

struct MixingOptions {
  double burn_in_fraction = 0.0;
  double r2_threshold = 0.9;
  double floor_sigma = 3.0;  ///< noise floor in Bartlett standard errors
  std::size_t persistence = 10;  ///< consecutive lags under the floor that end the usable range
  double tail_start = 0.5;   ///< fit window starts at this fraction of the last lag above the floor
};

struct MixingRate {
  double rate = 0.0;
  double rate_se = 0.0;
  double ci_lo = 0.0;  ///< rate +/- 1.96 se
  double ci_hi = 0.0;
  double r2 = 0.0;
  bool oscillatory = false;  ///< rho changes sign before reaching the noise floor
  bool white_noise = false;  ///< fewer than three points above the noise floor
  bool pass = false;
  std::vector<double> lags;  ///< in time units
  std::vector<double> rho;
  std::vector<std::size_t> fitted;  ///< lag indices used in the fit
};

/// Decay rate of the pooled autocorrelation of independent stationary series: log-linear
/// weighted fit of the upper envelope of |rho| over the tail of its range above the Bartlett
/// noise floor.
inline MixingRate mixing_rate(std::span<const std::vector<double>> runs, double spacing, const MixingOptions& opt = {}) {
  if (runs.empty()) throw AnalysisError("mixing rate needs at least one series");
  if (!(spacing > 0.0)) throw ConfigError("sample spacing must be positive");
  std::vector<std::span<const double>> tails;
  std::size_t shortest = std::numeric_limits<std::size_t>::max(), total = 0;
  for (const auto& r : runs) {
    const auto burn = static_cast<std::size_t>(opt.burn_in_fraction * static_cast<double>(r.size()));
    tails.emplace_back(r.data() + burn, r.size() - burn);
    shortest = std::min(shortest, r.size() - burn);
    total += r.size() - burn;
  }
  if (shortest < 16) throw AnalysisError("record too short for a correlation estimate");
  const std::size_t max_lag = shortest / 4;
  std::vector<double> gamma(max_lag + 1, 0.0);
  for (const auto& t : tails) {
    const auto g = stats::autocovariance(t, max_lag);
    const double w = static_cast<double>(t.size()) / static_cast<double>(total);
    for (std::size_t k = 0; k <= max_lag; ++k) gamma[k] += w * g[k];
  }
  if (!(gamma[0] > 0.0)) throw AnalysisError("constant series has no autocorrelation");

  MixingRate out;
  std::vector<double> se(max_lag + 1);
  double sum_sq = 0.0;
  for (std::size_t k = 0; k <= max_lag; ++k) {
    out.lags.push_back(static_cast<double>(k) * spacing);
    out.rho.push_back(gamma[k] / gamma[0]);
    se[k] = std::sqrt((1.0 + 2.0 * sum_sq) / static_cast<double>(total));
    if (k > 0) sum_sq += out.rho[k] * out.rho[k];
  }
  auto above = [&](std::size_t k) { return std::abs(out.rho[k]) > opt.floor_sigma * se[k]; };
  // upper envelope: lags where |rho| is a record from the right, cut at the first one under the floor
  // first lag from which |rho| stays under the floor for `persistence` lags
  std::size_t stop = max_lag + 1, run = 0;
  for (std::size_t k = 1; k <= max_lag; ++k) {
    run = above(k) ? 0 : run + 1;
    if (run == opt.persistence) {
      stop = k + 1 - opt.persistence;
      break;
    }
  }
  std::vector<double> env(stop);
  env[stop - 1] = std::abs(out.rho[stop - 1]);
  for (std::size_t k = stop - 1; k-- > 0;) env[k] = std::max(env[k + 1], std::abs(out.rho[k]));
  std::vector<std::size_t> record;
  for (std::size_t k = 0; k < stop; ++k) {
    if (std::abs(out.rho[k]) < env[k]) continue;
    if (!above(k)) break;
    record.push_back(k);
  }
  for (std::size_t k = 1; k <= (record.empty() ? 0 : record.back()); ++k) {
    if (out.rho[k] < 0.0) out.oscillatory = true;
  }
  // the tail of the envelope carries the slowest rate; faster modes bias the early part
  if (!record.empty()) {
    const double t_start = opt.tail_start * out.lags[record.back()];
    for (std::size_t k : record)
      if (out.lags[k] >= t_start) out.fitted.push_back(k);
    if (out.fitted.size() < 3) out.fitted = record;
  }

  if (out.fitted.size() < 3) {
    out.white_noise = true;
    out.rate = 1.0 / spacing;
    out.pass = true;
    out.ci_lo = out.ci_hi = out.rate;
    return out;
  }
  std::vector<double> x, y, s;
  for (std::size_t k : out.fitted) {
    const double a = std::abs(out.rho[k]);
    x.push_back(out.lags[k]);
    y.push_back(std::log(a));
    s.push_back(std::max(se[k], 1.0 / static_cast<double>(total)) / a);
  }
  const auto fit = stats::wls(x, y, s);
  out.rate = -fit.slope;
  out.rate_se = fit.slope_se;
  out.ci_lo = out.rate - 1.96 * out.rate_se;
  out.ci_hi = out.rate + 1.96 * out.rate_se;
  out.r2 = fit.r2;
  if (!(out.rate > 0.0)) throw AnalysisError("autocorrelation does not decay");
  if (static_cast<double>(shortest) * spacing < 20.0 / out.rate) {
    throw AnalysisError("record too short for the fitted time constant " + format_real(1.0 / out.rate) + ": need " +
                        format_real(20.0 / out.rate) + " time units per series, have " +
                        format_real(static_cast<double>(shortest) * spacing));
  }
  out.pass = out.r2 >= opt.r2_threshold;
  return out;
}

inline MixingRate mixing_rate(std::span<const TrajectoryRecord> records, const std::string& observable,
                              const MixingOptions& opt = {}) {
  if (records.empty()) throw AnalysisError("mixing rate needs at least one record");
  std::vector<std::vector<double>> runs;
  for (const auto& r : records) runs.push_back(r.series(observable));
  const auto& t = records.front().sample_times;
  if (t.size() < 2) throw AnalysisError("record too short for a correlation estimate");
  return mixing_rate(runs, t[1] - t[0], opt);
}

// ---------------------------------------------------------------------------
// n-nondegeneracy

struct NondegeneracyOptions {
  std::size_t samples = 200;
  std::size_t tries = 64;     ///< random q' candidates per sample
  double range = 1.0;         ///< coordinates uniform on [-range, range]
  double threshold = 1e-8;    ///< on |det| / prod(row norms)
  std::uint64_t seed = 1;
};

struct NondegeneracyReport {
  std::size_t n = 0;
  std::size_t samples = 0;
  std::size_t witnesses = 0;
  double fraction = 0.0;
};

/// |det M| / prod_i |row_i|, in [0, 1] by Hadamard's inequality.
inline double hadamard_ratio(const Eigen::MatrixXd& m) {
  double norms = 1.0;
  for (Eigen::Index i = 0; i < m.rows(); ++i) norms *= m.row(i).norm();
  if (norms == 0.0) return 0.0;
  return std::abs(m.partialPivLu().determinant()) / norms;
}

/// Fraction of random q in [-range, range]^n for which some random q' gives a matrix
/// f(q'_i - q_j) with Hadamard ratio above threshold.
inline NondegeneracyReport nondegeneracy_probe(const Polynomial& f, std::size_t n, const NondegeneracyOptions& opt = {}) {
  if (n == 0) throw ConfigError("n must be >= 1");
  NondegeneracyReport rep;
  rep.n = n;
  rep.samples = opt.samples;
  RandomStream rng(opt.seed, 0x0DE6);
  auto draw = [&] { return opt.range * (2.0 * rng.uniform() - 1.0); };
  std::vector<double> q(n), qp(n);
  Eigen::MatrixXd m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t s = 0; s < opt.samples; ++s) {
    for (double& v : q) v = draw();
    for (std::size_t t = 0; t < opt.tries; ++t) {
      for (double& v : qp) v = draw();
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = f(qp[i] - q[j]);
      if (hadamard_ratio(m) > opt.threshold) {
        ++rep.witnesses;
        break;
      }
    }
  }
  rep.fraction = opt.samples ? static_cast<double>(rep.witnesses) / static_cast<double>(opt.samples) : 0.0;
  return rep;
}

/// The probe applied to f = d^2 U / dq^2 of a pair potential.
inline NondegeneracyReport nondegeneracy_probe(const PolynomialPotential& pair, std::size_t n,
                                               const NondegeneracyOptions& opt = {}) {
  return nondegeneracy_probe(pair.polynomial().derivative(2), n, opt);
}

}  // namespace ness
