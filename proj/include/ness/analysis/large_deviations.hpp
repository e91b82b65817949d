#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ness/dynamics.hpp"
#include "ness/error.hpp"
#include "ness/observables.hpp"
#include "ness/stats.hpp"

namespace ness {

/// Admissible alpha interval (-T_min/dT, 1 + T_min/dT) for a two-reservoir config; the
/// whole line at equilibrium.
inline std::pair<double, double> alpha_domain(const SystemConfig& c) {
  const double tmin = c.min_temperature(), tmax = c.max_temperature();
  if (tmax == tmin) return {-std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
  const double r = tmin / (tmax - tmin);
  return {-r, 1.0 + r};
}

/// How to produce stationary-start trajectories for ensemble statistics.
struct EnsembleSpec {
  std::size_t n_traj = 10000;
  std::uint64_t base_seed = 1;
  IntegratorSpec integrator{};
  double burn_in = 50.0;                     ///< time units discarded before t = 0
  std::optional<double> initial_temperature;  ///< for the p, r draw before burn-in; default mean T
  std::size_t workers = 1;
};

/// int_0^t sigma_j ds for every trajectory at each requested time.
struct EntropySamples {
  std::vector<double> times;
  std::vector<std::vector<double>> integrals;  ///< [time index][trajectory]
  std::size_t flow_index = 0;
  double delta_beta = 0.0;
};

/// Runs the ensemble and accumulates int sigma_j ds with the trapezoidal rule at every step.
/// Times are rounded to whole steps.
inline EntropySamples sample_entropy_integrals(const SystemConfig& c, std::size_t j, std::span<const double> t_list,
                                               const EnsembleSpec& spec) {
  if (t_list.empty()) throw ConfigError("t_list is empty");
  if (!std::is_sorted(t_list.begin(), t_list.end()) || !(t_list.front() > 0.0)) {
    throw ConfigError("t_list must be positive and increasing");
  }
  spec.integrator.validate();
  const double dt = spec.integrator.dt;
  std::vector<std::size_t> at_step;
  for (double t : t_list) at_step.push_back(static_cast<std::size_t>(std::llround(t / dt)));

  EntropySamples out;
  out.flow_index = j;
  out.delta_beta = delta_beta(c);
  for (std::size_t k : at_step) out.times.push_back(static_cast<double>(k) * dt);
  out.integrals.assign(t_list.size(), std::vector<double>(spec.n_traj));
  const FlowProbe flow(c, j);
  const double t0 = spec.initial_temperature.value_or(0.5 * (c.min_temperature() + c.max_temperature()));
  const StateSampler sampler = burn_in_sampler(c, spec.integrator, t0, spec.burn_in);
  const double db = out.delta_beta;

  for_each_index(spec.n_traj, spec.workers, [&](std::size_t i) {
    RandomStream rng(spec.base_seed, i);
    SystemState s = sampler(rng);
    Integrator integ(c, spec.integrator);
    const double cap = resolve_energy_cap(c, spec.integrator, s);
    double integral = 0.0, prev = db * flow(s);
    std::size_t next = 0;
    for (std::size_t k = 1; k <= at_step.back(); ++k) {
      integ.advance(s, rng);
      integ.check(s, k % 64 == 0 ? std::optional<double>(cap) : std::nullopt);
      const double cur = db * flow(s);
      integral += 0.5 * dt * (prev + cur);
      prev = cur;
      while (next < at_step.size() && at_step[next] == k) out.integrals[next++][i] = integral;
    }
  });
  return out;
}

struct CumulantPoint {
  double alpha = 0.0;
  double e = 0.0;       ///< slope of -log Gamma(t) against t
  double se = 0.0;      ///< bootstrap standard error
  double ci_lo = 0.0;   ///< 95% percentile interval
  double ci_hi = 0.0;
  double n_eff = 0.0;   ///< smallest effective sample size over the times
  bool usable = true;   ///< n_eff >= floor
  std::vector<double> minus_log_gamma;  ///< -log Gamma_hat(t) per time
  double fit_r2 = 1.0;
};

struct CumulantCurve {
  std::vector<CumulantPoint> points;
  std::vector<double> times;
  double domain_lo = 0.0;
  double domain_hi = 0.0;
  std::size_t n_traj = 0;
  double n_eff_floor = 30.0;

  const CumulantPoint& at(double alpha, double tol = 1e-9) const {
    for (const auto& p : points)
      if (std::abs(p.alpha - alpha) <= tol) return p;
    throw AnalysisError("alpha " + std::to_string(alpha) + " not on the cumulant grid");
  }
};

struct CumulantOptions {
  double n_eff_floor = 30.0;
  std::size_t bootstrap = 200;
  std::uint64_t seed = 7;
  /// Admissible interval; alphas outside are rejected. Defaults to the whole line.
  double domain_lo = -std::numeric_limits<double>::infinity();
  double domain_hi = std::numeric_limits<double>::infinity();
};

namespace detail {

inline double minus_log_gamma(std::span<const double> integrals, double alpha, std::span<const std::size_t> idx,
                              std::vector<double>& scratch) {
  scratch.resize(idx.size());
  for (std::size_t k = 0; k < idx.size(); ++k) scratch[k] = -alpha * integrals[idx[k]];
  return -stats::log_mean_exp(scratch);
}

inline double cumulant_slope(std::span<const double> times, std::span<const double> mlg) {
  if (times.size() == 1) return mlg[0] / times[0];
  return stats::ols(times, mlg).slope;
}

}  // namespace detail

/// e(alpha) from ensemble samples: slope of -log Gamma_hat(t, alpha) over the sampled times,
/// which removes the O(1) initial-state term. Bootstrap resamples trajectories jointly
/// across times.
inline CumulantCurve cumulant_curve(const EntropySamples& samples, std::span<const double> alphas,
                                    const CumulantOptions& opt = {}) {
  for (double a : alphas) {
    if (!(a > opt.domain_lo && a < opt.domain_hi)) {
      throw ConfigError("alpha " + format_real(a) + " outside the admissible interval (" + format_real(opt.domain_lo) +
                        ", " + format_real(opt.domain_hi) + ")");
    }
  }
  const std::size_t n = samples.integrals.empty() ? 0 : samples.integrals.front().size();
  if (n < 2) throw AnalysisError("cumulant estimation needs at least two trajectories");
  CumulantCurve curve;
  curve.times = samples.times;
  curve.domain_lo = opt.domain_lo;
  curve.domain_hi = opt.domain_hi;
  curve.n_traj = n;
  curve.n_eff_floor = opt.n_eff_floor;

  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), std::size_t{0});
  std::vector<double> scratch;
  const std::size_t nt = samples.times.size();
  for (double alpha : alphas) {
    CumulantPoint pt;
    pt.alpha = alpha;
    pt.n_eff = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < nt; ++k) {
      pt.minus_log_gamma.push_back(detail::minus_log_gamma(samples.integrals[k], alpha, all, scratch));
      for (std::size_t i = 0; i < n; ++i) scratch[i] = -alpha * samples.integrals[k][i];
      pt.n_eff = std::min(pt.n_eff, stats::effective_sample_size(scratch));
    }
    pt.e = detail::cumulant_slope(samples.times, pt.minus_log_gamma);
    if (nt > 2) pt.fit_r2 = stats::ols(samples.times, pt.minus_log_gamma).r2;
    pt.usable = pt.n_eff >= opt.n_eff_floor;
    curve.points.push_back(std::move(pt));
  }

  if (opt.bootstrap >= 2) {
    stats::Bootstrap boot(opt.seed, n);
    std::vector<std::size_t> idx;
    std::vector<std::vector<double>> draws(curve.points.size());
    std::vector<double> mlg(nt);
    for (std::size_t b = 0; b < opt.bootstrap; ++b) {
      boot.resample(idx);
      for (std::size_t a = 0; a < curve.points.size(); ++a) {
        for (std::size_t k = 0; k < nt; ++k) {
          mlg[k] = detail::minus_log_gamma(samples.integrals[k], curve.points[a].alpha, idx, scratch);
        }
        draws[a].push_back(detail::cumulant_slope(samples.times, mlg));
      }
    }
    for (std::size_t a = 0; a < curve.points.size(); ++a) {
      auto& pt = curve.points[a];
      pt.se = std::sqrt(stats::variance(draws[a]));
      pt.ci_lo = stats::quantile(draws[a], 0.025);
      pt.ci_hi = stats::quantile(draws[a], 0.975);
    }
  }
  return curve;
}

/// Full pipeline: stationary-start ensemble, int sigma_j, cumulant curve with the admissible
/// interval of the config.
inline CumulantCurve mgf_cumulant(const SystemConfig& c, std::span<const double> alphas, std::span<const double> t_list,
                                  std::size_t flow_index, const EnsembleSpec& spec, CumulantOptions opt = {}) {
  const auto [lo, hi] = alpha_domain(c);
  opt.domain_lo = lo;
  opt.domain_hi = hi;
  for (double a : alphas) {
    if (!(a > lo && a < hi)) {
      throw ConfigError("alpha " + format_real(a) + " outside the admissible interval (" + format_real(lo) + ", " +
                        format_real(hi) + ")");
    }
  }
  if (c.equilibrium()) {
    // sigma vanishes identically: Gamma = 1 and e = 0 without sampling
    CumulantCurve curve;
    curve.times.assign(t_list.begin(), t_list.end());
    curve.domain_lo = lo;
    curve.domain_hi = hi;
    curve.n_traj = spec.n_traj;
    curve.n_eff_floor = opt.n_eff_floor;
    for (double a : alphas) {
      CumulantPoint pt;
      pt.alpha = a;
      pt.n_eff = static_cast<double>(spec.n_traj);
      pt.minus_log_gamma.assign(t_list.size(), 0.0);
      curve.points.push_back(std::move(pt));
    }
    return curve;
  }
  return cumulant_curve(sample_entropy_integrals(c, flow_index, t_list, spec), alphas, opt);
}

// ---------------------------------------------------------------------------
// Legendre transform

struct RatePoint {
  double w = 0.0;
  double value = 0.0;       ///< max over the grid of e(alpha) - alpha w
  double argmax_alpha = 0.0;
  bool interior = false;    ///< maximizer strictly inside the alpha grid; otherwise a lower bound
};

struct RateFunction {
  std::vector<RatePoint> points;
  std::vector<double> alphas;
  std::vector<double> e_smoothed;  ///< concave-adjusted cumulant values used for the transform
  double max_adjustment = 0.0;     ///< largest |e - e_smoothed|
  bool convex = true;              ///< rate values convex on the w grid

  const RatePoint& at(double w, double tol = 1e-9) const {
    for (const auto& p : points)
      if (std::abs(p.w - w) <= tol) return p;
    throw AnalysisError("w " + std::to_string(w) + " not on the rate grid");
  }
};

/// Rate function I(w) = sup_alpha (e(alpha) - alpha w).
///
/// Sign convention: Gamma(t, alpha) = E exp(-alpha S_t) ~ exp(-t e(alpha)) with S_t = t w gives,
/// by Laplace's method, e(alpha) = inf_w (I(w) + alpha w), whose inverse is the form above.
/// With it, e(alpha) = e(1 - alpha) is equivalent to I(w) - I(-w) = -w.
///
/// e is concave, so its secant slopes must be non-increasing; they are projected onto that
/// cone by isotonic regression, and the transform fails if the projection moves any value
/// by more than `tolerance`. Points whose maximizer sits on the grid edge are labelled as
/// lower bounds (the true supremum may lie outside the sampled alpha range).
inline RateFunction legendre_rate(std::span<const double> alphas, std::span<const double> e,
                                  std::span<const double> w_grid, double tolerance) {
  const std::size_t m = alphas.size();
  if (m != e.size() || m < 2) throw AnalysisError("Legendre transform needs at least two cumulant points");
  if (!std::is_sorted(alphas.begin(), alphas.end())) throw AnalysisError("alpha grid must be increasing");
  RateFunction rf;
  rf.alphas.assign(alphas.begin(), alphas.end());

  std::vector<double> slopes(m - 1), widths(m - 1);
  for (std::size_t k = 0; k + 1 < m; ++k) {
    widths[k] = alphas[k + 1] - alphas[k];
    slopes[k] = (e[k + 1] - e[k]) / widths[k];
  }
  const auto fitted = stats::isotonic_decreasing(slopes, widths);
  std::vector<double> rebuilt(m, 0.0);
  for (std::size_t k = 0; k + 1 < m; ++k) rebuilt[k + 1] = rebuilt[k] + fitted[k] * widths[k];
  // anchor: keep e(0) = 0 exactly when alpha = 0 is on the grid, else least-squares shift
  double shift = 0.0;
  const auto zero = std::find_if(alphas.begin(), alphas.end(), [](double a) { return std::abs(a) < 1e-12; });
  if (zero != alphas.end()) {
    const auto z = static_cast<std::size_t>(zero - alphas.begin());
    shift = e[z] - rebuilt[z];
  } else {
    for (std::size_t k = 0; k < m; ++k) shift += (e[k] - rebuilt[k]) / static_cast<double>(m);
  }
  rf.e_smoothed.resize(m);
  for (std::size_t k = 0; k < m; ++k) {
    rf.e_smoothed[k] = rebuilt[k] + shift;
    rf.max_adjustment = std::max(rf.max_adjustment, std::abs(rf.e_smoothed[k] - e[k]));
  }
  if (rf.max_adjustment > tolerance) {
    throw AnalysisError("cumulant curve is not concave within tolerance: adjustment " + format_real(rf.max_adjustment) +
                        " > " + format_real(tolerance));
  }

  for (double w : w_grid) {
    RatePoint pt;
    pt.w = w;
    pt.value = -std::numeric_limits<double>::infinity();
    std::size_t arg = 0;
    for (std::size_t k = 0; k < m; ++k) {
      const double v = rf.e_smoothed[k] - alphas[k] * w;
      if (v > pt.value) {
        pt.value = v;
        arg = k;
      }
    }
    pt.argmax_alpha = alphas[arg];
    pt.interior = arg > 0 && arg + 1 < m;
    rf.points.push_back(pt);
  }
  for (std::size_t k = 1; k + 1 < rf.points.size(); ++k) {
    const double h1 = rf.points[k].w - rf.points[k - 1].w, h2 = rf.points[k + 1].w - rf.points[k].w;
    const double second = (rf.points[k + 1].value - rf.points[k].value) / h2 - (rf.points[k].value - rf.points[k - 1].value) / h1;
    if (second < -1e-9 * (1.0 + std::abs(rf.points[k].value))) rf.convex = false;
  }
  return rf;
}

/// Transform of the usable points of a curve. Default tolerance: 3 x the largest standard error.
inline RateFunction legendre_rate(const CumulantCurve& curve, std::span<const double> w_grid,
                                  std::optional<double> tolerance = std::nullopt) {
  std::vector<double> a, e;
  double se_max = 0.0;
  for (const auto& p : curve.points) {
    if (!p.usable) continue;
    a.push_back(p.alpha);
    e.push_back(p.e);
    se_max = std::max(se_max, p.se);
  }
  std::vector<std::size_t> order(a.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return a[i] < a[j]; });
  std::vector<double> as, es;
  for (std::size_t i : order) {
    as.push_back(a[i]);
    es.push_back(e[i]);
  }
  return legendre_rate(as, es, w_grid, tolerance.value_or(std::max(3.0 * se_max, 1e-12)));
}

/// Inverse transform e(alpha) = min over the w grid of I(w) + alpha w.
inline double legendre_inverse(const RateFunction& rf, double alpha) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& p : rf.points) best = std::min(best, p.value + alpha * p.w);
  return best;
}

// ---------------------------------------------------------------------------

struct SymmetryPair {
  double alpha = 0.0;
  double partner = 0.0;      ///< 1 - alpha
  double deviation = 0.0;    ///< e(alpha) - e(1 - alpha)
  double combined_se = 0.0;  ///< sqrt(se_a^2 + se_b^2)
  double z = 0.0;            ///< |deviation| / combined_se (0 when both vanish)
  bool usable = false;
  bool pass = false;
};

struct SymmetryReport {
  std::vector<SymmetryPair> pairs;
  double max_deviation = 0.0;
  double max_z = 0.0;
  std::size_t usable_pairs = 0;
  double n_sigma = 3.0;
  bool pass = false;  ///< every usable pair within n_sigma combined s.e. and at least one usable pair
};

/// Checks e(alpha) = e(1 - alpha) across a grid symmetric about 1/2.
inline SymmetryReport gc_symmetry_check(const CumulantCurve& curve, double n_sigma = 3.0, double abs_tol = 0.0) {
  SymmetryReport rep;
  rep.n_sigma = n_sigma;
  for (const auto& p : curve.points) {
    const auto partner = std::find_if(curve.points.begin(), curve.points.end(),
                                      [&](const CumulantPoint& q) { return std::abs(q.alpha - (1.0 - p.alpha)) < 1e-9; });
    if (partner == curve.points.end()) {
      throw AnalysisError("alpha grid is not symmetric about 1/2: no partner for " + format_real(p.alpha));
    }
    if (p.alpha > partner->alpha + 1e-12) continue;  // each pair once; alpha = 1/2 pairs with itself
    SymmetryPair sp;
    sp.alpha = p.alpha;
    sp.partner = partner->alpha;
    sp.deviation = &p == &*partner ? 0.0 : p.e - partner->e;
    sp.combined_se = &p == &*partner ? 0.0 : std::hypot(p.se, partner->se);
    sp.z = sp.combined_se > 0.0 ? std::abs(sp.deviation) / sp.combined_se : 0.0;
    sp.usable = p.usable && partner->usable;
    sp.pass = std::abs(sp.deviation) <= n_sigma * sp.combined_se + abs_tol;
    if (sp.usable) {
      ++rep.usable_pairs;
      rep.max_deviation = std::max(rep.max_deviation, std::abs(sp.deviation));
      rep.max_z = std::max(rep.max_z, sp.z);
    }
    rep.pairs.push_back(sp);
  }
  rep.pass = rep.usable_pairs > 0 &&
             std::all_of(rep.pairs.begin(), rep.pairs.end(), [](const SymmetryPair& s) { return !s.usable || s.pass; });
  return rep;
}

}  // namespace ness
