#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "ness/analysis/large_deviations.hpp"
#include "ness/linear_oracle.hpp"
#include "ness/stats.hpp"

namespace ness {

struct CorrelationOptions {
  double max_lag_time = 50.0;
  double band_sigma = 2.0;       ///< half-width of the confidence band in standard errors
  std::size_t persistence = 5;   ///< consecutive lags inside the band that end the window
};

struct CorrelationIntegral {
  std::vector<double> lags;  ///< in time units
  std::vector<double> acf;   ///< mean over segments of <Phi(t) Phi(0)>
  std::vector<double> acf_se;
  std::size_t cutoff = 0;    ///< last lag index included in the integral
  double integral = 0.0;     ///< trapezoid over [0, lags[cutoff]]
  double se = 0.0;           ///< from the spread of per-segment integrals
  bool converged = false;    ///< band reached zero persistently before max_lag_time
  std::size_t segments = 0;
  double baseline_mean = 0.0;  ///< mean flux over all samples
  double baseline_se = 0.0;    ///< across segments
};

/// Integral of the equilibrium flux autocorrelation from independent zero-mean segments
/// sampled every `spacing`. The window closes at the first lag from which the band
/// mean +/- band_sigma * se contains 0 for `persistence` consecutive lags.
inline CorrelationIntegral correlation_integral(std::span<const std::vector<double>> segments, double spacing,
                                               const CorrelationOptions& opt = {}) {
  if (segments.size() < 2) throw AnalysisError("correlation integral needs at least two independent segments");
  if (!(spacing > 0.0)) throw ConfigError("sample spacing must be positive");
  std::size_t shortest = segments.front().size();
  for (const auto& s : segments) shortest = std::min(shortest, s.size());
  const auto wanted = static_cast<std::size_t>(std::ceil(opt.max_lag_time / spacing));
  const std::size_t max_lag = std::min(wanted, shortest / 2);
  if (max_lag < opt.persistence + 1) throw AnalysisError("segments too short for the correlation window");

  const std::size_t m = segments.size();
  std::vector<std::vector<double>> per(m);
  std::vector<double> seg_means(m);
  for (std::size_t i = 0; i < m; ++i) {
    per[i] = stats::lagged_products(segments[i], max_lag);
    seg_means[i] = stats::mean(segments[i]);
  }
  CorrelationIntegral out;
  out.segments = m;
  out.baseline_mean = stats::mean(seg_means);
  out.baseline_se = std::sqrt(stats::variance(seg_means) / static_cast<double>(m));
  std::vector<double> column(m);
  for (std::size_t k = 0; k <= max_lag; ++k) {
    for (std::size_t i = 0; i < m; ++i) column[i] = per[i][k];
    out.lags.push_back(static_cast<double>(k) * spacing);
    out.acf.push_back(stats::mean(column));
    out.acf_se.push_back(std::sqrt(stats::variance(column) / static_cast<double>(m)));
  }

  out.cutoff = max_lag;
  std::size_t run = 0;
  for (std::size_t k = 1; k <= max_lag; ++k) {
    run = std::abs(out.acf[k]) <= opt.band_sigma * out.acf_se[k] ? run + 1 : 0;
    if (run == opt.persistence) {
      out.cutoff = k - opt.persistence + 1;
      out.converged = true;
      break;
    }
  }
  auto trapezoid = [&](const std::vector<double>& c) {
    double s = 0.5 * (c[0] + c[out.cutoff]);
    for (std::size_t k = 1; k < out.cutoff; ++k) s += c[k];
    return s * spacing;
  };
  out.integral = trapezoid(out.acf);
  for (std::size_t i = 0; i < m; ++i) column[i] = trapezoid(per[i]);
  out.se = std::sqrt(stats::variance(column) / static_cast<double>(m));
  return out;
}

struct FluxResponse {
  std::vector<double> probes;  ///< Delta-beta values
  std::vector<double> means;   ///< steady-state mean flux at each probe
  std::vector<double> ses;
  double slope = 0.0;          ///< d<Phi_j>/d(Delta-beta)
  double slope_se = 0.0;
  double intercept = 0.0;
};

namespace detail {

/// (T_L, T_R) with beta_L = beta0 - db/2 and beta_R = beta0 + db/2.
inline SystemConfig probe_config(const SystemConfig& eq, double db) {
  const double beta0 = 1.0 / eq.reservoirs()[0].temperature;
  const double bl = beta0 - 0.5 * db, br = beta0 + 0.5 * db;
  if (!(bl > 0.0 && br > 0.0)) {
    throw ConfigError("Delta-beta probe " + format_real(db) + " leaves the positive-temperature range");
  }
  const std::vector<double> t{1.0 / bl, 1.0 / br};
  return eq.with_temperatures(t);
}

inline void require_equilibrium_pair(const SystemConfig& c) {
  if (c.reservoirs().size() != 2) throw ConfigError("Green-Kubo analysis needs exactly two reservoirs");
  if (!c.equilibrium() || !(c.min_temperature() > 0.0)) {
    throw ConfigError("Green-Kubo analysis needs an equilibrium config at positive temperature");
  }
}

inline FluxResponse fit_response(std::vector<double> probes, std::vector<double> means, std::vector<double> ses) {
  FluxResponse r;
  r.probes = std::move(probes);
  r.means = std::move(means);
  r.ses = std::move(ses);
  if (r.probes.size() < 2) throw ConfigError("response needs at least two Delta-beta probes");
  const bool weighted = std::all_of(r.ses.begin(), r.ses.end(), [](double s) { return s > 0.0; });
  const auto fit = weighted ? stats::wls(r.probes, r.means, r.ses) : stats::ols(r.probes, r.means);
  r.slope = fit.slope;
  r.slope_se = fit.slope_se;
  r.intercept = fit.intercept;
  return r;
}

}  // namespace detail

/// Exact mean-flux response of a linear config, from the Lyapunov covariance at each probe.
inline FluxResponse oracle_response(const SystemConfig& eq, std::size_t j, std::span<const double> probes) {
  detail::require_equilibrium_pair(eq);
  std::vector<double> means;
  for (double db : probes) {
    const SystemConfig c = detail::probe_config(eq, db);
    means.push_back(exact_flux(stationary_covariance(assemble_linear(c)), c, j));
  }
  return detail::fit_response({probes.begin(), probes.end()}, std::move(means),
                              std::vector<double>(probes.size(), 0.0));
}

/// Steady-state mean flux at each probe from time averages over `horizon` (after burn-in),
/// one estimate per trajectory; slope by weighted least squares.
inline FluxResponse flux_response(const SystemConfig& eq, std::size_t j, std::span<const double> probes, double horizon,
                                  const EnsembleSpec& spec) {
  detail::require_equilibrium_pair(eq);
  if (spec.n_traj < 2) throw ConfigError("flux response needs at least two trajectories per probe");
  spec.integrator.validate();
  const std::size_t steps = step_count(horizon, spec.integrator.dt);
  if (steps == 0) throw ConfigError("response horizon must be positive");
  std::vector<double> means, ses;
  for (std::size_t pi = 0; pi < probes.size(); ++pi) {
    const SystemConfig c = detail::probe_config(eq, probes[pi]);
    const FlowProbe flow(c, j);
    const double t0 = spec.initial_temperature.value_or(0.5 * (c.min_temperature() + c.max_temperature()));
    const StateSampler sampler = burn_in_sampler(c, spec.integrator, t0, spec.burn_in);
    const std::uint64_t seed = mix_seed(spec.base_seed, pi + 1);
    std::vector<double> avg(spec.n_traj);
    for_each_index(spec.n_traj, spec.workers, [&](std::size_t i) {
      RandomStream rng(seed, i);
      SystemState s = sampler(rng);
      Integrator integ(c, spec.integrator);
      const double cap = resolve_energy_cap(c, spec.integrator, s);
      double sum = 0.5 * flow(s);
      for (std::size_t k = 1; k <= steps; ++k) {
        integ.advance(s, rng);
        integ.check(s, k % 64 == 0 ? std::optional<double>(cap) : std::nullopt);
        sum += k == steps ? 0.5 * flow(s) : flow(s);
      }
      avg[i] = sum / static_cast<double>(steps);
    });
    means.push_back(stats::mean(avg));
    ses.push_back(std::sqrt(stats::variance(avg) / static_cast<double>(avg.size())));
  }
  return detail::fit_response({probes.begin(), probes.end()}, std::move(means), std::move(ses));
}

/// Equilibrium Phi_j series, one per trajectory, sampled every `stride` steps.
inline std::vector<std::vector<double>> equilibrium_flux_segments(const SystemConfig& eq, std::size_t j,
                                                                  double horizon, std::size_t stride,
                                                                  const EnsembleSpec& spec) {
  detail::require_equilibrium_pair(eq);
  if (stride == 0) throw ConfigError("sample stride must be >= 1");
  spec.integrator.validate();
  const std::size_t steps = step_count(horizon, spec.integrator.dt);
  const FlowProbe flow(eq, j);
  const StateSampler sampler =
      burn_in_sampler(eq, spec.integrator, spec.initial_temperature.value_or(eq.min_temperature()), spec.burn_in);
  std::vector<std::vector<double>> out(spec.n_traj);
  for_each_index(spec.n_traj, spec.workers, [&](std::size_t i) {
    RandomStream rng(spec.base_seed, i);
    SystemState s = sampler(rng);
    Integrator integ(eq, spec.integrator);
    const double cap = resolve_energy_cap(eq, spec.integrator, s);
    auto& series = out[i];
    series.reserve(steps / stride + 1);
    series.push_back(flow(s));
    for (std::size_t k = 1; k <= steps; ++k) {
      integ.advance(s, rng);
      integ.check(s, k % 64 == 0 ? std::optional<double>(cap) : std::nullopt);
      if (k % stride == 0) series.push_back(flow(s));
    }
  });
  return out;
}

struct GreenKuboSpec {
  EnsembleSpec correlation{};
  double correlation_horizon = 500.0;
  std::size_t stride = 10;
  CorrelationOptions window{};
  EnsembleSpec response{};
  double response_horizon = 500.0;
  std::vector<double> probes{-0.1, 0.1};
  double tolerance = 0.15;  ///< allowed |ratio - 1|
  double bar_sigma = 2.0;   ///< error-bar half-width in standard errors for the overlap test
};

struct GreenKuboReport {
  CorrelationIntegral correlation;
  FluxResponse response;
  double ratio = 0.0;     ///< response slope / correlation integral
  double ratio_se = 0.0;  ///< first-order propagation of both errors
  bool overlap = false;   ///< error bars of the two sides intersect
  bool pass = false;      ///< |ratio - 1| <= tolerance, bars overlap, window converged
};

/// Both sides of d<Phi_j>/d(Delta-beta) at Delta-beta = 0: the integral of the equilibrium
/// autocorrelation over [0, inf), and the finite-difference response of the mean flux
/// across Delta-beta probes at fixed mean beta.
inline GreenKuboReport green_kubo(const SystemConfig& eq, std::size_t j, const GreenKuboSpec& spec) {
  detail::require_equilibrium_pair(eq);
  GreenKuboReport rep;
  const auto segments = equilibrium_flux_segments(eq, j, spec.correlation_horizon, spec.stride, spec.correlation);
  rep.correlation =
      correlation_integral(segments, static_cast<double>(spec.stride) * spec.correlation.integrator.dt, spec.window);
  rep.response = flux_response(eq, j, spec.probes, spec.response_horizon, spec.response);
  const double a = rep.response.slope, b = rep.correlation.integral;
  if (b == 0.0) throw AnalysisError("correlation integral vanished; ratio undefined");
  rep.ratio = a / b;
  rep.ratio_se = std::abs(rep.ratio) * std::hypot(rep.response.slope_se / a, rep.correlation.se / b);
  rep.overlap = std::abs(a - b) <= spec.bar_sigma * (rep.response.slope_se + rep.correlation.se);
  rep.pass = std::abs(rep.ratio - 1.0) <= spec.tolerance && rep.overlap && rep.correlation.converged;
  return rep;
}

}  // namespace ness
