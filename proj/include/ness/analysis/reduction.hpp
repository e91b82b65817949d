#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "ness/analysis/steady_state.hpp"
#include "ness/dynamics.hpp"
#include "ness/rng.hpp"

namespace ness {

struct ReductionSpec {
  double dt = 0.01;
  double horizon = 2000.0;
  std::size_t n_traj = 8;
  std::size_t stride = 10;
  double burn_in_fraction = 0.1;
  std::size_t batch_count = 20;
  double n_sigma = 3.0;
  std::uint64_t seed = 1;
  std::size_t workers = 1;
};

struct MomentRow {
  std::string moment;  ///< "p", "q", "p^2", "q^2", "pq"
  ObservableEstimate memory;    ///< from the integro-differential form
  ObservableEstimate extended;  ///< from the Markovian (p, q, r) system
  double z = 0.0;
  bool pass = false;
};

struct ReductionReport {
  std::vector<MomentRow> rows;
  double max_z = 0.0;
  bool pass = false;
};

namespace detail {

/// p, q, p^2, q^2, pq series for each run.
inline std::vector<std::vector<std::vector<double>>> moment_series(const std::vector<std::vector<double>>& ps,
                                                                   const std::vector<std::vector<double>>& qs) {
  std::vector<std::vector<std::vector<double>>> out(5);
  for (std::size_t k = 0; k < ps.size(); ++k) {
    const auto& p = ps[k];
    const auto& q = qs[k];
    std::vector<double> pp(p.size()), qq(p.size()), pq(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
      pp[i] = p[i] * p[i];
      qq[i] = q[i] * q[i];
      pq[i] = p[i] * q[i];
    }
    out[0].push_back(p);
    out[1].push_back(q);
    out[2].push_back(std::move(pp));
    out[3].push_back(std::move(qq));
    out[4].push_back(std::move(pq));
  }
  return out;
}

}  // namespace detail

/// Stationary first and second moments of (p, q) from simulate_gle against the same
/// moments of the extended Markovian system; each pair must agree within n_sigma
/// combined standard errors. Both sides start at rest; the burn-in fraction is dropped.
inline ReductionReport compare_reduction(const GLEConfig& g, const ReductionSpec& spec) {
  if (spec.n_traj == 0) throw ConfigError("n_traj must be >= 1");
  std::vector<std::vector<double>> gp(spec.n_traj), gq(spec.n_traj);
  for_each_index(spec.n_traj, spec.workers, [&](std::size_t i) {
    const auto rec = simulate_gle(g, 0.0, 0.0, spec.dt, spec.horizon, mix_seed(spec.seed, i + 1), spec.stride);
    gp[i] = rec.series("p");
    gq[i] = rec.series("q");
  });

  const SystemConfig ext = g.extended_system();
  const IntegratorSpec is{Scheme::splitting, spec.dt, std::nullopt};
  const auto recs = simulate_ensemble(ext, fixed_state(SystemState::zeros(ext)), is, spec.horizon, spec.n_traj,
                                      mix_seed(spec.seed, 0), {"p_1", "q_1"}, spec.stride, spec.workers);
  std::vector<std::vector<double>> ep, eq;
  for (const auto& r : recs) {
    ep.push_back(r.series("p_1"));
    eq.push_back(r.series("q_1"));
  }

  const auto a = detail::moment_series(gp, gq);
  const auto b = detail::moment_series(ep, eq);
  const double sample_dt = spec.dt * static_cast<double>(spec.stride);
  static const char* names[] = {"p", "q", "p^2", "q^2", "pq"};
  ReductionReport rep;
  rep.pass = true;
  for (std::size_t m = 0; m < 5; ++m) {
    MomentRow row;
    row.moment = names[m];
    row.memory = estimate_mean(row.moment, a[m], sample_dt, spec.burn_in_fraction, spec.batch_count);
    row.extended = estimate_mean(row.moment, b[m], sample_dt, spec.burn_in_fraction, spec.batch_count);
    const double se = std::hypot(row.memory.se, row.extended.se);
    const double diff = std::abs(row.memory.mean - row.extended.mean);
    row.z = se > 0.0 ? diff / se : (diff == 0.0 ? 0.0 : INFINITY);
    row.pass = row.z <= spec.n_sigma;
    rep.max_z = std::max(rep.max_z, row.z);
    rep.pass = rep.pass && row.pass;
    rep.rows.push_back(std::move(row));
  }
  return rep;
}

}  // namespace ness
