#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ness/error.hpp"
#include "ness/record.hpp"
#include "ness/stats.hpp"

namespace ness {

struct ObservableEstimate {
  std::string name;
  double mean = 0.0;
  double se = 0.0;            ///< batch-means standard error
  double tau_int = 0.0;       ///< integrated autocorrelation time, in time units
  std::size_t samples = 0;    ///< samples used (after burn-in, all runs)
  std::size_t burn_in = 0;    ///< samples dropped per run
  std::size_t batches = 0;
  bool mixing_warning = false;  ///< batches shorter than the autocorrelation time, or its window unconverged
};

struct SteadyStateReport {
  std::vector<ObservableEstimate> entries;
  double burn_in_fraction = 0.0;
  std::size_t batch_count = 0;
  bool mixing_warning = false;

  const ObservableEstimate& at(const std::string& name) const {
    for (const auto& e : entries)
      if (e.name == name) return e;
    throw AnalysisError("steady-state report has no entry '" + name + "'");
  }
};

/// Batch-means estimate of a stationary mean from one or more independent runs, each
/// sampled every `sample_dt`. Every run contributes `batch_count` batches after dropping
/// its leading burn_in_fraction.
inline ObservableEstimate estimate_mean(const std::string& name, std::span<const std::vector<double>> runs,
                                        double sample_dt, double burn_in_fraction = 0.1,
                                        std::size_t batch_count = 20) {
  if (runs.empty()) throw AnalysisError("no runs for '" + name + "'");
  if (!(burn_in_fraction >= 0.0 && burn_in_fraction < 1.0)) throw ConfigError("burn_in_fraction must be in [0, 1)");
  ObservableEstimate est;
  est.name = name;
  std::vector<double> batch_means;
  double tau_sum = 0.0;
  for (const auto& run : runs) {
    const auto burn = static_cast<std::size_t>(burn_in_fraction * static_cast<double>(run.size()));
    const std::span<const double> tail(run.data() + burn, run.size() - burn);
    if (tail.size() < 2 * batch_count) {
      throw AnalysisError("record too short for '" + name + "': " + std::to_string(tail.size()) +
                          " samples after burn-in, need " + std::to_string(2 * batch_count));
    }
    const std::size_t len = tail.size() / batch_count;
    for (std::size_t b = 0; b < batch_count; ++b) batch_means.push_back(stats::mean(tail.subspan(b * len, len)));
    const auto tau = stats::integrated_autocorrelation_time(tail);
    tau_sum += tau.tau;
    if (!tau.converged || static_cast<double>(batch_count) * tau.tau > static_cast<double>(tail.size())) {
      est.mixing_warning = true;
    }
    est.burn_in = burn;
    est.samples += tail.size();
  }
  est.batches = batch_means.size();
  est.mean = stats::mean(batch_means);
  est.se = std::sqrt(stats::variance(batch_means) / static_cast<double>(batch_means.size()));
  est.tau_int = tau_sum / static_cast<double>(runs.size()) * sample_dt;
  return est;
}

/// Stationary means of the named observables (all recorded ones if `names` is empty).
inline SteadyStateReport steady_state(std::span<const TrajectoryRecord> records, double burn_in_fraction = 0.1,
                                      std::size_t batch_count = 20, const std::vector<std::string>& names = {}) {
  if (records.empty()) throw AnalysisError("steady_state needs at least one record");
  SteadyStateReport rep;
  rep.burn_in_fraction = burn_in_fraction;
  rep.batch_count = batch_count;
  const auto& chosen = names.empty() ? records.front().names : names;
  const auto& t = records.front().sample_times;
  const double sample_dt = t.size() > 1 ? t[1] - t[0] : 0.0;
  for (const auto& name : chosen) {
    std::vector<std::vector<double>> runs;
    for (const auto& r : records) runs.push_back(r.series(name));
    rep.entries.push_back(estimate_mean(name, runs, sample_dt, burn_in_fraction, batch_count));
    rep.mixing_warning = rep.mixing_warning || rep.entries.back().mixing_warning;
  }
  return rep;
}

inline SteadyStateReport steady_state(const TrajectoryRecord& record, double burn_in_fraction = 0.1,
                                      std::size_t batch_count = 20, const std::vector<std::string>& names = {}) {
  return steady_state(std::span<const TrajectoryRecord>(&record, 1), burn_in_fraction, batch_count, names);
}

}  // namespace ness
