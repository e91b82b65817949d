#pragma once

// Command implementations for the `ness` driver. Every command turns a parsed
// ExperimentConfig into in-memory artifacts; main() writes them and `verify` re-runs
// and compares byte for byte.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ness/analysis.hpp"
#include "ness/assumptions.hpp"
#include "ness/dynamics.hpp"
#include "ness/io/config.hpp"
#include "ness/io/report.hpp"
#include "ness/linear_oracle.hpp"
#include "ness/observables.hpp"

namespace ness::cli {

using io::Json;

enum ExitCode { kOk = 0, kAnalysisFail = 1, kConfigError = 2, kRuntimeFault = 3 };

struct Artifact {
  std::string name;
  std::string content;
};

struct CommandResult {
  std::vector<Artifact> files;
  bool pass = true;
  std::vector<std::string> warnings;
};

struct RunOptions {
  bool raw = false;
  bool strict = false;
};

// ---------------------------------------------------------------------------
// helpers

inline Json matrix_json(const Eigen::MatrixXd& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

inline bool quadratic(const io::ModelBlock& m) {
  return Polynomial(m.onsite).degree() <= 2 && Polynomial(m.pair).degree() <= 2;
}

inline Json estimate_json(const ObservableEstimate& e) {
  return {{"name", e.name},       {"mean", e.mean},       {"se", e.se},
          {"tau_int", e.tau_int}, {"samples", e.samples}, {"batches", e.batches},
          {"mixing_warning", e.mixing_warning}};
}

inline std::vector<std::string> default_observers(const SystemConfig& c) {
  std::vector<std::string> names{"H"};
  if (c.topology().layered() && c.reservoirs().size() == 2) {
    for (std::size_t j = 0; j <= c.topology().layer_count(); ++j) names.push_back("Phi_" + std::to_string(j));
  } else {
    names.push_back("sigma");
  }
  return names;
}

inline StateSampler initial_sampler(const io::ExperimentConfig& cfg, const SystemConfig& c, const IntegratorSpec& is) {
  const auto& run = cfg.run;
  if (run.burn_in > 0.0 || run.initial_temperature) {
    const double t0 = run.initial_temperature.value_or(0.5 * (c.min_temperature() + c.max_temperature()));
    return burn_in_sampler(c, is, t0, run.burn_in);
  }
  return fixed_state(SystemState::zeros(c));
}

inline EnsembleSpec ensemble_spec(const io::ExperimentConfig& cfg, const IntegratorSpec& is, std::size_t n_traj) {
  EnsembleSpec s;
  s.n_traj = n_traj;
  s.base_seed = cfg.run.seed;
  s.integrator = is;
  s.burn_in = cfg.run.burn_in;
  s.initial_temperature = cfg.run.initial_temperature;
  s.workers = cfg.run.workers;
  return s;
}

/// Probe step for the zero-noise and shell analyses when the config leaves dt open.
inline double probe_dt(const io::ExperimentConfig& cfg) { return cfg.dt_explicit ? cfg.integrator.dt : 1e-3; }

class Emitter {
 public:
  Emitter(const std::string& command, const io::ExperimentConfig& cfg, RunOptions opt)
      : command_(command), cfg_(cfg), opt_(opt), report_(io::envelope(command, cfg)) {}

  /// Adds a CSV artifact (if csv output is enabled) stamped with the provenance line.
  void csv(const std::string& name, const std::string& body, bool always = false) {
    if (!always && !cfg_.output.wants("csv")) return;
    csvs_.push_back({name, io::csv_provenance(report_["config_digest"].get<std::string>(), cfg_.run.seed) + body});
  }

  CommandResult finish(Json result, bool pass, std::vector<std::string> warnings) {
    CommandResult out;
    out.pass = pass;
    out.warnings = std::move(warnings);
    report_["options"] = {{"raw", opt_.raw}, {"strict", opt_.strict}};
    report_["pass"] = pass;
    report_["warnings"] = out.warnings;
    Json files = Json::array();
    for (const auto& a : csvs_) files.push_back(a.name);
    if (opt_.raw) files.push_back(command_ + ".raw.json");
    report_["files"] = files;
    report_["result"] = std::move(result);
    out.files.push_back({command_ + ".json", io::render_json(report_, true)});
    if (opt_.raw) out.files.push_back({command_ + ".raw.json", io::render_json(report_, false)});
    for (auto& a : csvs_) out.files.push_back(std::move(a));
    return out;
  }

 private:
  std::string command_;
  const io::ExperimentConfig& cfg_;
  RunOptions opt_;
  Json report_;
  std::vector<Artifact> csvs_;
};

// ---------------------------------------------------------------------------
// commands

inline CommandResult cmd_check(const io::ExperimentConfig& cfg, RunOptions opt) {
  if (!cfg.model) throw ConfigError("/model: check needs a model block");
  const auto& m = *cfg.model;
  Emitter em("check", cfg, opt);
  std::vector<std::string> warnings;
  const Polynomial onsite(m.onsite), pair(m.pair);
  const H1Report h1 = check_H1(onsite, pair);
  const H2Report h2 = check_H2(pair);
  Json result;
  result["H1"] = {{"k1", h1.k1},
                  {"k2", h1.k2},
                  {"onsite_confining", h1.onsite_confining},
                  {"pair_confining", h1.pair_confining},
                  {"ordering_ok", h1.ordering_ok},
                  {"holds", h1.holds()}};
  result["H2"] = {{"holds", h2.holds}, {"m0_max", h2.m0_max}};
  result["linear"] = nullptr;
  if (m.confining()) {
    const SystemConfig c = m.build();
    for (const auto& w : c.warnings()) warnings.push_back(w);
    if (quadratic(m)) {
      const LinearModel lm = assemble_linear(c);
      const ControllabilityReport cr = controllability_rank(lm);
      double abscissa = 0.0;
      const Stability st = classify_stability(lm, 1e-9, &abscissa);
      result["linear"] = {{"rank", cr.rank},
                          {"state_dim", cr.state_dim},
                          {"deficiency", cr.deficiency},
                          {"mode_rank", cr.mode_rank},
                          {"mode_deficiency", cr.mode_deficiency},
                          {"full_rank", cr.full},
                          {"stability", to_string(st)},
                          {"spectral_abscissa", abscissa}};
      if (!cr.full) {
        warnings.push_back("controllability rank deficient: rank " + std::to_string(cr.rank) + " of " +
                           std::to_string(cr.state_dim) + ", " + std::to_string(cr.mode_deficiency) +
                           " undamped normal mode(s); the invariant measure is not unique");
      }
      if (st != Stability::hurwitz) warnings.push_back(std::string("drift matrix is ") + to_string(st));
    }
  }
  return em.finish(result, h1.holds() && h2.holds, warnings);
}

inline CommandResult cmd_simulate(const io::ExperimentConfig& cfg, RunOptions opt) {
  const SystemConfig c = cfg.system();
  const IntegratorSpec is = cfg.integrator_for(c);
  const auto& run = cfg.run;
  Emitter em("simulate", cfg, opt);
  std::vector<std::string> warnings(c.warnings());
  const std::vector<std::string> names = run.observers.empty() ? default_observers(c) : run.observers;
  std::vector<TrajectoryRecord> recs;
  if (run.horizon > 0.0) {
    recs = simulate_ensemble(c, initial_sampler(cfg, c, is), is, run.horizon, run.n_traj, run.seed, names, run.stride,
                             run.workers);
  } else {
    // zero horizon: the column contract only
    TrajectoryRecord empty;
    empty.names = ObservableSet(c, names).names();
    empty.columns.resize(empty.names.size());
    recs.assign(run.n_traj, empty);
  }
  Json trajectories = Json::array();
  for (std::size_t i = 0; i < recs.size(); ++i) {
    const std::string file = run.n_traj == 1 ? "trajectory.csv" : "trajectory_" + std::to_string(i) + ".csv";
    em.csv(file, io::trajectory_csv(recs[i]), true);
    trajectories.push_back({{"file", file}, {"stream", i}, {"samples", recs[i].size()}});
  }
  std::vector<std::string> columns{"t"};
  if (!recs.empty()) columns.insert(columns.end(), recs.front().names.begin(), recs.front().names.end());
  Json result = {{"columns", columns},
                 {"dt", is.dt},
                 {"sample_interval", is.dt * static_cast<double>(run.stride)},
                 {"trajectories", trajectories}};
  return em.finish(result, true, warnings);
}

inline CommandResult cmd_steady(const io::ExperimentConfig& cfg, RunOptions opt) {
  const SystemConfig c = cfg.system();
  const IntegratorSpec is = cfg.integrator_for(c);
  const auto& p = cfg.analysis.steady;
  const auto& run = cfg.run;
  Emitter em("steady", cfg, opt);
  std::vector<std::string> warnings(c.warnings());
  const std::vector<std::string> names = run.observers.empty() ? default_observers(c) : run.observers;
  const auto recs = simulate_ensemble(c, initial_sampler(cfg, c, is), is, run.horizon, run.n_traj, run.seed, names,
                                      run.stride, run.workers);
  const SteadyStateReport rep = steady_state(recs, p.burn_in_fraction, p.batch_count);
  if (rep.mixing_warning) warnings.push_back("batches shorter than the autocorrelation time for some observable");

  Json entries = Json::array();
  bool pass = true;
  std::optional<StationaryCovariance> cov;
  if (p.compare_oracle && quadratic(*cfg.model)) {
    cov = stationary_covariance(assemble_linear(c));
    if (!cov->unique) {
      warnings.push_back("no unique stationary covariance; oracle comparison skipped");
      cov.reset();
    }
  }
  std::vector<std::string> cols{"observable", "mean", "se", "tau_int"};
  std::vector<double> means, ses, taus;
  for (const auto& e : rep.entries) {
    Json j = estimate_json(e);
    if (cov) {
      std::optional<double> exact;
      if (e.name.starts_with("Phi_")) exact = exact_flux(*cov, c, parse_observable(e.name, c).index);
      if (e.name.starts_with("bathflow_")) exact = exact_bath_flows(*cov, c)[parse_observable(e.name, c).index];
      if (exact) {
        const double diff = std::abs(e.mean - *exact);
        const double z = e.se > 0.0 ? diff / e.se : (diff == 0.0 ? 0.0 : INFINITY);
        j["exact"] = *exact;
        j["z"] = z;
        j["pass"] = z <= p.n_sigma;
        pass = pass && z <= p.n_sigma;
      }
    }
    entries.push_back(j);
    means.push_back(e.mean);
    ses.push_back(e.se);
    taus.push_back(e.tau_int);
  }
  std::ostringstream table;
  table << "observable,mean,se,tau_int\n";
  for (std::size_t i = 0; i < rep.entries.size(); ++i) {
    table << rep.entries[i].name << ',' << format_real(means[i]) << ',' << format_real(ses[i]) << ','
          << format_real(taus[i]) << '\n';
  }
  em.csv("steady.csv", table.str());
  Json result = {{"burn_in_fraction", p.burn_in_fraction},
                 {"batch_count", p.batch_count},
                 {"oracle", cov.has_value()},
                 {"entries", entries}};
  return em.finish(result, pass, warnings);
}

inline bool symmetric_grid(const std::vector<double>& alphas) {
  for (double a : alphas) {
    const bool found = std::any_of(alphas.begin(), alphas.end(), [&](double b) { return std::abs(a + b - 1.0) < 1e-9; });
    if (!found) return false;
  }
  return !alphas.empty();
}

inline CommandResult cmd_ldp(const io::ExperimentConfig& cfg, RunOptions opt) {
  const SystemConfig c = cfg.system();
  const IntegratorSpec is = cfg.integrator_for(c);
  const auto& p = cfg.analysis.ldp;
  Emitter em("ldp", cfg, opt);
  std::vector<std::string> warnings(c.warnings());
  CumulantOptions co;
  co.n_eff_floor = p.n_eff_floor;
  co.bootstrap = p.bootstrap;
  co.seed = cfg.run.seed;
  const CumulantCurve curve = mgf_cumulant(c, p.alphas, p.times, p.flow_index, ensemble_spec(cfg, is, cfg.run.n_traj), co);

  Json points = Json::array();
  std::vector<double> a, e, se, ne, us;
  for (const auto& pt : curve.points) {
    points.push_back({{"alpha", pt.alpha},
                      {"e", pt.e},
                      {"se", pt.se},
                      {"ci", {pt.ci_lo, pt.ci_hi}},
                      {"n_eff", pt.n_eff},
                      {"usable", pt.usable},
                      {"fit_r2", pt.fit_r2}});
    a.push_back(pt.alpha);
    e.push_back(pt.e);
    se.push_back(pt.se);
    ne.push_back(pt.n_eff);
    us.push_back(pt.usable ? 1.0 : 0.0);
    if (!pt.usable) warnings.push_back("alpha " + format_real(pt.alpha) + ": n_eff below floor, excluded");
  }
  em.csv("cumulant.csv", io::curve_csv({"alpha", "e", "se", "n_eff", "usable"}, {a, e, se, ne, us}));
  Json result = {{"times", curve.times},
                 {"flow_index", p.flow_index},
                 {"n_traj", curve.n_traj},
                 {"alpha_domain", {curve.domain_lo, curve.domain_hi}},
                 {"equilibrium", c.equilibrium()},
                 {"cumulant", points}};
  bool pass = true;
  if (symmetric_grid(p.alphas)) {
    const SymmetryReport sym = gc_symmetry_check(curve, p.n_sigma);
    Json pairs = Json::array();
    for (const auto& sp : sym.pairs) {
      pairs.push_back({{"alpha", sp.alpha},
                       {"partner", sp.partner},
                       {"deviation", sp.deviation},
                       {"combined_se", sp.combined_se},
                       {"z", sp.z},
                       {"usable", sp.usable},
                       {"pass", sp.pass}});
    }
    result["symmetry"] = {{"pairs", pairs},
                          {"max_deviation", sym.max_deviation},
                          {"max_z", sym.max_z},
                          {"usable_pairs", sym.usable_pairs},
                          {"n_sigma", sym.n_sigma},
                          {"pass", sym.pass}};
    pass = sym.pass;
  } else {
    warnings.push_back("alpha grid not symmetric about 1/2; symmetry check skipped");
  }
  if (!p.w_grid.empty()) {
    const RateFunction rf = legendre_rate(curve, p.w_grid);
    Json rp = Json::array();
    std::vector<double> w, v, am, in;
    for (const auto& r : rf.points) {
      rp.push_back({{"w", r.w}, {"value", r.value}, {"argmax_alpha", r.argmax_alpha}, {"interior", r.interior}});
      w.push_back(r.w);
      v.push_back(r.value);
      am.push_back(r.argmax_alpha);
      in.push_back(r.interior ? 1.0 : 0.0);
    }
    result["rate"] = {{"points", rp}, {"max_adjustment", rf.max_adjustment}, {"convex", rf.convex}};
    if (!rf.convex) warnings.push_back("rate function not convex on the w grid");
    em.csv("rate.csv", io::curve_csv({"w", "rate", "argmax_alpha", "interior"}, {w, v, am, in}));
  }
  return em.finish(result, pass, warnings);
}

inline Json correlation_json(const CorrelationIntegral& ci) {
  return {{"integral", ci.integral},          {"se", ci.se},
          {"cutoff_lag", ci.lags.empty() ? 0.0 : ci.lags[ci.cutoff]},
          {"converged", ci.converged},        {"segments", ci.segments},
          {"baseline_mean", ci.baseline_mean}, {"baseline_se", ci.baseline_se}};
}

inline CommandResult cmd_greenkubo(const io::ExperimentConfig& cfg, RunOptions opt) {
  const SystemConfig c = cfg.system();
  const IntegratorSpec is = cfg.integrator_for(c);
  const auto& p = cfg.analysis.greenkubo;
  Emitter em("greenkubo", cfg, opt);
  std::vector<std::string> warnings(c.warnings());
  GreenKuboSpec spec;
  spec.correlation = ensemble_spec(cfg, is, p.correlation_n_traj);
  spec.correlation_horizon = p.correlation_horizon;
  spec.stride = p.stride;
  spec.window.max_lag_time = p.max_lag_time;
  spec.response = ensemble_spec(cfg, is, p.response_n_traj);
  spec.response_horizon = p.response_horizon;
  spec.probes = p.probes;
  spec.tolerance = p.tolerance;
  const GreenKuboReport rep = green_kubo(c, p.flow_index, spec);
  if (!rep.correlation.converged) warnings.push_back("correlation window did not converge before max_lag_time");
  Json result = {{"flow_index", p.flow_index},
                 {"correlation", correlation_json(rep.correlation)},
                 {"response",
                  {{"probes", rep.response.probes},
                   {"means", rep.response.means},
                   {"ses", rep.response.ses},
                   {"slope", rep.response.slope},
                   {"slope_se", rep.response.slope_se}}},
                 {"ratio", rep.ratio},
                 {"ratio_se", rep.ratio_se},
                 {"overlap", rep.overlap},
                 {"tolerance", p.tolerance}};
  if (quadratic(*cfg.model)) result["oracle_slope"] = oracle_response(c, p.flow_index, p.probes).slope;
  em.csv("acf.csv", io::curve_csv({"lag", "acf", "se"}, {rep.correlation.lags, rep.correlation.acf,
                                                        rep.correlation.acf_se}));
  return em.finish(result, rep.pass, warnings);
}

inline CommandResult cmd_lyapunov(const io::ExperimentConfig& cfg, RunOptions opt) {
  const SystemConfig c = cfg.system();
  const auto& p = cfg.analysis.lyapunov;
  Emitter em("lyapunov", cfg, opt);
  std::vector<std::string> warnings(c.warnings());
  LyapunovProbeOptions lo;
  lo.theta = p.theta;
  lo.time = p.time;
  lo.dt = probe_dt(cfg);
  lo.random_directions = p.random_directions;
  lo.paths = p.paths;
  lo.b_fractions = p.b_fractions;
  lo.seed = cfg.run.seed;
  lo.workers = cfg.run.workers;
  const LyapunovProbeReport rep = lyapunov_probe(c, p.energies, lo);
  if (!rep.theta_in_range) warnings.push_back("theta * T_max >= 1");
  if (!rep.shells_above_temperature) warnings.push_back("some shell energy is below dof * T_max");
  Json shells = Json::array();
  std::vector<double> en, lk, lks, lb;
  for (const auto& s : rep.shells) {
    shells.push_back({{"energy", s.energy},
                      {"log_kappa", s.log_kappa},
                      {"log_kappa_se", s.log_kappa_se},
                      {"argmax_direction", s.argmax_direction},
                      {"log_b", s.log_b}});
    en.push_back(s.energy);
    lk.push_back(s.log_kappa);
    lks.push_back(s.log_kappa_se);
    lb.push_back(s.log_b);
  }
  em.csv("shells.csv", io::curve_csv({"energy", "log_kappa", "log_kappa_se", "log_b"}, {en, lk, lks, lb}));
  Json result = {{"theta", rep.theta},
                 {"shells", shells},
                 {"strictly_decreasing", rep.strictly_decreasing},
                 {"significantly_decreasing", rep.significantly_decreasing}};
  return em.finish(result, rep.strictly_decreasing && rep.theta_in_range, warnings);
}

inline CommandResult cmd_scaling(const io::ExperimentConfig& cfg, RunOptions opt) {
  SystemConfig c = cfg.system();
  const auto& p = cfg.analysis.scaling;
  Emitter em("scaling", cfg, opt);
  std::vector<std::string> warnings(c.warnings());
  if (c.max_temperature() != 0.0) {
    warnings.push_back("reservoir temperatures set to zero for the noiseless relaxation");
    c = c.with_temperatures(std::vector<double>(c.reservoirs().size(), 0.0));
  }
  DissipationOptions dopt;
  dopt.dt = probe_dt(cfg);
  dopt.unit_time = p.unit_time;
  dopt.random_directions = p.random_directions;
  dopt.seed = cfg.run.seed;
  const DissipationReport rep = dissipation_scaling(c, p.energies, dopt);
  Json points = Json::array();
  std::vector<double> en, wd;
  for (const auto& pt : rep.points) {
    points.push_back({{"energy", pt.energy}, {"worst_drop", pt.worst_drop}, {"worst_direction", pt.worst_direction}});
    en.push_back(pt.energy);
    wd.push_back(pt.worst_drop);
  }
  em.csv("dissipation.csv", io::curve_csv({"energy", "worst_drop"}, {en, wd}));
  Json result = {{"points", points},
                 {"exponent", rep.exponent},
                 {"exponent_se", rep.exponent_se},
                 {"c_estimate", rep.c_estimate},
                 {"r2", rep.r2},
                 {"bound_exponent", rep.bound_exponent},
                 {"fault", rep.fault},
                 {"consistent", rep.consistent}};
  return em.finish(result, rep.consistent && !rep.fault, warnings);
}

inline CommandResult cmd_oracle(const io::ExperimentConfig& cfg, RunOptions opt) {
  const SystemConfig c = cfg.system();
  Emitter em("oracle", cfg, opt);
  std::vector<std::string> warnings(c.warnings());
  const LinearModel lm = assemble_linear(c);
  const StationaryCovariance cov = stationary_covariance(lm);
  const ControllabilityReport cr = controllability_rank(lm);
  Json result = {{"state_dim", lm.state_dim()},
                 {"stability", to_string(cov.stability)},
                 {"spectral_abscissa", cov.spectral_abscissa},
                 {"unique", cov.unique},
                 {"controllability", {{"rank", cr.rank}, {"deficiency", cr.deficiency},
                                      {"mode_deficiency", cr.mode_deficiency}}}};
  if (cov.stability == Stability::hurwitz) result["slowest_decay_rate"] = slowest_decay_rate(lm);
  if (cov.unique) {
    result["residual"] = cov.residual;
    result["covariance"] = matrix_json(cov.Sigma);
    if (c.topology().layered() && c.reservoirs().size() == 2) {
      const auto fluxes = exact_fluxes(cov, c);
      result["fluxes"] = fluxes;
      std::vector<double> idx;
      for (std::size_t j = 0; j < fluxes.size(); ++j) idx.push_back(static_cast<double>(j));
      em.csv("fluxes.csv", io::curve_csv({"j", "Phi"}, {idx, fluxes}));
    }
    result["bath_flows"] = exact_bath_flows(cov, c);
  } else {
    warnings.push_back("no unique stationary covariance");
  }
  return em.finish(result, cov.unique, warnings);
}

inline CommandResult cmd_gle_compare(const io::ExperimentConfig& cfg, RunOptions opt) {
  const auto& p = cfg.analysis.gle;
  Emitter em("gle-compare", cfg, opt);
  const GLEConfig g(Polynomial(p.onsite), p.coupling, p.rate, p.temperature);
  ReductionSpec spec;
  spec.dt = p.dt;
  spec.horizon = p.horizon;
  spec.n_traj = p.n_traj;
  spec.stride = p.stride;
  spec.burn_in_fraction = p.burn_in_fraction;
  spec.n_sigma = p.n_sigma;
  spec.seed = cfg.run.seed;
  spec.workers = cfg.run.workers;
  const ReductionReport rep = compare_reduction(g, spec);
  Json rows = Json::array();
  std::ostringstream table;
  table << "moment,memory_mean,memory_se,extended_mean,extended_se,z\n";
  for (const auto& r : rep.rows) {
    rows.push_back({{"moment", r.moment},
                    {"memory", {{"mean", r.memory.mean}, {"se", r.memory.se}}},
                    {"extended", {{"mean", r.extended.mean}, {"se", r.extended.se}}},
                    {"z", r.z},
                    {"pass", r.pass}});
    table << r.moment << ',' << format_real(r.memory.mean) << ',' << format_real(r.memory.se) << ','
          << format_real(r.extended.mean) << ',' << format_real(r.extended.se) << ',' << format_real(r.z) << '\n';
  }
  em.csv("moments.csv", table.str());
  Json result = {{"rows", rows}, {"max_z", rep.max_z}, {"n_sigma", p.n_sigma}};
  return em.finish(result, rep.pass, {});
}

inline CommandResult execute(const std::string& command, const io::ExperimentConfig& cfg, RunOptions opt) {
  if (command == "check") return cmd_check(cfg, opt);
  if (command == "simulate") return cmd_simulate(cfg, opt);
  if (command == "steady") return cmd_steady(cfg, opt);
  if (command == "ldp") return cmd_ldp(cfg, opt);
  if (command == "greenkubo") return cmd_greenkubo(cfg, opt);
  if (command == "lyapunov") return cmd_lyapunov(cfg, opt);
  if (command == "scaling") return cmd_scaling(cfg, opt);
  if (command == "oracle") return cmd_oracle(cfg, opt);
  if (command == "gle-compare") return cmd_gle_compare(cfg, opt);
  throw ConfigError("unknown command '" + command + "'");
}

inline int exit_code(const CommandResult& r, bool strict) {
  if (!r.pass) return kAnalysisFail;
  if (strict && !r.warnings.empty()) return kAnalysisFail;
  return kOk;
}

// ---------------------------------------------------------------------------
// verification

struct VerifyOutcome {
  bool match = true;
  Json files = Json::array();
};

/// Re-runs the command recorded in `report_path` from its embedded config and compares every
/// file it lists (and the report itself) with what is on disk.
inline VerifyOutcome verify(const std::filesystem::path& report_path, std::size_t workers) {
  const Json report = io::parse_json_text(io::read_file(report_path), report_path.string());
  if (!report.contains("format") || report["format"] != io::kFormatVersion || !report.contains("command") ||
      !report.contains("config")) {
    throw ConfigError(report_path.string() + ": not a report file");
  }
  io::ExperimentConfig cfg = io::parse_experiment(report["config"]);
  cfg.run.workers = workers;
  RunOptions opt;
  if (report.contains("options")) {
    opt.raw = report["options"].value("raw", false);
    opt.strict = report["options"].value("strict", false);
  }
  const CommandResult fresh = execute(report["command"].get<std::string>(), cfg, opt);
  const auto dir = report_path.parent_path();
  VerifyOutcome out;
  for (const auto& a : fresh.files) {
    const auto path = dir / a.name;
    const bool exists = std::filesystem::exists(path);
    const bool same = exists && io::read_file(path) == a.content;
    out.files.push_back({{"file", a.name}, {"match", same}, {"present", exists}});
    out.match = out.match && same;
  }
  return out;
}

// ---------------------------------------------------------------------------
// entry point

inline std::filesystem::path output_directory(const std::optional<std::string>& flag, const io::ExperimentConfig& cfg) {
  if (flag) return *flag;
  if (cfg.output.directory) return *cfg.output.directory;
  if (const char* env = std::getenv("NESS_OUTPUT_DIR"); env && *env) return env;
  return "ness-out";
}

inline void emit_error(std::ostream& err, const char* code, const std::string& message, const Json& extra = {}) {
  Json e = {{"code", code}, {"message", message}};
  if (extra.is_object()) e.update(extra);
  err << Json{{"error", e}}.dump() << '\n';
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

/// Full command-line program; returns the process exit code.
inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Nonequilibrium steady states of anharmonic lattices"};
  app.require_subcommand(1);
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<std::size_t> workers;
  std::optional<double> horizon;
  std::optional<std::string> observers;
  bool strict = false, raw = false;

  const std::vector<std::string> commands{"check",     "simulate", "steady", "ldp",        "greenkubo",
                                          "lyapunov", "scaling",  "oracle", "gle-compare"};
  std::map<std::string, CLI::App*> subs;
  for (const auto& name : commands) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("config", config_path, "experiment JSON")->required();
    sub->add_option("--seed", seed, "override run.seed");
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--workers", workers, "trajectory worker threads");
    sub->add_flag("--strict", strict, "treat warnings as failures");
    sub->add_flag("--raw", raw, "also write a full-precision sidecar");
    subs[name] = sub;
  }
  subs["check"]->description("assumption checks and linear classification");
  subs["simulate"]->description("trajectory CSV plus JSON header");
  subs["simulate"]->add_option("--horizon", horizon, "override run.horizon");
  subs["simulate"]->add_option("--observers", observers, "comma-separated observables (override run.observers)");
  auto* ver = app.add_subcommand("verify", "re-run an emitted report and compare outputs byte for byte");
  std::string report_path;
  ver->add_option("report", report_path, "path to <command>.json")->required();
  ver->add_option("--workers", workers, "trajectory worker threads");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    emit_error(err, "usage", e.what());
    return kConfigError;
  }

  try {
    if (ver->parsed()) {
      const VerifyOutcome v = verify(report_path, workers.value_or(1));
      out << Json{{"verified", v.match}, {"files", v.files}}.dump(2) << '\n';
      return v.match ? kOk : kAnalysisFail;
    }
    std::string command;
    for (const auto& [name, sub] : subs) {
      if (sub->parsed()) command = name;
    }
    io::ExperimentConfig cfg = io::parse_experiment_text(io::read_file(config_path), config_path);
    if (seed) cfg.run.seed = *seed;
    if (workers) {
      if (*workers == 0) throw ConfigError("--workers must be >= 1");
      cfg.run.workers = *workers;
    }
    if (horizon) {
      if (!(*horizon >= 0.0)) throw ConfigError("--horizon must be >= 0");
      cfg.run.horizon = *horizon;
    }
    if (observers) {
      cfg.run.observers = split_list(*observers);
      const SystemConfig c = cfg.system();
      for (const auto& name : cfg.run.observers) {
        try {
          parse_observable(name, c);
        } catch (const ConfigError& e) {
          throw ConfigError(std::string("--observers: ") + e.what());
        }
      }
    }
    const RunOptions opt{raw, strict};
    const CommandResult result = execute(command, cfg, opt);
    const auto dir = output_directory(out_dir, cfg);
    std::filesystem::create_directories(dir);
    Json written = Json::array();
    for (const auto& a : result.files) {
      io::write_file(dir / a.name, a.content);
      written.push_back((dir / a.name).string());
    }
    for (const auto& w : result.warnings) err << "warning: " << w << '\n';
    const int code = exit_code(result, strict);
    out << Json{{"command", command}, {"pass", result.pass}, {"exit_code", code}, {"files", written}}.dump() << '\n';
    return code;
  } catch (const ConfigError& e) {
    emit_error(err, "config_error", e.what());
    return kConfigError;
  } catch (const IntegratorFault& e) {
    emit_error(err, "integrator_fault", e.what(), {{"time", e.time()}, {"state_digest", e.state_digest()}});
    return kRuntimeFault;
  } catch (const EnsembleError& e) {
    Json extra = {{"failed", e.failed()}};
    try {
      if (e.first()) std::rethrow_exception(e.first());
    } catch (const IntegratorFault& f) {
      extra["time"] = f.time();
      extra["state_digest"] = f.state_digest();
    } catch (...) {
    }
    emit_error(err, "integrator_fault", e.what(), extra);
    return kRuntimeFault;
  } catch (const AnalysisError& e) {
    emit_error(err, "analysis_error", e.what());
    return kAnalysisFail;
  } catch (const std::exception& e) {
    emit_error(err, "runtime_fault", e.what());
    return kRuntimeFault;
  }
}

}  // namespace ness::cli
