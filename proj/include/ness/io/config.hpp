#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "ness/dynamics.hpp"
#include "ness/error.hpp"
#include "ness/model.hpp"
#include "ness/observables.hpp"

namespace ness::io {

using Json = nlohmann::ordered_json;

/// Line and column (1-based) of a byte offset.
inline std::pair<std::size_t, std::size_t> line_column(const std::string& text, std::size_t offset) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < offset && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

inline Json parse_json_text(const std::string& text, const std::string& origin = "config") {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    const auto [line, col] = line_column(text, e.byte == 0 ? 0 : e.byte - 1);
    throw ConfigError(origin + ":" + std::to_string(line) + ":" + std::to_string(col) + ": malformed JSON (" +
                      e.what() + ")");
  }
}

/// Read-only view of a JSON object that tracks its path for diagnostics and rejects keys
/// outside an allowed set.
class Node {
 public:
  Node(const Json& j, std::string path) : j_(&j), path_(std::move(path)) {
    if (!j.is_object()) fail("expected an object");
  }

  const std::string& path() const { return path_; }
  [[noreturn]] void fail(const std::string& why) const { throw ConfigError((path_.empty() ? "/" : path_) + ": " + why); }

  void allow(std::initializer_list<const char*> keys) const {
    const std::set<std::string> ok(keys.begin(), keys.end());
    for (const auto& [k, v] : j_->items()) {
      if (!ok.contains(k)) {
        std::string list;
        for (const auto& a : ok) list += (list.empty() ? "" : ", ") + a;
        throw ConfigError(child(k) + ": unknown key (allowed: " + list + ")");
      }
    }
  }

  bool has(const std::string& key) const { return j_->contains(key) && !(*j_)[key].is_null(); }
  std::string child(const std::string& key) const { return path_ + "/" + key; }

  Node object(const std::string& key) const {
    if (!j_->contains(key)) fail("missing required key '" + key + "'");
    return Node((*j_)[key], child(key));
  }

  double number(const std::string& key) const { return as_number(at(key), child(key)); }
  double number(const std::string& key, double fallback) const { return has(key) ? number(key) : fallback; }
  std::optional<double> maybe_number(const std::string& key) const {
    return has(key) ? std::optional<double>(number(key)) : std::nullopt;
  }

  std::uint64_t count(const std::string& key) const { return as_count(at(key), child(key)); }
  std::uint64_t count(const std::string& key, std::uint64_t fallback) const {
    return has(key) ? count(key) : fallback;
  }

  bool flag(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    if (!at(key).is_boolean()) throw ConfigError(child(key) + ": expected true or false");
    return at(key).get<bool>();
  }

  std::string text(const std::string& key) const {
    if (!at(key).is_string()) throw ConfigError(child(key) + ": expected a string");
    return at(key).get<std::string>();
  }
  std::string text(const std::string& key, const std::string& fallback) const {
    return has(key) ? text(key) : fallback;
  }

  std::vector<double> numbers(const std::string& key) const {
    const Json& a = at(key);
    if (!a.is_array()) throw ConfigError(child(key) + ": expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < a.size(); ++i) out.push_back(as_number(a[i], child(key) + "/" + std::to_string(i)));
    return out;
  }
  std::vector<double> numbers(const std::string& key, std::vector<double> fallback) const {
    return has(key) ? numbers(key) : fallback;
  }

  std::vector<std::string> texts(const std::string& key, std::vector<std::string> fallback = {}) const {
    if (!has(key)) return fallback;
    const Json& a = at(key);
    if (!a.is_array()) throw ConfigError(child(key) + ": expected an array of strings");
    std::vector<std::string> out;
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (!a[i].is_string()) throw ConfigError(child(key) + "/" + std::to_string(i) + ": expected a string");
      out.push_back(a[i].get<std::string>());
    }
    return out;
  }

  const Json& at(const std::string& key) const {
    if (!j_->contains(key)) fail("missing required key '" + key + "'");
    return (*j_)[key];
  }

 private:
  static double as_number(const Json& v, const std::string& where) {
    if (!v.is_number()) throw ConfigError(where + ": expected a number");
    return v.get<double>();
  }
  static std::uint64_t as_count(const Json& v, const std::string& where) {
    if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0)) {
      throw ConfigError(where + ": expected a non-negative integer");
    }
    return v.get<std::uint64_t>();
  }

  const Json* j_;
  std::string path_;
};

// ---------------------------------------------------------------------------

struct ReservoirEntry {
  double temperature = 1.0;
  double coupling = 1.0;
  double rate = 1.0;
  ReservoirKind kind = ReservoirKind::markovian_aux;
  std::size_t vertex = 0;  ///< graph topologies only
};

struct ModelBlock {
  std::string topology = "chain";
  std::size_t n = 0;
  std::size_t side = 0;
  std::size_t dim = 0;
  std::size_t vertices = 0;
  std::vector<Edge> edges;
  std::vector<double> onsite;
  std::vector<double> pair;
  std::vector<ReservoirEntry> reservoirs;

  bool confining() const {
    return PolynomialPotential::is_confining(Polynomial(onsite)) && PolynomialPotential::is_confining(Polynomial(pair));
  }

  SystemConfig build() const {
    auto potential = [](const std::vector<double>& c, const char* where) {
      try {
        return PolynomialPotential(c);
      } catch (const ConfigError& e) {
        throw ConfigError(std::string(where) + ": " + e.what());
      }
    };
    const PolynomialPotential u1 = potential(onsite, "/model/onsite"), u2 = potential(pair, "/model/pair");
    if (topology == "chain") {
      const auto& l = reservoirs.at(0);
      const auto& r = reservoirs.at(1);
      if (l.kind != ReservoirKind::markovian_aux || r.kind != ReservoirKind::markovian_aux) {
        throw ConfigError("/model/reservoirs: chain reservoirs are markovian_aux");
      }
      if (l.coupling != r.coupling || l.rate != r.rate) {
        std::vector<ReservoirSpec> res{{l.temperature, l.coupling, l.rate, l.kind}, {r.temperature, r.coupling, r.rate, r.kind}};
        return SystemConfig(LatticeTopology::chain(n), u1, u2, std::move(res));
      }
      return build_chain(n, u1, u2, l.temperature, r.temperature, l.coupling, l.rate);
    }
    if (topology == "hypercube") {
      const auto& l = reservoirs.at(0);
      const auto& r = reservoirs.at(1);
      std::vector<ReservoirSpec> res{{l.temperature, l.coupling, l.coupling, ReservoirKind::langevin},
                                     {r.temperature, r.coupling, r.coupling, ReservoirKind::langevin}};
      return SystemConfig(LatticeTopology::hypercube(side, dim), u1, u2, std::move(res));
    }
    std::vector<std::pair<std::size_t, ReservoirSpec>> baths;
    for (const auto& b : reservoirs) baths.push_back({b.vertex, {b.temperature, b.coupling, b.rate, b.kind}});
    return build_graph(vertices, edges, baths, u1, u2);
  }
};

struct RunBlock {
  double horizon = 100.0;
  std::size_t n_traj = 1;
  std::uint64_t seed = 1;
  std::size_t stride = 1;
  std::vector<std::string> observers;
  double burn_in = 0.0;  ///< time units of dynamics before t = 0 (0: start from rest)
  std::optional<double> initial_temperature;
  std::size_t workers = 1;
};

struct SteadyParams {
  double burn_in_fraction = 0.1;
  std::size_t batch_count = 20;
  bool compare_oracle = true;  ///< quadratic models: compare flows with the exact covariance
  double n_sigma = 3.0;
};

struct LdpParams {
  std::vector<double> alphas;
  std::vector<double> times{50.0, 100.0, 200.0};
  std::size_t flow_index = 1;
  double n_eff_floor = 30.0;
  std::size_t bootstrap = 200;
  std::vector<double> w_grid;
  double n_sigma = 3.0;
};

struct GreenKuboParams {
  std::size_t flow_index = 1;
  double correlation_horizon = 500.0;
  std::size_t correlation_n_traj = 20;
  std::size_t stride = 10;
  double max_lag_time = 50.0;
  std::vector<double> probes{-0.1, 0.1};
  double response_horizon = 500.0;
  std::size_t response_n_traj = 20;
  double tolerance = 0.15;
};

struct LyapunovParams {
  double theta = 0.25;
  double time = 1.0;
  std::vector<double> energies{1e2, 1e3, 1e4};
  std::size_t paths = 200;
  std::size_t random_directions = 8;
  std::vector<double> b_fractions{0.1, 0.5};
};

struct ScalingParams {
  std::vector<double> energies{1e2, 1e3, 1e4};
  double unit_time = 1.0;
  std::size_t random_directions = 8;
};

struct GleParams {
  std::vector<double> onsite{0.0, 0.0, 0.5, 0.0, 0.25};
  double coupling = 1.0;
  double rate = 1.0;
  double temperature = 1.0;
  double dt = 0.01;
  double horizon = 2000.0;
  std::size_t n_traj = 8;
  std::size_t stride = 10;
  double burn_in_fraction = 0.1;
  double n_sigma = 3.0;
};

struct AnalysisBlock {
  std::string kind;  ///< empty: no analysis selected
  SteadyParams steady;
  LdpParams ldp;
  GreenKuboParams greenkubo;
  LyapunovParams lyapunov;
  ScalingParams scaling;
  GleParams gle;
};

struct OutputBlock {
  std::optional<std::string> directory;
  std::vector<std::string> formats{"json", "csv"};
  bool wants(const std::string& f) const { return std::find(formats.begin(), formats.end(), f) != formats.end(); }
};

struct ExperimentConfig {
  std::optional<ModelBlock> model;
  IntegratorSpec integrator{};
  bool dt_explicit = false;
  RunBlock run;
  AnalysisBlock analysis;
  OutputBlock output;

  SystemConfig system() const {
    if (!model) throw ConfigError("/model: this command needs a model block");
    return model->build();
  }
  /// Integrator with dt resolved against the model when not given.
  IntegratorSpec integrator_for(const SystemConfig& c) const {
    IntegratorSpec s = integrator;
    if (!dt_explicit) s.dt = default_time_step(c);
    return s;
  }
};

// ---------------------------------------------------------------------------

namespace detail {

inline ReservoirKind parse_kind(const std::string& s, const std::string& where) {
  if (s == "markovian_aux") return ReservoirKind::markovian_aux;
  if (s == "langevin") return ReservoirKind::langevin;
  throw ConfigError(where + ": unknown reservoir kind '" + s + "' (markovian_aux or langevin)");
}

inline ModelBlock parse_model(const Node& m) {
  m.allow({"topology", "onsite", "pair", "reservoirs"});
  ModelBlock b;
  const Node t = m.object("topology");
  b.topology = t.text("kind");
  if (b.topology == "chain") {
    t.allow({"kind", "n"});
    b.n = t.count("n");
  } else if (b.topology == "hypercube") {
    t.allow({"kind", "side", "dim"});
    b.side = t.count("side");
    b.dim = t.count("dim");
  } else if (b.topology == "graph") {
    t.allow({"kind", "vertices", "edges"});
    b.vertices = t.count("vertices");
    const Json& e = t.at("edges");
    if (!e.is_array()) throw ConfigError(t.child("edges") + ": expected an array of [a, b] pairs");
    for (std::size_t i = 0; i < e.size(); ++i) {
      const std::string where = t.child("edges") + "/" + std::to_string(i);
      if (!e[i].is_array() || e[i].size() != 2 || !e[i][0].is_number_unsigned() || !e[i][1].is_number_unsigned()) {
        throw ConfigError(where + ": expected [a, b] with vertex indices");
      }
      b.edges.push_back({e[i][0].get<std::size_t>(), e[i][1].get<std::size_t>()});
    }
  } else {
    throw ConfigError(t.child("kind") + ": unknown topology '" + b.topology + "' (chain, hypercube, graph)");
  }
  // non-confining potentials parse (the check command reports on them); building fails later
  b.onsite = m.numbers("onsite");
  b.pair = m.numbers("pair");
  if (b.onsite.empty()) throw ConfigError(m.child("onsite") + ": expected polynomial coefficients");
  if (b.pair.empty()) throw ConfigError(m.child("pair") + ": expected polynomial coefficients");
  const Json& rs = m.at("reservoirs");
  if (!rs.is_array() || rs.empty()) throw ConfigError(m.child("reservoirs") + ": expected a non-empty array");
  const bool graph = b.topology == "graph";
  if (!graph && rs.size() != 2) throw ConfigError(m.child("reservoirs") + ": chain and hypercube take [left, right]");
  for (std::size_t i = 0; i < rs.size(); ++i) {
    const Node r(rs[i], m.child("reservoirs") + "/" + std::to_string(i));
    if (graph) {
      r.allow({"temperature", "coupling", "rate", "kind", "vertex"});
    } else {
      r.allow({"temperature", "coupling", "rate", "kind"});
    }
    ReservoirEntry e;
    e.temperature = r.number("temperature");
    e.coupling = r.number("coupling", 1.0);
    e.kind = parse_kind(r.text("kind", b.topology == "chain" ? "markovian_aux" : "langevin"), r.child("kind"));
    e.rate = r.number("rate", e.kind == ReservoirKind::langevin ? e.coupling : 1.0);
    if (e.kind == ReservoirKind::langevin && e.rate != e.coupling) {
      throw ConfigError(r.child("rate") + ": Langevin baths use one constant (rate = coupling)");
    }
    if (graph) e.vertex = r.count("vertex");
    b.reservoirs.push_back(e);
  }
  if (!b.confining()) return b;
  try {
    b.build();
  } catch (const ConfigError& e) {
    const std::string what = e.what();
    throw ConfigError(what.starts_with("/") ? what : m.path() + ": " + what);
  } catch (const std::out_of_range& e) {
    throw ConfigError(m.path() + ": " + e.what());
  }
  return b;
}

inline AnalysisBlock parse_analysis(const Node& a) {
  AnalysisBlock b;
  b.kind = a.text("kind");
  if (b.kind == "steady") {
    a.allow({"kind", "burn_in_fraction", "batch_count", "compare_oracle", "n_sigma"});
    auto& p = b.steady;
    p.burn_in_fraction = a.number("burn_in_fraction", p.burn_in_fraction);
    p.batch_count = a.count("batch_count", p.batch_count);
    p.compare_oracle = a.flag("compare_oracle", p.compare_oracle);
    p.n_sigma = a.number("n_sigma", p.n_sigma);
  } else if (b.kind == "ldp") {
    a.allow({"kind", "alphas", "times", "flow_index", "n_eff_floor", "bootstrap", "w_grid", "n_sigma"});
    auto& p = b.ldp;
    p.alphas = a.numbers("alphas", {0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0});
    p.times = a.numbers("times", p.times);
    p.flow_index = a.count("flow_index", p.flow_index);
    p.n_eff_floor = a.number("n_eff_floor", p.n_eff_floor);
    p.bootstrap = a.count("bootstrap", p.bootstrap);
    p.w_grid = a.numbers("w_grid", {});
    p.n_sigma = a.number("n_sigma", p.n_sigma);
  } else if (b.kind == "greenkubo") {
    a.allow({"kind", "flow_index", "correlation_horizon", "correlation_n_traj", "stride", "max_lag_time", "probes",
             "response_horizon", "response_n_traj", "tolerance"});
    auto& p = b.greenkubo;
    p.flow_index = a.count("flow_index", p.flow_index);
    p.correlation_horizon = a.number("correlation_horizon", p.correlation_horizon);
    p.correlation_n_traj = a.count("correlation_n_traj", p.correlation_n_traj);
    p.stride = a.count("stride", p.stride);
    p.max_lag_time = a.number("max_lag_time", p.max_lag_time);
    p.probes = a.numbers("probes", p.probes);
    p.response_horizon = a.number("response_horizon", p.response_horizon);
    p.response_n_traj = a.count("response_n_traj", p.response_n_traj);
    p.tolerance = a.number("tolerance", p.tolerance);
  } else if (b.kind == "lyapunov") {
    a.allow({"kind", "theta", "time", "energies", "paths", "random_directions", "b_fractions"});
    auto& p = b.lyapunov;
    p.theta = a.number("theta", p.theta);
    p.time = a.number("time", p.time);
    p.energies = a.numbers("energies", p.energies);
    p.paths = a.count("paths", p.paths);
    p.random_directions = a.count("random_directions", p.random_directions);
    p.b_fractions = a.numbers("b_fractions", p.b_fractions);
  } else if (b.kind == "scaling") {
    a.allow({"kind", "energies", "unit_time", "random_directions"});
    auto& p = b.scaling;
    p.energies = a.numbers("energies", p.energies);
    p.unit_time = a.number("unit_time", p.unit_time);
    p.random_directions = a.count("random_directions", p.random_directions);
  } else if (b.kind == "gle_compare") {
    a.allow({"kind", "onsite", "coupling", "rate", "temperature", "dt", "horizon", "n_traj", "stride",
             "burn_in_fraction", "n_sigma"});
    auto& p = b.gle;
    p.onsite = a.numbers("onsite", p.onsite);
    p.coupling = a.number("coupling", p.coupling);
    p.rate = a.number("rate", p.rate);
    p.temperature = a.number("temperature", p.temperature);
    p.dt = a.number("dt", p.dt);
    p.horizon = a.number("horizon", p.horizon);
    p.n_traj = a.count("n_traj", p.n_traj);
    p.stride = a.count("stride", p.stride);
    p.burn_in_fraction = a.number("burn_in_fraction", p.burn_in_fraction);
    p.n_sigma = a.number("n_sigma", p.n_sigma);
  } else if (b.kind == "oracle" || b.kind == "none") {
    a.allow({"kind"});
  } else {
    throw ConfigError(a.child("kind") + ": unknown analysis '" + b.kind +
                      "' (steady, ldp, greenkubo, lyapunov, scaling, oracle, gle_compare, none)");
  }
  return b;
}

}  // namespace detail

/// Parses and validates an experiment document; every error names the offending field.
inline ExperimentConfig parse_experiment(const Json& doc) {
  const Node root(doc, "");
  root.allow({"model", "integrator", "run", "analysis", "output"});
  ExperimentConfig cfg;
  if (root.has("analysis")) cfg.analysis = detail::parse_analysis(root.object("analysis"));
  if (root.has("model")) {
    cfg.model = detail::parse_model(root.object("model"));
  } else if (cfg.analysis.kind != "gle_compare") {
    root.fail("missing required key 'model'");
  }
  if (root.has("integrator")) {
    const Node in = root.object("integrator");
    in.allow({"scheme", "dt", "cap"});
    const std::string scheme = in.text("scheme", "splitting");
    if (scheme == "splitting") {
      cfg.integrator.scheme = Scheme::splitting;
    } else if (scheme == "euler_maruyama") {
      cfg.integrator.scheme = Scheme::euler_maruyama;
    } else {
      throw ConfigError(in.child("scheme") + ": unknown scheme '" + scheme + "' (splitting, euler_maruyama)");
    }
    if (in.has("dt")) {
      cfg.integrator.dt = in.number("dt");
      cfg.dt_explicit = true;
    }
    cfg.integrator.cap_G = in.maybe_number("cap");
    try {
      cfg.integrator.validate();
    } catch (const ConfigError& e) {
      throw ConfigError(in.path() + ": " + e.what());
    }
  }
  if (root.has("run")) {
    const Node r = root.object("run");
    r.allow({"horizon", "n_traj", "seed", "stride", "observers", "burn_in", "initial_temperature", "workers"});
    auto& run = cfg.run;
    run.horizon = r.number("horizon", run.horizon);
    if (!(run.horizon >= 0.0)) throw ConfigError(r.child("horizon") + ": must be >= 0");
    run.n_traj = r.count("n_traj", run.n_traj);
    if (run.n_traj == 0) throw ConfigError(r.child("n_traj") + ": must be >= 1");
    run.seed = r.count("seed", run.seed);
    run.stride = r.count("stride", run.stride);
    if (run.stride == 0) throw ConfigError(r.child("stride") + ": must be >= 1");
    run.observers = r.texts("observers");
    run.burn_in = r.number("burn_in", run.burn_in);
    run.initial_temperature = r.maybe_number("initial_temperature");
    run.workers = r.count("workers", run.workers);
    if (run.workers == 0) throw ConfigError(r.child("workers") + ": must be >= 1");
  }
  if (cfg.model && cfg.model->confining() && !cfg.run.observers.empty()) {
    const SystemConfig sys = cfg.model->build();
    for (std::size_t i = 0; i < cfg.run.observers.size(); ++i) {
      try {
        parse_observable(cfg.run.observers[i], sys);
      } catch (const ConfigError& e) {
        throw ConfigError("/run/observers/" + std::to_string(i) + ": " + e.what());
      }
    }
  }
  if (root.has("output")) {
    const Node o = root.object("output");
    o.allow({"directory", "formats"});
    if (o.has("directory")) cfg.output.directory = o.text("directory");
    cfg.output.formats = o.texts("formats", cfg.output.formats);
    for (std::size_t i = 0; i < cfg.output.formats.size(); ++i) {
      const auto& f = cfg.output.formats[i];
      if (f != "json" && f != "csv") {
        throw ConfigError("/output/formats/" + std::to_string(i) + ": unknown format '" + f + "' (json, csv)");
      }
    }
  }
  return cfg;
}

inline ExperimentConfig parse_experiment_text(const std::string& text, const std::string& origin = "config") {
  return parse_experiment(parse_json_text(text, origin));
}

// ---------------------------------------------------------------------------

/// The fully resolved document (defaults filled in); reports embed it and verify re-runs it.
inline Json to_json(const ExperimentConfig& cfg) {
  Json doc = Json::object();
  if (cfg.model) {
    const auto& m = *cfg.model;
    Json topo = {{"kind", m.topology}};
    if (m.topology == "chain") topo["n"] = m.n;
    if (m.topology == "hypercube") {
      topo["side"] = m.side;
      topo["dim"] = m.dim;
    }
    if (m.topology == "graph") {
      topo["vertices"] = m.vertices;
      Json edges = Json::array();
      for (const auto& e : m.edges) edges.push_back({e.a, e.b});
      topo["edges"] = edges;
    }
    Json res = Json::array();
    for (const auto& r : m.reservoirs) {
      Json e = {{"temperature", r.temperature}, {"coupling", r.coupling}, {"rate", r.rate}, {"kind", to_string(r.kind)}};
      if (m.topology == "graph") e["vertex"] = r.vertex;
      res.push_back(e);
    }
    doc["model"] = {{"topology", topo}, {"onsite", m.onsite}, {"pair", m.pair}, {"reservoirs", res}};
  }
  Json integ = {{"scheme", to_string(cfg.integrator.scheme)}};
  if (cfg.dt_explicit) integ["dt"] = cfg.integrator.dt;
  if (cfg.integrator.cap_G) integ["cap"] = *cfg.integrator.cap_G;
  doc["integrator"] = integ;
  const auto& r = cfg.run;
  // worker count and output directory do not affect results and stay out of the document
  doc["run"] = {{"horizon", r.horizon},     {"n_traj", r.n_traj},   {"seed", r.seed},
                {"stride", r.stride},       {"observers", r.observers}, {"burn_in", r.burn_in}};
  if (r.initial_temperature) doc["run"]["initial_temperature"] = *r.initial_temperature;
  const auto& a = cfg.analysis;
  if (!a.kind.empty()) {
    Json an = {{"kind", a.kind}};
    if (a.kind == "steady") {
      an.update({{"burn_in_fraction", a.steady.burn_in_fraction}, {"batch_count", a.steady.batch_count},
                 {"compare_oracle", a.steady.compare_oracle}, {"n_sigma", a.steady.n_sigma}});
    } else if (a.kind == "ldp") {
      an.update({{"alphas", a.ldp.alphas}, {"times", a.ldp.times}, {"flow_index", a.ldp.flow_index},
                 {"n_eff_floor", a.ldp.n_eff_floor}, {"bootstrap", a.ldp.bootstrap}, {"w_grid", a.ldp.w_grid},
                 {"n_sigma", a.ldp.n_sigma}});
    } else if (a.kind == "greenkubo") {
      const auto& g = a.greenkubo;
      an.update({{"flow_index", g.flow_index}, {"correlation_horizon", g.correlation_horizon},
                 {"correlation_n_traj", g.correlation_n_traj}, {"stride", g.stride}, {"max_lag_time", g.max_lag_time},
                 {"probes", g.probes}, {"response_horizon", g.response_horizon},
                 {"response_n_traj", g.response_n_traj}, {"tolerance", g.tolerance}});
    } else if (a.kind == "lyapunov") {
      const auto& l = a.lyapunov;
      an.update({{"theta", l.theta}, {"time", l.time}, {"energies", l.energies}, {"paths", l.paths},
                 {"random_directions", l.random_directions}, {"b_fractions", l.b_fractions}});
    } else if (a.kind == "scaling") {
      an.update({{"energies", a.scaling.energies}, {"unit_time", a.scaling.unit_time},
                 {"random_directions", a.scaling.random_directions}});
    } else if (a.kind == "gle_compare") {
      const auto& g = a.gle;
      an.update({{"onsite", g.onsite}, {"coupling", g.coupling}, {"rate", g.rate}, {"temperature", g.temperature},
                 {"dt", g.dt}, {"horizon", g.horizon}, {"n_traj", g.n_traj}, {"stride", g.stride},
                 {"burn_in_fraction", g.burn_in_fraction}, {"n_sigma", g.n_sigma}});
    }
    doc["analysis"] = an;
  }
  doc["output"] = {{"formats", cfg.output.formats}};
  return doc;
}

}  // namespace ness::io
