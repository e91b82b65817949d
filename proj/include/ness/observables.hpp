#pragma once

#include <cfloat>
#include <charconv>
#include <cmath>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "ness/model.hpp"
#include "ness/record.hpp"

namespace ness {

namespace detail {
inline void require_layered(const SystemConfig& c, const char* what) {
  if (!c.topology().layered()) {
    throw ConfigError(std::string(what) + " needs a chain or hypercube topology");
  }
}
inline void require_two_reservoirs(const SystemConfig& c, const char* what) {
  if (c.reservoirs().size() != 2) throw ConfigError(std::string(what) + " needs exactly two reservoirs");
}
}  // namespace detail

/// Local energies H_1..H_L, one per layer (chain site or hyperplane i_1 = k).
/// Every pair term is split half/half between the layers of its endpoints, so intra-layer
/// terms land fully in their layer and sum_k H_k = H(p, q) exactly.
inline std::vector<double> local_energies(const SystemConfig& c, const SystemState& s) {
  detail::require_layered(c, "local_energies");
  const auto& topo = c.topology();
  std::vector<double> h(topo.layer_count(), 0.0);
  for (std::size_t v = 0; v < topo.vertex_count(); ++v) {
    h[topo.layer_of(v)] += 0.5 * s.p[v] * s.p[v] + c.onsite().value(s.q[v]);
  }
  for (const Edge& e : topo.edges()) {
    const double half = 0.5 * c.pair().value(s.q[e.a] - s.q[e.b]);
    h[topo.layer_of(e.a)] += half;
    h[topo.layer_of(e.b)] += half;
  }
  return h;
}

/// Energy flow from the system into the reservoir of each attachment.
/// markovian_aux: lambda r p. langevin: lambda (p^2 - T), the Ito-corrected mean form.
inline std::vector<double> bath_flows(const SystemConfig& c, const SystemState& s) {
  const auto& att = c.topology().attachments();
  std::vector<double> out(att.size());
  const bool aux = c.reservoir_kind() == ReservoirKind::markovian_aux;
  for (std::size_t b = 0; b < att.size(); ++b) {
    const auto& res = c.reservoir_of_attachment(b);
    const double p = s.p[att[b].vertex];
    out[b] = aux ? res.coupling * s.r[b] * p : res.coupling * (p * p - res.temperature);
  }
  return out;
}

/// Heat flows Phi_0..Phi_L on a layered topology. Phi_0 is the flow from the left reservoir
/// into the first layer, Phi_j (0 < j < L) the flow from layer j to layer j+1, Phi_L the flow
/// from the last layer into the right reservoir. Positive means left-to-right transport, and
/// dH_i/dt = Phi_{i-1} - Phi_i.
inline std::vector<double> heat_flows(const SystemConfig& c, const SystemState& s) {
  detail::require_layered(c, "heat_flows");
  const auto& topo = c.topology();
  const std::size_t layers = topo.layer_count();
  std::vector<double> phi(layers + 1, 0.0);
  const auto bf = bath_flows(c, s);
  for (std::size_t b = 0; b < bf.size(); ++b) {
    if (topo.attachments()[b].reservoir == 0) phi[0] -= bf[b];
    else phi[layers] += bf[b];
  }
  for (const Edge& e : topo.edges()) {
    const std::size_t la = topo.layer_of(e.a), lb = topo.layer_of(e.b);
    if (la == lb) continue;
    phi[lb] += 0.5 * (s.p[e.a] + s.p[e.b]) * c.pair().first(s.q[e.a] - s.q[e.b]);
  }
  return phi;
}

/// Allocation-free evaluator of a single flow Phi_j, for per-step accumulation loops.
class FlowProbe {
 public:
  FlowProbe(const SystemConfig& c, std::size_t j) : config_(&c) {
    detail::require_layered(c, "FlowProbe");
    const auto& topo = c.topology();
    const std::size_t layers = topo.layer_count();
    if (j > layers) throw std::out_of_range("flow index out of range");
    const auto& att = topo.attachments();
    for (std::size_t b = 0; b < att.size(); ++b) {
      if ((j == 0 && att[b].reservoir == 0) || (j == layers && att[b].reservoir != 0)) {
        baths_.push_back({b, att[b].vertex, j == 0 ? -1.0 : 1.0});
      }
    }
    for (const Edge& e : topo.edges()) {
      if (topo.layer_of(e.a) != topo.layer_of(e.b) && topo.layer_of(e.b) == j) edges_.push_back(e);
    }
    aux_ = c.reservoir_kind() == ReservoirKind::markovian_aux;
  }

  double operator()(const SystemState& s) const {
    const SystemConfig& c = *config_;
    double phi = 0.0;
    for (const auto& b : baths_) {
      const auto& res = c.reservoir_of_attachment(b.attachment);
      const double p = s.p[b.vertex];
      phi += b.sign * (aux_ ? res.coupling * s.r[b.attachment] * p : res.coupling * (p * p - res.temperature));
    }
    for (const Edge& e : edges_) phi += 0.5 * (s.p[e.a] + s.p[e.b]) * c.pair().first(s.q[e.a] - s.q[e.b]);
    return phi;
  }

 private:
  struct Bath {
    std::size_t attachment, vertex;
    double sign;
  };
  const SystemConfig* config_;
  std::vector<Bath> baths_;
  std::vector<Edge> edges_;
  bool aux_ = true;
};

/// Inverse-temperature difference beta_R - beta_L (reservoir 1 minus reservoir 0).
inline double delta_beta(const SystemConfig& c) {
  detail::require_two_reservoirs(c, "entropy production");
  const double tl = c.reservoirs()[0].temperature, tr = c.reservoirs()[1].temperature;
  if (!(tl > 0.0 && tr > 0.0)) throw std::domain_error("entropy production undefined at zero temperature");
  return 1.0 / tr - 1.0 / tl;
}

/// sigma_j = (1/T_R - 1/T_L) Phi_j. Nonnegative in mean; identically zero at equal temperatures.
inline double entropy_production(const SystemConfig& c, const SystemState& s, std::size_t j) {
  const double db = delta_beta(c);
  const auto phi = heat_flows(c, s);
  if (j >= phi.size()) throw std::out_of_range("flow index out of range");
  return db * phi[j];
}

/// Boundary variant: flow into each reservoir over its temperature, Phi_L/T_R - Phi_0/T_L.
inline double boundary_entropy_production(const SystemConfig& c, const SystemState& s) {
  delta_beta(c);
  const auto phi = heat_flows(c, s);
  return phi.back() / c.reservoirs()[1].temperature - phi.front() / c.reservoirs()[0].temperature;
}

/// Entropy production for arbitrary graphs: sum over attachments of (flow into reservoir) / T.
inline double graph_entropy_production(const SystemConfig& c, const SystemState& s) {
  const auto bf = bath_flows(c, s);
  double sigma = 0.0;
  for (std::size_t b = 0; b < bf.size(); ++b) {
    const double t = c.reservoir_of_attachment(b).temperature;
    if (!(t > 0.0)) throw std::domain_error("entropy production undefined at zero temperature");
    sigma += bf[b] / t;
  }
  return sigma;
}

/// Two-temperature Gibbs exponent
/// R_j = (1/T_L)(r_L^2/2 + sum_{k<=j} H_k) + (1/T_R)(sum_{k>j} H_k + r_R^2/2), j = 0..L.
inline double two_temperature_weight(const SystemConfig& c, const SystemState& s, std::size_t j) {
  detail::require_two_reservoirs(c, "two_temperature_weight");
  const double tl = c.reservoirs()[0].temperature, tr = c.reservoirs()[1].temperature;
  if (!(tl > 0.0 && tr > 0.0)) throw std::domain_error("two_temperature_weight needs positive temperatures");
  const auto h = local_energies(c, s);
  if (j > h.size()) throw std::out_of_range("R_j index out of range");
  double left = 0.0, right = 0.0;
  for (std::size_t k = 0; k < h.size(); ++k) (k < j ? left : right) += h[k];
  const auto& att = c.topology().attachments();
  for (std::size_t b = 0; b < s.r.size(); ++b) {
    (att[b].reservoir == 0 ? left : right) += 0.5 * s.r[b] * s.r[b];
  }
  return left / tl + right / tr;
}

struct LyapunovWeight {
  double log_value = 0.0;  ///< theta * G
  double value = 1.0;      ///< exp(theta G), saturated at DBL_MAX
  bool overflow = false;
  bool theta_in_range = true;  ///< 0 <= theta < 1 / max T
};

/// W_theta = exp(theta G).
inline LyapunovWeight lyapunov_weight(const SystemConfig& c, const SystemState& s, double theta) {
  LyapunovWeight w;
  w.log_value = theta * total_energy_G(c, s);
  const double tmax = c.max_temperature();
  w.theta_in_range = theta >= 0.0 && (tmax == 0.0 || theta * tmax < 1.0);
  if (w.log_value > std::log(DBL_MAX)) {
    w.overflow = true;
    w.value = DBL_MAX;
  } else {
    w.value = std::exp(w.log_value);
  }
  return w;
}

// ---------------------------------------------------------------------------
// Named observables. Indices in names are 1-based for sites/layers/aux variables
// (H_i, p_i, q_i, r_b, bathflow_b) and 0-based for flows (Phi_j, sigma_j, R_j), matching
// Phi_0..Phi_n.

struct Observable {
  enum class Kind { G, H, local_energy, flow, sigma, sigma_b, sigma_graph, R, W_theta, log_W_theta, p, q, r, bath_flow };
  Kind kind = Kind::G;
  std::size_t index = 0;  // 0-based
  double parameter = 0.0;
  std::string name;
};

namespace detail {
inline bool parse_index(std::string_view s, std::size_t& out) {
  if (s.empty()) return false;
  auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size();
}
inline bool parse_paren_real(std::string_view s, double& out) {
  if (s.size() < 3 || s.front() != '(' || s.back() != ')') return false;
  try {
    std::size_t used = 0;
    std::string inner(s.substr(1, s.size() - 2));
    out = std::stod(inner, &used);
    return used == inner.size();
  } catch (const std::exception&) {
    return false;
  }
}
}  // namespace detail

inline Observable parse_observable(std::string_view name, const SystemConfig& c) {
  using K = Observable::Kind;
  Observable o;
  o.name = std::string(name);
  auto bad = [&](const std::string& why) { return ConfigError("observable '" + o.name + "': " + why); };
  auto indexed = [&](std::string_view prefix, K kind, std::size_t count, bool one_based) {
    std::size_t idx = 0;
    if (!detail::parse_index(name.substr(prefix.size()), idx)) throw bad("bad index");
    if (one_based) {
      if (idx == 0) throw bad("index is 1-based");
      --idx;
    }
    if (idx >= count) throw bad("index out of range");
    o.kind = kind;
    o.index = idx;
    return o;
  };
  const std::size_t n = c.vertex_count();
  const std::size_t layers = c.topology().layered() ? c.topology().layer_count() : 0;
  if (name == "G") return o.kind = K::G, o;
  if (name == "H") return o.kind = K::H, o;
  if (name == "sigma_b") {
    if (!layers) throw bad("needs a layered topology");
    return o.kind = K::sigma_b, o;
  }
  if (name == "sigma") return o.kind = K::sigma_graph, o;
  if (name.starts_with("logW_theta")) {
    if (!detail::parse_paren_real(name.substr(10), o.parameter)) throw bad("expected logW_theta(<theta>)");
    return o.kind = K::log_W_theta, o;
  }
  if (name.starts_with("W_theta")) {
    if (!detail::parse_paren_real(name.substr(7), o.parameter)) throw bad("expected W_theta(<theta>)");
    return o.kind = K::W_theta, o;
  }
  if (name.starts_with("bathflow_")) return indexed("bathflow_", K::bath_flow, c.topology().attachments().size(), true);
  if (name.starts_with("Phi_")) {
    if (!layers) throw bad("needs a layered topology");
    return indexed("Phi_", K::flow, layers + 1, false);
  }
  if (name.starts_with("sigma_")) {
    if (!layers) throw bad("needs a layered topology");
    return indexed("sigma_", K::sigma, layers + 1, false);
  }
  if (name.starts_with("R_")) {
    if (!layers) throw bad("needs a layered topology");
    return indexed("R_", K::R, layers + 1, false);
  }
  if (name.starts_with("H_")) {
    if (!layers) throw bad("needs a layered topology");
    return indexed("H_", K::local_energy, layers, true);
  }
  if (name.starts_with("p_")) return indexed("p_", K::p, n, true);
  if (name.starts_with("q_")) return indexed("q_", K::q, n, true);
  if (name.starts_with("r_")) return indexed("r_", K::r, c.aux_count(), true);
  throw bad("unknown observable");
}

/// Evaluates a fixed list of observables, sharing flow/energy computations per state.
class ObservableSet {
 public:
  ObservableSet(const SystemConfig& c, const std::vector<std::string>& names) : config_(&c) {
    for (const auto& n : names) obs_.push_back(parse_observable(n, c));
  }

  std::size_t size() const { return obs_.size(); }
  const std::vector<Observable>& observables() const { return obs_; }
  std::vector<std::string> names() const {
    std::vector<std::string> out;
    for (const auto& o : obs_) out.push_back(o.name);
    return out;
  }

  void evaluate(const SystemState& s, std::span<double> out) const {
    using K = Observable::Kind;
    const SystemConfig& c = *config_;
    std::vector<double> flows, energies;
    auto need_flows = [&] {
      if (flows.empty()) flows = heat_flows(c, s);
    };
    auto need_energies = [&] {
      if (energies.empty()) energies = local_energies(c, s);
    };
    for (std::size_t i = 0; i < obs_.size(); ++i) {
      const auto& o = obs_[i];
      switch (o.kind) {
        case K::G: out[i] = total_energy_G(c, s); break;
        case K::H: out[i] = hamiltonian(c, s); break;
        case K::local_energy: need_energies(); out[i] = energies[o.index]; break;
        case K::flow: need_flows(); out[i] = flows[o.index]; break;
        case K::sigma: need_flows(); out[i] = delta_beta(c) * flows[o.index]; break;
        case K::sigma_b: out[i] = boundary_entropy_production(c, s); break;
        case K::sigma_graph: out[i] = graph_entropy_production(c, s); break;
        case K::R: out[i] = two_temperature_weight(c, s, o.index); break;
        case K::W_theta: out[i] = lyapunov_weight(c, s, o.parameter).value; break;
        case K::log_W_theta: out[i] = lyapunov_weight(c, s, o.parameter).log_value; break;
        case K::p: out[i] = s.p[o.index]; break;
        case K::q: out[i] = s.q[o.index]; break;
        case K::r: out[i] = s.r[o.index]; break;
        case K::bath_flow: out[i] = bath_flows(c, s)[o.index]; break;
      }
    }
  }

 private:
  const SystemConfig* config_;
  std::vector<Observable> obs_;
};

// ---------------------------------------------------------------------------

struct EntropyAccumulator {
  std::size_t j = 0;
  double integral = 0.0;  ///< int_0^t sigma_j ds
  double t = 0.0;         ///< elapsed time since the first sample
  double average = 0.0;   ///< integral / t; the first sample's value at t = 0
};

/// Trapezoidal running integral of a sampled series; the first entry has t = 0.
inline std::vector<EntropyAccumulator> accumulate_series(std::span<const double> times, std::span<const double> values,
                                                         std::size_t j) {
  std::vector<EntropyAccumulator> out;
  out.reserve(times.size());
  EntropyAccumulator acc{j, 0.0, 0.0, values.empty() ? 0.0 : values.front()};
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (i > 0) {
      acc.integral += 0.5 * (values[i] + values[i - 1]) * (times[i] - times[i - 1]);
      acc.t = times[i] - times.front();
      acc.average = acc.integral / acc.t;
    }
    out.push_back(acc);
  }
  return out;
}

/// Running int sigma_j ds from a record that sampled "sigma_j".
inline std::vector<EntropyAccumulator> accumulate_entropy(const TrajectoryRecord& rec, std::size_t j) {
  return accumulate_series(rec.sample_times, rec.series("sigma_" + std::to_string(j)), j);
}

/// Same, falling back to "Phi_j" scaled by (1/T_R - 1/T_L) when sigma_j was not sampled.
inline std::vector<EntropyAccumulator> accumulate_entropy(const TrajectoryRecord& rec, std::size_t j,
                                                          const SystemConfig& c) {
  const std::string sigma = "sigma_" + std::to_string(j);
  if (rec.has(sigma)) return accumulate_entropy(rec, j);
  const double db = delta_beta(c);
  std::vector<double> values = rec.series("Phi_" + std::to_string(j));
  for (double& v : values) v *= db;
  return accumulate_series(rec.sample_times, values, j);
}

}  // namespace ness
