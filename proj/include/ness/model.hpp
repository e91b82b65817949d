#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "ness/error.hpp"
#include "ness/polynomial.hpp"

namespace ness {

enum class ReservoirKind {
  markovian_aux,  ///< one auxiliary coordinate r per attachment, noise on r
  langevin,       ///< friction -lambda p and noise sqrt(2 lambda T) directly on p
};

inline const char* to_string(ReservoirKind k) {
  return k == ReservoirKind::markovian_aux ? "markovian_aux" : "langevin";
}

struct ReservoirSpec {
  double temperature = 1.0;
  double coupling = 1.0;  ///< lambda
  double rate = 1.0;      ///< gamma; langevin reservoirs use the coupling as friction instead
  ReservoirKind kind = ReservoirKind::markovian_aux;

  void validate() const {
    if (!std::isfinite(temperature) || temperature < 0.0) {
      throw ConfigError("reservoir temperature must be finite and >= 0");
    }
    if (!std::isfinite(coupling)) throw ConfigError("reservoir coupling must be finite");
    if (kind == ReservoirKind::markovian_aux && !(rate > 0.0 && std::isfinite(rate))) {
      throw ConfigError("reservoir rate gamma must be > 0");
    }
  }
};

enum class TopologyKind { chain, hypercube, general };

inline const char* to_string(TopologyKind k) {
  switch (k) {
    case TopologyKind::chain: return "chain";
    case TopologyKind::hypercube: return "hypercube";
    default: return "general";
  }
}

/// Undirected edge stored with a < b; the pair potential is evaluated at q_a - q_b.
struct Edge {
  std::size_t a = 0;
  std::size_t b = 0;
  friend bool operator==(const Edge&, const Edge&) = default;
};

struct Attachment {
  std::size_t vertex = 0;
  std::size_t reservoir = 0;
};

/// Vertices, edges and reservoir attachments. Chains and hypercubes are "layered":
/// every vertex belongs to a layer (a site of the chain, a hyperplane i_1 = k of the cube)
/// and reservoir 0 / 1 sit on the first / last layer.
class LatticeTopology {
 public:
  static LatticeTopology chain(std::size_t n) {
    if (n == 0) throw ConfigError("chain needs at least one site");
    LatticeTopology t;
    t.kind_ = TopologyKind::chain;
    t.vertex_count_ = n;
    for (std::size_t i = 0; i + 1 < n; ++i) t.edges_.push_back({i, i + 1});
    t.attachments_ = {{0, 0}, {n - 1, 1}};
    t.layer_count_ = n;
    t.layer_stride_ = 1;
    t.finish();
    return t;
  }

  /// Cube {-N..N}^dim, vertex index sum_k (i_k + N) w^(dim-1-k) with w = 2N+1, so the
  /// hyperplane i_1 = k is a contiguous block of indices.
  static LatticeTopology hypercube(std::size_t side, std::size_t dim, std::size_t vertex_cap = 1'000'000) {
    if (side == 0) throw ConfigError("hypercube side N must be >= 1");
    if (dim == 0) throw ConfigError("hypercube dimension must be >= 1");
    const std::size_t w = 2 * side + 1;
    std::size_t count = 1;
    for (std::size_t k = 0; k < dim; ++k) {
      if (count > vertex_cap / w) {
        throw ConfigError("hypercube vertex count exceeds cap of " + std::to_string(vertex_cap));
      }
      count *= w;
    }
    LatticeTopology t;
    t.kind_ = TopologyKind::hypercube;
    t.vertex_count_ = count;
    t.side_ = side;
    t.dim_ = dim;
    t.layer_count_ = w;
    t.layer_stride_ = count / w;
    for (std::size_t v = 0; v < count; ++v) {
      std::size_t stride = count;
      for (std::size_t k = 0; k < dim; ++k) {
        stride /= w;
        if ((v / stride) % w + 1 < w) t.edges_.push_back({v, v + stride});
      }
    }
    for (std::size_t v = 0; v < t.layer_stride_; ++v) t.attachments_.push_back({v, 0});
    for (std::size_t v = count - t.layer_stride_; v < count; ++v) t.attachments_.push_back({v, 1});
    t.finish();
    return t;
  }

  static LatticeTopology general(std::size_t vertex_count, std::vector<Edge> edges,
                                 std::vector<Attachment> attachments) {
    if (vertex_count == 0) throw ConfigError("graph needs at least one vertex");
    LatticeTopology t;
    t.kind_ = TopologyKind::general;
    t.vertex_count_ = vertex_count;
    for (Edge e : edges) {
      if (e.a == e.b) throw ConfigError("self-loop at vertex " + std::to_string(e.a));
      if (e.a > e.b) std::swap(e.a, e.b);
      if (e.b >= vertex_count) throw ConfigError("edge references vertex outside the vertex set");
      if (std::find(t.edges_.begin(), t.edges_.end(), e) != t.edges_.end()) {
        throw ConfigError("duplicate edge (" + std::to_string(e.a) + "," + std::to_string(e.b) + ")");
      }
      t.edges_.push_back(e);
    }
    for (const Attachment& a : attachments) {
      if (a.vertex >= vertex_count) {
        throw ConfigError("boundary vertex " + std::to_string(a.vertex) + " is not in the vertex set");
      }
    }
    t.attachments_ = std::move(attachments);
    t.finish();
    return t;
  }

  TopologyKind kind() const { return kind_; }
  std::size_t vertex_count() const { return vertex_count_; }
  const std::vector<Edge>& edges() const { return edges_; }
  const std::vector<Attachment>& attachments() const { return attachments_; }
  bool connected() const { return connected_; }

  bool layered() const { return kind_ != TopologyKind::general; }
  std::size_t layer_count() const { return layer_count_; }
  std::size_t layer_of(std::size_t v) const { return v / layer_stride_; }
  std::size_t side() const { return side_; }
  std::size_t dimension() const { return dim_; }

  /// Lattice coordinates in {-N..N}^dim of a hypercube vertex.
  std::vector<long> coordinates(std::size_t v) const {
    std::vector<long> c(dim_);
    const std::size_t w = 2 * side_ + 1;
    for (std::size_t k = dim_; k-- > 0;) {
      c[k] = static_cast<long>(v % w) - static_cast<long>(side_);
      v /= w;
    }
    return c;
  }

 private:
  void finish() {
    if (attachments_.empty()) throw ConfigError("topology needs at least one boundary vertex");
    std::vector<std::size_t> parent(vertex_count_);
    std::iota(parent.begin(), parent.end(), std::size_t{0});
    auto find = [&](std::size_t x) {
      while (parent[x] != x) x = parent[x] = parent[parent[x]];
      return x;
    };
    std::size_t components = vertex_count_;
    for (const Edge& e : edges_) {
      std::size_t ra = find(e.a), rb = find(e.b);
      if (ra != rb) {
        parent[ra] = rb;
        --components;
      }
    }
    connected_ = components == 1;
  }

  TopologyKind kind_ = TopologyKind::general;
  std::size_t vertex_count_ = 0;
  std::vector<Edge> edges_;
  std::vector<Attachment> attachments_;
  bool connected_ = true;
  std::size_t layer_count_ = 0;
  std::size_t layer_stride_ = 1;
  std::size_t side_ = 0;
  std::size_t dim_ = 1;
};

/// Topology + on-site potential U1 + pair potential U2 + reservoirs; fully determines the SDE.
/// Immutable after construction.
class SystemConfig {
 public:
  SystemConfig(LatticeTopology topology, PolynomialPotential onsite, PolynomialPotential pair,
               std::vector<ReservoirSpec> reservoirs)
      : topology_(std::move(topology)),
        onsite_(std::move(onsite)),
        pair_(std::move(pair)),
        reservoirs_(std::move(reservoirs)) {
    if (reservoirs_.empty()) throw ConfigError("at least one reservoir is required");
    for (const auto& r : reservoirs_) {
      r.validate();
      if (r.kind != reservoirs_.front().kind) throw ConfigError("all reservoirs must share one kind");
    }
    for (const auto& a : topology_.attachments()) {
      if (a.reservoir >= reservoirs_.size()) throw ConfigError("attachment references unknown reservoir");
    }
    if (pair_.degree() < onsite_.degree()) {
      warnings_.push_back("pair degree k2=" + std::to_string(pair_.degree()) + " < onsite degree k1=" +
                          std::to_string(onsite_.degree()) + " (breather regime, k2 >= k1 violated)");
    }
    if (!topology_.connected()) {
      warnings_.push_back("graph is disconnected; components evolve independently");
    }
    aux_count_ = reservoir_kind() == ReservoirKind::markovian_aux ? topology_.attachments().size() : 0;
  }

  const LatticeTopology& topology() const { return topology_; }
  const PolynomialPotential& onsite() const { return onsite_; }
  const PolynomialPotential& pair() const { return pair_; }
  const std::vector<ReservoirSpec>& reservoirs() const { return reservoirs_; }
  ReservoirKind reservoir_kind() const { return reservoirs_.front().kind; }
  std::size_t vertex_count() const { return topology_.vertex_count(); }
  /// Auxiliary coordinates, one per attachment (in attachment order) for markovian_aux.
  std::size_t aux_count() const { return aux_count_; }
  const std::vector<std::string>& warnings() const { return warnings_; }

  const ReservoirSpec& reservoir_of_attachment(std::size_t a) const {
    return reservoirs_[topology_.attachments()[a].reservoir];
  }
  double max_temperature() const {
    double t = 0.0;
    for (const auto& r : reservoirs_) t = std::max(t, r.temperature);
    return t;
  }
  double min_temperature() const {
    double t = reservoirs_.front().temperature;
    for (const auto& r : reservoirs_) t = std::min(t, r.temperature);
    return t;
  }
  bool equilibrium() const { return max_temperature() == min_temperature(); }

  /// Same config with reservoir temperatures replaced (in reservoir order).
  SystemConfig with_temperatures(std::span<const double> temperatures) const {
    if (temperatures.size() != reservoirs_.size()) throw ConfigError("temperature count mismatch");
    auto res = reservoirs_;
    for (std::size_t i = 0; i < res.size(); ++i) res[i].temperature = temperatures[i];
    return SystemConfig(topology_, onsite_, pair_, std::move(res));
  }

  /// Canonical text form; the config digest hashes this.
  std::string canonical_text() const {
    std::ostringstream os;
    os.precision(17);
    os << "topology " << to_string(topology_.kind()) << " vertices " << topology_.vertex_count()
       << " side " << topology_.side() << " dim " << topology_.dimension() << "\nedges";
    for (const auto& e : topology_.edges()) os << ' ' << e.a << '-' << e.b;
    os << "\nattach";
    for (const auto& a : topology_.attachments()) os << ' ' << a.vertex << ':' << a.reservoir;
    os << "\nonsite";
    for (double c : onsite_.polynomial().coefficients()) os << ' ' << c;
    os << "\npair";
    for (double c : pair_.polynomial().coefficients()) os << ' ' << c;
    for (const auto& r : reservoirs_) {
      os << "\nreservoir " << to_string(r.kind) << ' ' << r.temperature << ' ' << r.coupling << ' '
         << r.rate;
    }
    return os.str();
  }

 private:
  LatticeTopology topology_;
  PolynomialPotential onsite_;
  PolynomialPotential pair_;
  std::vector<ReservoirSpec> reservoirs_;
  std::vector<std::string> warnings_;
  std::size_t aux_count_ = 0;
};

/// Phase point (p, q, r) at time t.
struct SystemState {
  std::vector<double> p;
  std::vector<double> q;
  std::vector<double> r;
  double t = 0.0;

  static SystemState zeros(const SystemConfig& c) {
    SystemState s;
    s.p.assign(c.vertex_count(), 0.0);
    s.q.assign(c.vertex_count(), 0.0);
    s.r.assign(c.aux_count(), 0.0);
    return s;
  }

  void check_shape(const SystemConfig& c) const {
    if (p.size() != c.vertex_count() || q.size() != c.vertex_count() || r.size() != c.aux_count()) {
      throw ConfigError("state shape does not match config");
    }
  }

  bool finite() const {
    auto ok = [](const std::vector<double>& v) {
      return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
    };
    return ok(p) && ok(q) && ok(r) && std::isfinite(t);
  }

  friend bool operator==(const SystemState&, const SystemState&) = default;
};

namespace detail {
inline std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t h = 1469598103934665603ull) {
  const auto* b = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= b[i];
    h *= 1099511628211ull;
  }
  return h;
}
inline std::string hex64(std::uint64_t h) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, h >>= 4) s[static_cast<std::size_t>(i)] = digits[h & 0xf];
  return s;
}
}  // namespace detail

inline std::string digest(const std::string& text) {
  return detail::hex64(detail::fnv1a(text.data(), text.size()));
}
inline std::string config_digest(const SystemConfig& c) { return digest(c.canonical_text()); }
inline std::string state_digest(const SystemState& s) {
  std::uint64_t h = detail::fnv1a(s.p.data(), s.p.size() * sizeof(double));
  h = detail::fnv1a(s.q.data(), s.q.size() * sizeof(double), h);
  h = detail::fnv1a(s.r.data(), s.r.size() * sizeof(double), h);
  h = detail::fnv1a(&s.t, sizeof(double), h);
  return detail::hex64(h);
}

// ---------------------------------------------------------------------------
// Builders

inline SystemConfig build_chain(std::size_t n, const PolynomialPotential& onsite, const PolynomialPotential& pair,
                                double t_left, double t_right, double coupling, double rate) {
  return SystemConfig(LatticeTopology::chain(n), onsite, pair,
                      {{t_left, coupling, rate, ReservoirKind::markovian_aux},
                       {t_right, coupling, rate, ReservoirKind::markovian_aux}});
}

/// Langevin baths on the faces i_1 = -N (T_L) and i_1 = N (T_R). Friction and noise
/// amplitude share the coupling lambda.
inline SystemConfig build_hypercube(std::size_t side, std::size_t dim, const PolynomialPotential& onsite,
                                    const PolynomialPotential& pair, double t_left, double t_right,
                                    double coupling, std::size_t vertex_cap = 1'000'000) {
  return SystemConfig(LatticeTopology::hypercube(side, dim, vertex_cap), onsite, pair,
                      {{t_left, coupling, coupling, ReservoirKind::langevin},
                       {t_right, coupling, coupling, ReservoirKind::langevin}});
}

/// One reservoir per listed bath, in order. Baths default to langevin kind; markovian_aux
/// baths are accepted too as long as the kinds agree.
inline SystemConfig build_graph(std::size_t vertex_count, const std::vector<Edge>& edges,
                                const std::vector<std::pair<std::size_t, ReservoirSpec>>& baths,
                                const PolynomialPotential& onsite, const PolynomialPotential& pair) {
  std::vector<Attachment> attachments;
  std::vector<ReservoirSpec> reservoirs;
  for (const auto& [vertex, spec] : baths) {
    attachments.push_back({vertex, reservoirs.size()});
    reservoirs.push_back(spec);
  }
  return SystemConfig(LatticeTopology::general(vertex_count, edges, std::move(attachments)), onsite, pair,
                      std::move(reservoirs));
}

// ---------------------------------------------------------------------------
// Energies

inline double potential_energy(const SystemConfig& c, std::span<const double> q) {
  if (q.size() != c.vertex_count()) throw ConfigError("position vector length mismatch");
  double v = 0.0;
  for (double x : q) v += c.onsite().value(x);
  for (const Edge& e : c.topology().edges()) v += c.pair().value(q[e.a] - q[e.b]);
  return v;
}

/// grad V written into `out` (size vertex_count).
inline void potential_gradient(const SystemConfig& c, std::span<const double> q, std::span<double> out) {
  const auto& u1 = c.onsite();
  const auto& u2 = c.pair();
  for (std::size_t i = 0; i < q.size(); ++i) out[i] = u1.first(q[i]);
  for (const Edge& e : c.topology().edges()) {
    const double f = u2.first(q[e.a] - q[e.b]);
    out[e.a] += f;
    out[e.b] -= f;
  }
}

inline std::vector<double> potential_gradient(const SystemConfig& c, std::span<const double> q) {
  if (q.size() != c.vertex_count()) throw ConfigError("position vector length mismatch");
  std::vector<double> g(q.size());
  potential_gradient(c, q, g);
  return g;
}

inline double kinetic_energy(const SystemState& s) {
  double k = 0.0;
  for (double x : s.p) k += 0.5 * x * x;
  return k;
}

/// H(p, q) = sum p^2/2 + V(q)
inline double hamiltonian(const SystemConfig& c, const SystemState& s) {
  return kinetic_energy(s) + potential_energy(c, s.q);
}

/// G = sum r^2/2 + H(p, q); equals H for langevin reservoirs.
inline double total_energy_G(const SystemConfig& c, const SystemState& s) {
  double g = hamiltonian(c, s);
  for (double x : s.r) g += 0.5 * x * x;
  return g;
}

}  // namespace ness
