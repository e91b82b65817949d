#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <limits>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "ness/error.hpp"
#include "ness/model.hpp"
#include "ness/observables.hpp"
#include "ness/record.hpp"
#include "ness/rng.hpp"

namespace ness {

enum class Scheme { euler_maruyama, splitting };

inline const char* to_string(Scheme s) { return s == Scheme::splitting ? "splitting" : "euler_maruyama"; }

struct IntegratorSpec {
  Scheme scheme = Scheme::splitting;
  double dt = 0.01;
  std::optional<double> cap_G;  ///< abort threshold on G; simulate defaults it to 1e6 x initial scale

  void validate() const {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("time step dt must be > 0");
    if (cap_G && !(*cap_G > 0.0)) throw ConfigError("cap_G must be > 0");
  }
};

/// dt = 0.1 / omega_max with omega_max^2 = (Gershgorin bound on the Hessian of V at the origin)
/// + (largest reservoir rate)^2.
inline double default_time_step(const SystemConfig& c) {
  const std::size_t n = c.vertex_count();
  std::vector<double> row(n, std::abs(c.onsite().second(0.0)));
  const double k2 = std::abs(c.pair().second(0.0));
  for (const Edge& e : c.topology().edges()) {
    row[e.a] += 2.0 * k2;
    row[e.b] += 2.0 * k2;
  }
  double rate = 0.0;
  for (const auto& r : c.reservoirs()) {
    rate = std::max(rate, r.kind == ReservoirKind::langevin ? std::abs(r.coupling) : r.rate);
  }
  const double w2 = *std::max_element(row.begin(), row.end()) + rate * rate;
  return w2 > 0.0 ? 0.1 / std::sqrt(w2) : 0.01;
}

// ---------------------------------------------------------------------------
// Vector field and noise structure

struct PhaseVelocity {
  std::vector<double> dq;
  std::vector<double> dp;
  std::vector<double> dr;
};

/// Deterministic part of the SDE: q' = p, p' = -grad V - (bath coupling), r' = -gamma r + lambda p.
inline PhaseVelocity drift(const SystemConfig& c, const SystemState& s) {
  s.check_shape(c);
  PhaseVelocity v;
  v.dq = s.p;
  v.dp = potential_gradient(c, s.q);
  for (double& x : v.dp) x = -x;
  v.dr.assign(s.r.size(), 0.0);
  const auto& att = c.topology().attachments();
  const bool aux = c.reservoir_kind() == ReservoirKind::markovian_aux;
  for (std::size_t b = 0; b < att.size(); ++b) {
    const auto& res = c.reservoir_of_attachment(b);
    const std::size_t i = att[b].vertex;
    if (aux) {
      v.dp[i] -= res.coupling * s.r[b];
      v.dr[b] = -res.rate * s.r[b] + res.coupling * s.p[i];
    } else {
      v.dp[i] -= res.coupling * s.p[i];
    }
  }
  return v;
}

struct NoiseChannel {
  enum class Coordinate { p, r };
  Coordinate coordinate = Coordinate::r;
  std::size_t index = 0;
  double amplitude = 0.0;
};

/// Noise acts on r_b with amplitude sqrt(2 T gamma) (markovian_aux) or on boundary p_i with
/// sqrt(2 lambda T) (langevin). Zero-amplitude channels are omitted.
inline std::vector<NoiseChannel> diffusion_amplitudes(const SystemConfig& c) {
  std::vector<NoiseChannel> out;
  const auto& att = c.topology().attachments();
  for (std::size_t b = 0; b < att.size(); ++b) {
    const auto& res = c.reservoir_of_attachment(b);
    if (res.kind == ReservoirKind::markovian_aux) {
      const double a = std::sqrt(2.0 * res.temperature * res.rate);
      if (a > 0.0) out.push_back({NoiseChannel::Coordinate::r, b, a});
    } else {
      const double a = std::sqrt(2.0 * std::abs(res.coupling) * res.temperature);
      if (a > 0.0) out.push_back({NoiseChannel::Coordinate::p, att[b].vertex, a});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Integrator

/// One-trajectory stepping engine. Splitting: exact OU half-step of the linear
/// dissipative/stochastic block, leapfrog for the Hamiltonian part, OU half-step again.
/// The OU block of a boundary vertex couples p_i with its auxiliary variables (or carries the
/// Langevin friction on p_i) and is solved exactly via the Van Loan matrix exponential.
/// Holds scratch buffers and a force cache, so one instance per trajectory.
class Integrator {
 public:
  Integrator(const SystemConfig& c, IntegratorSpec spec) : config_(&c), spec_(spec) {
    spec_.validate();
    const std::size_t n = c.vertex_count();
    const auto& edges = c.topology().edges();
    edge_a_.reserve(edges.size());
    for (const Edge& e : edges) {
      edge_a_.push_back(e.a);
      edge_b_.push_back(e.b);
    }
    du1_ = c.onsite().polynomial().derivative().coefficients();
    du2_ = c.pair().polynomial().derivative().coefficients();
    force_.assign(n, 0.0);
    cached_q_.assign(n, std::numeric_limits<double>::quiet_NaN());
    build_couplings();
    if (spec_.scheme == Scheme::splitting) build_ou_blocks(0.5 * spec_.dt);
    else channels_ = diffusion_amplitudes(c);
  }

  const IntegratorSpec& spec() const { return spec_; }
  const SystemConfig& config() const { return *config_; }

  /// Advances by one dt without fault checks.
  void advance(SystemState& s, RandomStream& rng) {
    if (spec_.scheme == Scheme::splitting) advance_splitting(s, rng);
    else advance_euler(s, rng);
    s.t += spec_.dt;
  }

  /// Advances by one dt, raising IntegratorFault on non-finite coordinates or G above cap.
  void step(SystemState& s, RandomStream& rng, std::optional<double> cap = std::nullopt) {
    advance(s, rng);
    check(s, cap ? cap : spec_.cap_G);
  }

  void check(const SystemState& s, std::optional<double> cap) const {
    if (!s.finite()) {
      throw IntegratorFault(IntegratorFault::Kind::non_finite, s.t, state_digest(s),
                            "non-finite coordinate at t=" + format_real(s.t));
    }
    if (cap) {
      const double g = total_energy_G(*config_, s);
      if (g > *cap) {
        throw IntegratorFault(IntegratorFault::Kind::energy_cap, s.t, state_digest(s),
                              "G=" + format_real(g) + " exceeds cap " + format_real(*cap) + " at t=" +
                                  format_real(s.t));
      }
    }
  }

 private:
  struct Coupling {  // markovian attachment: vertex, aux index, lambda, gamma
    std::size_t vertex, aux;
    double lambda, gamma;
  };
  struct OuBlock {
    std::vector<std::size_t> coords;  // coords[0] = p index, rest are r indices (offset by n)
    std::vector<double> F;            // row-major propagator
    std::vector<double> L;            // row-major noise factor, empty if deterministic
  };

  static double horner(const std::vector<double>& c, double x) {
    double acc = 0.0;
    for (std::size_t m = c.size(); m-- > 0;) acc = acc * x + c[m];
    return acc;
  }

  void compute_force(const std::vector<double>& q) {
    const std::size_t n = q.size();
    for (std::size_t i = 0; i < n; ++i) force_[i] = -horner(du1_, q[i]);
    for (std::size_t k = 0; k < edge_a_.size(); ++k) {
      const std::size_t a = edge_a_[k], b = edge_b_[k];
      const double f = horner(du2_, q[a] - q[b]);
      force_[a] -= f;
      force_[b] += f;
    }
    cached_q_ = q;
  }

  void build_couplings() {
    const SystemConfig& c = *config_;
    const auto& att = c.topology().attachments();
    for (std::size_t b = 0; b < att.size(); ++b) {
      const auto& res = c.reservoir_of_attachment(b);
      if (res.kind == ReservoirKind::markovian_aux) {
        couplings_.push_back({att[b].vertex, b, res.coupling, res.rate});
      } else {
        langevin_friction_.push_back({att[b].vertex, b, res.coupling, res.temperature});
      }
    }
  }

  void build_ou_blocks(double h) {
    const SystemConfig& c = *config_;
    const std::size_t n = c.vertex_count();
    const auto& att = c.topology().attachments();
    std::vector<std::vector<std::size_t>> by_vertex(n);
    for (std::size_t b = 0; b < att.size(); ++b) by_vertex[att[b].vertex].push_back(b);
    for (std::size_t v = 0; v < n; ++v) {
      if (by_vertex[v].empty()) continue;
      const bool aux = c.reservoir_kind() == ReservoirKind::markovian_aux;
      const int m = aux ? 1 + static_cast<int>(by_vertex[v].size()) : 1;
      Eigen::MatrixXd drift_m = Eigen::MatrixXd::Zero(m, m), diff = Eigen::MatrixXd::Zero(m, m);
      OuBlock blk;
      blk.coords.push_back(v);
      for (std::size_t k = 0; k < by_vertex[v].size(); ++k) {
        const std::size_t b = by_vertex[v][k];
        const auto& res = c.reservoir_of_attachment(b);
        if (aux) {
          const int j = 1 + static_cast<int>(k);
          blk.coords.push_back(n + b);
          drift_m(0, j) = -res.coupling;
          drift_m(j, 0) = res.coupling;
          drift_m(j, j) = -res.rate;
          diff(j, j) = 2.0 * res.temperature * res.rate;
        } else {
          drift_m(0, 0) -= res.coupling;
          diff(0, 0) += 2.0 * std::abs(res.coupling) * res.temperature;
        }
      }
      Eigen::MatrixXd vl = Eigen::MatrixXd::Zero(2 * m, 2 * m);
      vl.topLeftCorner(m, m) = -drift_m * h;
      vl.topRightCorner(m, m) = diff * h;
      vl.bottomRightCorner(m, m) = drift_m.transpose() * h;
      const Eigen::MatrixXd e = vl.exp();
      const Eigen::MatrixXd prop = e.bottomRightCorner(m, m).transpose();
      Eigen::MatrixXd cov = prop * e.topRightCorner(m, m);
      cov = (0.5 * (cov + cov.transpose())).eval();
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) blk.F.push_back(prop(i, j));
      if (cov.cwiseAbs().maxCoeff() > 0.0) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
        const Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
        const Eigen::MatrixXd lf = es.eigenvectors() * ev.asDiagonal();
        for (int i = 0; i < m; ++i)
          for (int j = 0; j < m; ++j) blk.L.push_back(lf(i, j));
      }
      blocks_.push_back(std::move(blk));
    }
  }

  void apply_ou(SystemState& s, RandomStream& rng) {
    const std::size_t n = s.p.size();
    double x[8], y[8], xi[8];
    for (const OuBlock& blk : blocks_) {
      const std::size_t m = blk.coords.size();
      for (std::size_t i = 0; i < m; ++i) {
        const std::size_t c = blk.coords[i];
        x[i] = c < n ? s.p[c] : s.r[c - n];
      }
      for (std::size_t i = 0; i < m; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < m; ++j) acc += blk.F[i * m + j] * x[j];
        y[i] = acc;
      }
      if (!blk.L.empty()) {
        for (std::size_t j = 0; j < m; ++j) xi[j] = rng.normal();
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < m; ++j) y[i] += blk.L[i * m + j] * xi[j];
      }
      for (std::size_t i = 0; i < m; ++i) {
        const std::size_t c = blk.coords[i];
        (c < n ? s.p[c] : s.r[c - n]) = y[i];
      }
    }
  }

  void advance_splitting(SystemState& s, RandomStream& rng) {
    const double dt = spec_.dt;
    const std::size_t n = s.p.size();
    apply_ou(s, rng);
    if (s.q != cached_q_) compute_force(s.q);
    for (std::size_t i = 0; i < n; ++i) s.p[i] += 0.5 * dt * force_[i];
    for (std::size_t i = 0; i < n; ++i) s.q[i] += dt * s.p[i];
    compute_force(s.q);
    for (std::size_t i = 0; i < n; ++i) s.p[i] += 0.5 * dt * force_[i];
    apply_ou(s, rng);
  }

  void advance_euler(SystemState& s, RandomStream& rng) {
    const double dt = spec_.dt;
    const std::size_t n = s.p.size();
    if (s.q != cached_q_) compute_force(s.q);
    std::vector<double>& dp = scratch_;
    dp.assign(force_.begin(), force_.end());
    std::vector<double> dr(s.r.size(), 0.0);
    for (const Coupling& k : couplings_) {
      dp[k.vertex] -= k.lambda * s.r[k.aux];
      dr[k.aux] = -k.gamma * s.r[k.aux] + k.lambda * s.p[k.vertex];
    }
    for (const Coupling& k : langevin_friction_) dp[k.vertex] -= k.lambda * s.p[k.vertex];
    for (std::size_t i = 0; i < n; ++i) s.q[i] += dt * s.p[i];
    for (std::size_t i = 0; i < n; ++i) s.p[i] += dt * dp[i];
    for (std::size_t b = 0; b < s.r.size(); ++b) s.r[b] += dt * dr[b];
    const double sq = std::sqrt(dt);
    for (const NoiseChannel& ch : channels_) {
      const double inc = ch.amplitude * sq * rng.normal();
      if (ch.coordinate == NoiseChannel::Coordinate::r) s.r[ch.index] += inc;
      else s.p[ch.index] += inc;
    }
  }

  const SystemConfig* config_;
  IntegratorSpec spec_;
  std::vector<std::size_t> edge_a_, edge_b_;
  std::vector<double> du1_, du2_;
  std::vector<double> force_, cached_q_, scratch_;
  std::vector<Coupling> couplings_;
  std::vector<Coupling> langevin_friction_;  // gamma slot holds the temperature
  std::vector<OuBlock> blocks_;
  std::vector<NoiseChannel> channels_;
};

/// One step of the chosen scheme as a value operation.
inline SystemState step(const SystemConfig& c, const SystemState& state, const IntegratorSpec& spec,
                        RandomStream& rng) {
  state.check_shape(c);
  Integrator integ(c, spec);
  SystemState s = state;
  integ.step(s, rng);
  return s;
}

/// cap_G resolution: explicit value, else 1e6 x max(G(state0), dof x max T, 1).
inline double resolve_energy_cap(const SystemConfig& c, const IntegratorSpec& spec, const SystemState& s0) {
  if (spec.cap_G) return *spec.cap_G;
  const double dof = static_cast<double>(2 * c.vertex_count() + c.aux_count());
  return 1e6 * std::max({total_energy_G(c, s0), dof * c.max_temperature(), 1.0});
}

inline std::size_t step_count(double horizon, double dt) {
  if (!(horizon >= 0.0)) throw ConfigError("horizon must be >= 0");
  return static_cast<std::size_t>(std::ceil(horizon / dt - 1e-9));
}

/// Runs `steps` steps from `state`, calling on_sample(k, state) at k = 0 and every `stride`
/// steps. Time is kept as t0 + k dt. Finiteness is checked every step and the energy cap at
/// every sample and every 16 steps. Returns the final state.
template <class OnSample>
SystemState propagate(Integrator& integ, SystemState state, std::size_t steps, RandomStream& rng, std::size_t stride,
                      double cap, OnSample&& on_sample) {
  if (stride == 0) throw ConfigError("sample stride must be >= 1");
  const double t0 = state.t;
  const double dt = integ.spec().dt;
  on_sample(std::size_t{0}, state);
  for (std::size_t k = 1; k <= steps; ++k) {
    integ.advance(state, rng);
    state.t = t0 + static_cast<double>(k) * dt;
    const bool sample = k % stride == 0;
    integ.check(state, (sample || k % 16 == 0) ? std::optional<double>(cap) : std::nullopt);
    if (sample) on_sample(k, state);
  }
  return state;
}

struct SimulationOptions {
  bool store_states = false;
  std::uint64_t stream = 0;
};

/// Runs ceil(horizon/dt) steps from state0 and samples the named observables every `stride`
/// steps. Bit-reproducible given (config, state0, spec, seed, stream).
inline TrajectoryRecord simulate(const SystemConfig& c, const SystemState& state0, const IntegratorSpec& spec,
                                 double horizon, std::uint64_t seed, const std::vector<std::string>& observers,
                                 std::size_t stride = 1, SimulationOptions opt = {}) {
  state0.check_shape(c);
  RandomStream rng(seed, opt.stream);
  Integrator integ(c, spec);
  ObservableSet obs(c, observers);
  TrajectoryRecord rec;
  rec.names = obs.names();
  rec.columns.resize(obs.size());
  rec.seed = seed;
  rec.stream = opt.stream;
  rec.config_hash = config_digest(c);
  std::vector<double> row(obs.size());
  const std::size_t steps = step_count(horizon, spec.dt);
  propagate(integ, state0, steps, rng, stride, resolve_energy_cap(c, spec, state0),
            [&](std::size_t, const SystemState& s) {
              rec.sample_times.push_back(s.t);
              obs.evaluate(s, row);
              for (std::size_t i = 0; i < row.size(); ++i) rec.columns[i].push_back(row[i]);
              if (opt.store_states) rec.states.push_back(s);
            });
  return rec;
}

// ---------------------------------------------------------------------------
// Ensembles

class EnsembleError : public std::runtime_error {
 public:
  EnsembleError(std::vector<std::size_t> failed, const std::string& what, std::exception_ptr first = nullptr)
      : std::runtime_error(what), failed_(std::move(failed)), first_(std::move(first)) {}
  const std::vector<std::size_t>& failed() const { return failed_; }
  /// The exception of the lowest failing item.
  std::exception_ptr first() const { return first_; }

 private:
  std::vector<std::size_t> failed_;
  std::exception_ptr first_;
};

/// Calls fn(i) for i in [0, n) on `workers` threads. Work items must write only to their own
/// slot, which makes results independent of scheduling. Failures are collected and rethrown
/// together as EnsembleError.
template <class Fn>
void for_each_index(std::size_t n, std::size_t workers, Fn&& fn) {
  std::vector<std::size_t> failed;
  std::string messages;
  std::exception_ptr first;
  std::size_t first_index = n;
  std::mutex mu;
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (const std::exception& e) {
        std::lock_guard lock(mu);
        failed.push_back(i);
        if (i < first_index) {
          first_index = i;
          first = std::current_exception();
        }
        if (failed.size() <= 5) messages += "\n  item " + std::to_string(i) + ": " + e.what();
      }
    }
  };
  workers = std::max<std::size_t>(1, std::min(workers, n));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  if (!failed.empty()) {
    std::sort(failed.begin(), failed.end());
    throw EnsembleError(failed, std::to_string(failed.size()) + " of " + std::to_string(n) + " items failed" + messages, first);
  }
}

/// Draws an initial state from the trajectory's own stream.
using StateSampler = std::function<SystemState(RandomStream&)>;

inline StateSampler fixed_state(SystemState s) {
  return [s](RandomStream&) { return s; };
}

/// p, r ~ N(0, T), q = 0, then `burn_in` time units of dynamics on the same stream.
/// Approximates a stationary start for any config.
inline StateSampler burn_in_sampler(const SystemConfig& c, IntegratorSpec spec, double temperature, double burn_in) {
  return [&c, spec, temperature, burn_in](RandomStream& rng) {
    SystemState s = SystemState::zeros(c);
    const double sd = std::sqrt(temperature);
    for (double& x : s.p) x = sd * rng.normal();
    for (double& x : s.r) x = sd * rng.normal();
    Integrator integ(c, spec);
    s = propagate(integ, s, step_count(burn_in, spec.dt), rng, 1, resolve_energy_cap(c, spec, s),
                  [](std::size_t, const SystemState&) {});
    s.t = 0.0;
    return s;
  };
}

/// n_traj trajectories; trajectory i uses stream i of base_seed for both its initial-state
/// draw and its dynamics, so output does not depend on worker count or order.
inline std::vector<TrajectoryRecord> simulate_ensemble(const SystemConfig& c, const StateSampler& sampler,
                                                       const IntegratorSpec& spec, double horizon, std::size_t n_traj,
                                                       std::uint64_t base_seed,
                                                       const std::vector<std::string>& observers,
                                                       std::size_t stride = 1, std::size_t workers = 1) {
  if (n_traj == 0) throw ConfigError("n_traj must be >= 1");
  std::vector<TrajectoryRecord> out(n_traj);
  for_each_index(n_traj, workers, [&](std::size_t i) {
    RandomStream rng(base_seed, i);
    SystemState s0 = sampler(rng);
    Integrator integ(c, spec);
    ObservableSet obs(c, observers);
    TrajectoryRecord rec;
    rec.names = obs.names();
    rec.columns.resize(obs.size());
    rec.seed = base_seed;
    rec.stream = i;
    rec.config_hash = config_digest(c);
    std::vector<double> row(obs.size());
    propagate(integ, s0, step_count(horizon, spec.dt), rng, stride, resolve_energy_cap(c, spec, s0),
              [&](std::size_t, const SystemState& s) {
                rec.sample_times.push_back(s.t);
                obs.evaluate(s, row);
                for (std::size_t k = 0; k < row.size(); ++k) rec.columns[k].push_back(row[k]);
              });
    out[i] = std::move(rec);
  });
  return out;
}

// ---------------------------------------------------------------------------
// Single particle with exponential memory kernel C(t) = lambda^2 exp(-gamma |t|)

class GLEConfig {
 public:
  GLEConfig(Polynomial onsite, double coupling, double rate, double temperature)
      : onsite_(std::move(onsite)), coupling_(coupling), rate_(rate), temperature_(temperature) {
    if (!(rate_ > 0.0)) throw ConfigError("GLE rate gamma must be > 0");
    if (!(temperature_ >= 0.0)) throw ConfigError("GLE temperature must be >= 0");
    if (!PolynomialPotential::is_confining(effective_potential())) {
      throw ConfigError("effective potential V - lambda^2 q^2/2 is not confining");
    }
  }

  const Polynomial& onsite() const { return onsite_; }
  /// V_eff(q) = V(q) - lambda^2 q^2 / 2
  Polynomial effective_potential() const {
    return onsite_ - Polynomial({0.0, 0.0, 0.5 * coupling_ * coupling_});
  }
  double coupling() const { return coupling_; }
  double rate() const { return rate_; }
  double temperature() const { return temperature_; }

  /// The equivalent Markovian system: one site with potential V_eff and one auxiliary variable.
  SystemConfig extended_system() const {
    const PolynomialPotential veff(effective_potential());
    return build_graph(1, {}, {{0, {temperature_, coupling_, rate_, ReservoirKind::markovian_aux}}}, veff,
                       PolynomialPotential::harmonic());
  }

 private:
  Polynomial onsite_;
  double coupling_;
  double rate_;
  double temperature_;
};

/// Integrates q' = p, p' = -V_eff'(q) - M(t) - xi(t) with M(t) = int_0^t C(t-s) p(s) ds and
/// xi a stationary OU process of variance lambda^2 T and rate gamma. The memory integral
/// uses the exact exponential recursion M <- e^{-gamma dt} M + lambda^2 (1 - e^{-gamma dt})/gamma p_mid,
/// so no history is stored (history_truncation is accepted for other kernels and ignored).
/// Samples "p", "q", "xi", "memory".
inline TrajectoryRecord simulate_gle(const GLEConfig& g, double p0, double q0, double dt, double horizon,
                                     std::uint64_t seed, std::size_t stride = 1, double history_truncation = 0.0) {
  (void)history_truncation;
  if (!(dt > 0.0)) throw ConfigError("dt must be > 0");
  if (stride == 0) throw ConfigError("sample stride must be >= 1");
  RandomStream rng(seed, 0);
  const Polynomial force = -1.0 * g.effective_potential().derivative();
  const double lam2 = g.coupling() * g.coupling();
  const double decay = std::exp(-g.rate() * dt);
  const double gain = lam2 * (1.0 - decay) / g.rate();
  const double xi_var = lam2 * g.temperature();
  const double xi_kick = std::sqrt(xi_var * (1.0 - decay * decay));

  TrajectoryRecord rec;
  rec.names = {"p", "q", "xi", "memory"};
  rec.columns.resize(4);
  rec.seed = seed;
  rec.config_hash = digest("gle " + g.onsite().to_string() + " " + format_real(g.coupling()) + " " +
                           format_real(g.rate()) + " " + format_real(g.temperature()));
  double p = p0, q = q0, mem = 0.0, xi = std::sqrt(xi_var) * rng.normal();
  auto sample = [&](double t) {
    rec.sample_times.push_back(t);
    rec.columns[0].push_back(p);
    rec.columns[1].push_back(q);
    rec.columns[2].push_back(xi);
    rec.columns[3].push_back(mem);
  };
  sample(0.0);
  const std::size_t steps = step_count(horizon, dt);
  double f = force(q);
  for (std::size_t k = 1; k <= steps; ++k) {
    const double p_mid = p + 0.5 * dt * (f - mem - xi);
    q += dt * p_mid;
    mem = decay * mem + gain * p_mid;
    xi = decay * xi + xi_kick * rng.normal();
    f = force(q);
    p = p_mid + 0.5 * dt * (f - mem - xi);
    if (!std::isfinite(p) || !std::isfinite(q)) {
      throw IntegratorFault(IntegratorFault::Kind::non_finite, static_cast<double>(k) * dt, "",
                            "GLE integration produced a non-finite value");
    }
    if (k % stride == 0) sample(static_cast<double>(k) * dt);
  }
  return rec;
}

// ---------------------------------------------------------------------------

struct RelaxationResult {
  double G_initial = 0.0;
  double G_final = 0.0;
  std::vector<double> times;
  std::vector<double> decay_curve;  ///< G at each sample time
  SystemState final_state;
};

/// Noiseless evolution (all reservoir temperatures zero) over [0, unit_time].
inline RelaxationResult relax_deterministic(const SystemConfig& c, const SystemState& state0, double dt,
                                            double unit_time = 1.0, std::size_t stride = 1) {
  if (c.max_temperature() != 0.0) throw ConfigError("relax_deterministic needs all reservoir temperatures = 0");
  state0.check_shape(c);
  IntegratorSpec spec{Scheme::splitting, dt, std::nullopt};
  Integrator integ(c, spec);
  RandomStream rng(0, 0);
  RelaxationResult res;
  SystemState s = state0;
  s.t = 0.0;
  res.G_initial = total_energy_G(c, s);
  res.final_state = propagate(integ, s, step_count(unit_time, dt), rng, stride, resolve_energy_cap(c, spec, s),
                              [&](std::size_t, const SystemState& x) {
                                res.times.push_back(x.t);
                                res.decay_curve.push_back(total_energy_G(c, x));
                              });
  res.G_final = total_energy_G(c, res.final_state);
  return res;
}

}  // namespace ness
