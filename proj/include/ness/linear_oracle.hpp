#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "ness/dynamics.hpp"
#include "ness/error.hpp"
#include "ness/model.hpp"
#include "ness/observables.hpp"

namespace ness {

/// Linear SDE dx = A x dt + B dW for quadratic potentials. State ordering (q, p, r):
/// q_0..q_{n-1}, p_0..p_{n-1}, r_0..r_{m-1}.
struct LinearModel {
  Eigen::MatrixXd A;
  Eigen::MatrixXd B;
  Eigen::MatrixXd K;  ///< Hessian of V (force constant matrix)
  std::size_t vertex_count = 0;
  std::size_t aux_count = 0;
  std::vector<std::size_t> damped_vertices;  ///< vertices with a reservoir attached

  std::size_t state_dim() const { return static_cast<std::size_t>(A.rows()); }
  std::size_t noise_dim() const { return static_cast<std::size_t>(B.cols()); }
};

inline Eigen::VectorXd to_vector(const SystemState& s) {
  Eigen::VectorXd x(static_cast<Eigen::Index>(2 * s.q.size() + s.r.size()));
  Eigen::Index k = 0;
  for (double v : s.q) x(k++) = v;
  for (double v : s.p) x(k++) = v;
  for (double v : s.r) x(k++) = v;
  return x;
}

inline SystemState to_state(const SystemConfig& c, const Eigen::VectorXd& x) {
  SystemState s = SystemState::zeros(c);
  if (static_cast<std::size_t>(x.size()) != 2 * s.q.size() + s.r.size()) throw ConfigError("state vector length mismatch");
  Eigen::Index k = 0;
  for (double& v : s.q) v = x(k++);
  for (double& v : s.p) v = x(k++);
  for (double& v : s.r) v = x(k++);
  return s;
}

inline LinearModel assemble_linear(const SystemConfig& c) {
  const Polynomial& u1 = c.onsite().polynomial();
  const Polynomial& u2 = c.pair().polynomial();
  if (u1.degree() > 2 || u2.degree() > 2) throw ConfigError("linear model needs quadratic potentials");
  if (u1.coefficient(1) != 0.0 || u2.coefficient(1) != 0.0) {
    throw ConfigError("linear model needs potentials without linear terms");
  }
  const auto n = static_cast<Eigen::Index>(c.vertex_count());
  const auto m = static_cast<Eigen::Index>(c.aux_count());
  LinearModel lm;
  lm.vertex_count = c.vertex_count();
  lm.aux_count = c.aux_count();
  lm.K = Eigen::MatrixXd::Identity(n, n) * (2.0 * u1.coefficient(2));
  const double k2 = 2.0 * u2.coefficient(2);
  for (const Edge& e : c.topology().edges()) {
    const auto a = static_cast<Eigen::Index>(e.a), b = static_cast<Eigen::Index>(e.b);
    lm.K(a, a) += k2;
    lm.K(b, b) += k2;
    lm.K(a, b) -= k2;
    lm.K(b, a) -= k2;
  }
  const Eigen::Index dim = 2 * n + m;
  lm.A = Eigen::MatrixXd::Zero(dim, dim);
  lm.A.block(0, n, n, n) = Eigen::MatrixXd::Identity(n, n);
  lm.A.block(n, 0, n, n) = -lm.K;
  const auto& att = c.topology().attachments();
  for (std::size_t b = 0; b < att.size(); ++b) {
    const auto& res = c.reservoir_of_attachment(b);
    const auto v = static_cast<Eigen::Index>(att[b].vertex);
    lm.damped_vertices.push_back(att[b].vertex);
    if (res.kind == ReservoirKind::markovian_aux) {
      const Eigen::Index r = 2 * n + static_cast<Eigen::Index>(b);
      lm.A(n + v, r) -= res.coupling;
      lm.A(r, r) -= res.rate;
      lm.A(r, n + v) += res.coupling;
    } else {
      lm.A(n + v, n + v) -= res.coupling;
    }
  }
  std::sort(lm.damped_vertices.begin(), lm.damped_vertices.end());
  lm.damped_vertices.erase(std::unique(lm.damped_vertices.begin(), lm.damped_vertices.end()), lm.damped_vertices.end());

  const auto channels = diffusion_amplitudes(c);
  lm.B = Eigen::MatrixXd::Zero(dim, static_cast<Eigen::Index>(channels.size()));
  for (std::size_t k = 0; k < channels.size(); ++k) {
    const auto& ch = channels[k];
    const Eigen::Index row = ch.coordinate == NoiseChannel::Coordinate::r ? 2 * n + static_cast<Eigen::Index>(ch.index)
                                                                          : n + static_cast<Eigen::Index>(ch.index);
    lm.B(row, static_cast<Eigen::Index>(k)) = ch.amplitude;
  }
  return lm;
}

// ---------------------------------------------------------------------------
// Stationary covariance

enum class Stability { hurwitz, inconclusive, unstable };

inline const char* to_string(Stability s) {
  switch (s) {
    case Stability::hurwitz: return "hurwitz";
    case Stability::inconclusive: return "inconclusive";
    default: return "unstable";
  }
}

struct StationaryCovariance {
  Eigen::MatrixXd Sigma;  ///< empty unless unique
  bool unique = false;
  Stability stability = Stability::inconclusive;
  double spectral_abscissa = 0.0;  ///< max Re(eig A)
  double residual = 0.0;           ///< ||A S + S A^T + B B^T||_inf
};

enum class LyapunovMethod { automatic, kronecker, schur };

/// Eigenvalues of the drift matrix.
inline Eigen::VectorXcd drift_spectrum(const LinearModel& lm) {
  if (lm.A.rows() == 0) return {};
  return Eigen::EigenSolver<Eigen::MatrixXd>(lm.A, false).eigenvalues();
}

/// Hurwitz test with tolerance on the real parts; |Re| <= tol is reported as inconclusive.
inline Stability classify_stability(const LinearModel& lm, double tol = 1e-9, double* abscissa = nullptr) {
  const auto ev = drift_spectrum(lm);
  double amax = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < ev.size(); ++i) amax = std::max(amax, ev(i).real());
  if (abscissa) *abscissa = amax;
  if (amax < -tol) return Stability::hurwitz;
  return amax > tol ? Stability::unstable : Stability::inconclusive;
}

namespace detail {

/// Solves A X + X A^T = -Q via the Kronecker-vectorized dense system.
inline Eigen::MatrixXd lyapunov_kronecker(const Eigen::MatrixXd& A, const Eigen::MatrixXd& Q) {
  const Eigen::Index n = A.rows();
  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(n * n, n * n);
  // vec(A X) = (I kron A) vec X ; vec(X A^T) = (A kron I) vec X  (column-major vec)
  for (Eigen::Index j = 0; j < n; ++j) {
    L.block(j * n, j * n, n, n) += A;
    for (Eigen::Index k = 0; k < n; ++k) {
      if (A(j, k) != 0.0) L.block(j * n, k * n, n, n).diagonal().array() += A(j, k);
    }
  }
  const Eigen::VectorXd rhs = -Eigen::Map<const Eigen::VectorXd>(Q.data(), n * n);
  const Eigen::VectorXd x = L.partialPivLu().solve(rhs);
  return Eigen::Map<const Eigen::MatrixXd>(x.data(), n, n);
}

/// Same equation via complex Schur form A = U T U^*: back-substitution column by column.
inline Eigen::MatrixXd lyapunov_schur(const Eigen::MatrixXd& A, const Eigen::MatrixXd& Q) {
  const Eigen::Index n = A.rows();
  Eigen::ComplexSchur<Eigen::MatrixXd> schur(A);
  const Eigen::MatrixXcd& T = schur.matrixT();
  const Eigen::MatrixXcd& U = schur.matrixU();
  const Eigen::MatrixXcd C = -U.adjoint() * Q.cast<std::complex<double>>() * U;
  Eigen::MatrixXcd Y = Eigen::MatrixXcd::Zero(n, n);
  // T Y + Y T^* = C; column j of Y T^* is sum_{k >= j} Y(:,k) conj(T(j,k))
  for (Eigen::Index j = n - 1; j >= 0; --j) {
    Eigen::VectorXcd rhs = C.col(j);
    for (Eigen::Index k = j + 1; k < n; ++k) rhs -= Y.col(k) * std::conj(T(j, k));
    Eigen::MatrixXcd M = T;
    M.diagonal().array() += std::conj(T(j, j));
    Y.col(j) = M.triangularView<Eigen::Upper>().solve(rhs);
  }
  return (U * Y * U.adjoint()).real();
}

inline double inf_norm(const Eigen::MatrixXd& M) {
  return M.rows() == 0 ? 0.0 : M.cwiseAbs().rowwise().sum().maxCoeff();
}

}  // namespace detail

/// Solves A S + S A^T + B B^T = 0 when A is Hurwitz. Otherwise Sigma is left empty and
/// the stability classification explains why.
inline StationaryCovariance stationary_covariance(const LinearModel& lm, LyapunovMethod method = LyapunovMethod::automatic) {
  StationaryCovariance out;
  out.stability = classify_stability(lm, 1e-9, &out.spectral_abscissa);
  if (out.stability != Stability::hurwitz) return out;
  const Eigen::MatrixXd Q = lm.B * lm.B.transpose();
  if (method == LyapunovMethod::automatic) method = lm.A.rows() <= 60 ? LyapunovMethod::kronecker : LyapunovMethod::schur;
  Eigen::MatrixXd S = method == LyapunovMethod::kronecker ? detail::lyapunov_kronecker(lm.A, Q)
                                                         : detail::lyapunov_schur(lm.A, Q);
  S = (0.5 * (S + S.transpose())).eval();
  if (!S.allFinite()) throw AnalysisError("Lyapunov solve failed for a Hurwitz drift matrix");
  out.residual = detail::inf_norm(lm.A * S + S * lm.A.transpose() + Q);
  out.Sigma = std::move(S);
  out.unique = true;
  return out;
}

/// Covariance at time t from a deterministic start: int_0^t e^{As} B B^T e^{A^T s} ds.
/// Van Loan on a short step h = t/2^k, then doubling S(2h) = S(h) + e^{Ah} S(h) e^{A^T h}.
inline Eigen::MatrixXd transient_covariance(const LinearModel& lm, double t) {
  const Eigen::Index n = lm.A.rows();
  const double anorm = lm.A.cwiseAbs().rowwise().sum().maxCoeff();
  int doublings = 0;
  double h = t;
  while (h * anorm > 0.5 && doublings < 60) {
    h *= 0.5;
    ++doublings;
  }
  Eigen::MatrixXd vl = Eigen::MatrixXd::Zero(2 * n, 2 * n);
  vl.topLeftCorner(n, n) = -lm.A * h;
  vl.topRightCorner(n, n) = lm.B * lm.B.transpose() * h;
  vl.bottomRightCorner(n, n) = lm.A.transpose() * h;
  const Eigen::MatrixXd e = vl.exp();
  Eigen::MatrixXd F = e.bottomRightCorner(n, n).transpose();
  Eigen::MatrixXd S = F * e.topRightCorner(n, n);
  for (int k = 0; k < doublings; ++k) {
    S = (S + F * S * F.transpose()).eval();
    F = (F * F).eval();
  }
  return (0.5 * (S + S.transpose())).eval();
}

/// Gibbs covariance at a common temperature T: q ~ T K^{-1}, p ~ T I, r ~ T I, blocks independent.
inline Eigen::MatrixXd gibbs_covariance(const LinearModel& lm, double temperature) {
  const auto n = static_cast<Eigen::Index>(lm.vertex_count);
  const auto m = static_cast<Eigen::Index>(lm.aux_count);
  Eigen::LLT<Eigen::MatrixXd> llt(lm.K);
  if (llt.info() != Eigen::Success) throw ConfigError("Gibbs covariance needs a positive definite force matrix");
  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(2 * n + m, 2 * n + m);
  S.topLeftCorner(n, n) = temperature * llt.solve(Eigen::MatrixXd::Identity(n, n));
  S.bottomRightCorner(n + m, n + m) = temperature * Eigen::MatrixXd::Identity(n + m, n + m);
  return S;
}

/// Exact draws from the harmonic Gibbs measure at temperature T.
inline StateSampler gibbs_sampler(const SystemConfig& c, double temperature) {
  const LinearModel lm = assemble_linear(c);
  const Eigen::MatrixXd L = gibbs_covariance(lm, temperature).llt().matrixL();
  return [&c, L](RandomStream& rng) {
    Eigen::VectorXd z(L.rows());
    for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = rng.normal();
    return to_state(c, L * z);
  };
}

// ---------------------------------------------------------------------------
// Controllability

struct ControllabilityReport {
  std::size_t rank = 0;
  std::size_t state_dim = 0;
  bool full = false;
  std::size_t deficiency = 0;  ///< state_dim - rank
  std::vector<double> singular_values;
  /// Configuration-space count: normal modes of K with no overlap with any damped vertex.
  /// Each such mode is an undamped oscillator (two phase-space dimensions); its energy
  /// labels a one-parameter family of invariant measures.
  std::size_t mode_rank = 0;
  std::size_t mode_deficiency = 0;
};

namespace detail {

/// SVD rank of [M0, X M0, X^2 M0, ...] with each block scaled to unit Frobenius norm
/// (rank-preserving, tames the growth of powers). Threshold dim * eps * sigma_max.
inline std::size_t krylov_rank(const Eigen::MatrixXd& X, const Eigen::MatrixXd& M0, std::vector<double>* sv) {
  const Eigen::Index n = X.rows();
  if (M0.cols() == 0 || n == 0) {
    if (sv) sv->clear();
    return 0;
  }
  Eigen::MatrixXd kr(n, n * M0.cols());
  Eigen::MatrixXd blk = M0;
  for (Eigen::Index k = 0; k < n; ++k) {
    const double nrm = blk.norm();
    if (nrm > 0.0) blk /= nrm;
    kr.middleCols(k * M0.cols(), M0.cols()) = blk;
    blk = X * blk;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(kr);
  const auto& s = svd.singularValues();
  if (sv) sv->assign(s.data(), s.data() + s.size());
  const double thresh = static_cast<double>(std::max(kr.rows(), kr.cols())) * std::numeric_limits<double>::epsilon() *
                        (s.size() ? s(0) : 0.0);
  std::size_t r = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) r += s(i) > thresh;
  return r;
}

}  // namespace detail

/// Kalman rank of [B, AB, ..., A^{N-1} B] plus the configuration-space mode count.
inline ControllabilityReport controllability_rank(const LinearModel& lm) {
  ControllabilityReport rep;
  rep.state_dim = lm.state_dim();
  rep.rank = detail::krylov_rank(lm.A, lm.B, &rep.singular_values);
  rep.full = rep.rank == rep.state_dim;
  rep.deficiency = rep.state_dim - rep.rank;
  const auto n = static_cast<Eigen::Index>(lm.vertex_count);
  Eigen::MatrixXd E = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(lm.damped_vertices.size()));
  for (std::size_t k = 0; k < lm.damped_vertices.size(); ++k) {
    E(static_cast<Eigen::Index>(lm.damped_vertices[k]), static_cast<Eigen::Index>(k)) = 1.0;
  }
  rep.mode_rank = detail::krylov_rank(lm.K, E, nullptr);
  rep.mode_deficiency = lm.vertex_count - rep.mode_rank;
  return rep;
}

// ---------------------------------------------------------------------------
// Exact means of quadratic observables

/// A function of the state that is a quadratic form plus a constant.
struct QuadraticForm {
  Eigen::MatrixXd M;  ///< symmetric
  double constant = 0.0;

  double mean(const Eigen::MatrixXd& Sigma) const { return (M.cwiseProduct(Sigma)).sum() + constant; }
};

/// Recovers (M, c) with f(x) = x^T M x + c by polarization at the unit vectors.
/// Assumes f has no linear part, which holds for every flow and energy here.
inline QuadraticForm polarize(const SystemConfig& c, const std::function<double(const SystemState&)>& f) {
  const Eigen::Index d = static_cast<Eigen::Index>(2 * c.vertex_count() + c.aux_count());
  QuadraticForm qf;
  qf.M = Eigen::MatrixXd::Zero(d, d);
  qf.constant = f(SystemState::zeros(c));
  Eigen::VectorXd diag(d);
  for (Eigen::Index i = 0; i < d; ++i) {
    diag(i) = f(to_state(c, Eigen::VectorXd::Unit(d, i))) - qf.constant;
    qf.M(i, i) = diag(i);
  }
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = i + 1; j < d; ++j) {
      const double fij = f(to_state(c, Eigen::VectorXd::Unit(d, i) + Eigen::VectorXd::Unit(d, j))) - qf.constant;
      qf.M(i, j) = qf.M(j, i) = 0.5 * (fij - diag(i) - diag(j));
    }
  }
  return qf;
}

/// E[Phi_j] = tr(M_j Sigma) (+ constant for Langevin bath flows).
inline double exact_flux(const StationaryCovariance& cov, const SystemConfig& c, std::size_t j) {
  if (!cov.unique) throw AnalysisError("exact flux needs a unique stationary covariance");
  const auto qf = polarize(c, [&](const SystemState& s) { return heat_flows(c, s).at(j); });
  return qf.mean(cov.Sigma);
}

inline std::vector<double> exact_fluxes(const StationaryCovariance& cov, const SystemConfig& c) {
  std::vector<double> out;
  const std::size_t count = c.topology().layer_count() + 1;
  for (std::size_t j = 0; j < count; ++j) out.push_back(exact_flux(cov, c, j));
  return out;
}

/// Mean flow into each reservoir (any topology).
inline std::vector<double> exact_bath_flows(const StationaryCovariance& cov, const SystemConfig& c) {
  if (!cov.unique) throw AnalysisError("exact flux needs a unique stationary covariance");
  std::vector<double> out;
  for (std::size_t b = 0; b < c.topology().attachments().size(); ++b) {
    out.push_back(polarize(c, [&](const SystemState& s) { return bath_flows(c, s)[b]; }).mean(cov.Sigma));
  }
  return out;
}

/// Slowest relaxation rate: min over eigenvalues of -Re(lambda).
inline double slowest_decay_rate(const LinearModel& lm) {
  const auto ev = drift_spectrum(lm);
  double r = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < ev.size(); ++i) r = std::min(r, -ev(i).real());
  return r;
}

// ---------------------------------------------------------------------------

/// Four harmonic oscillators on a square (cycle 0-1-2-3-0) with Langevin baths on the
/// opposite corners 0 and 2.
///
/// Symmetry-adapted coordinates: u = (q_1 - q_3)/sqrt(2), v = (q_1 + q_3)/sqrt(2), together with
/// q_0, q_2. The mode u is an eigenvector of K (eigenvalue k_onsite + 2 k_pair) that vanishes
/// on both damped corners, so it never feels the baths: (u, u') oscillates with conserved
/// energy E_u. Every mixture of "Gibbs on the other modes" x "uniform on the E_u circle" is
/// invariant, a one-parameter family labelled by E_u. One undamped mode, two phase-space
/// dimensions outside the controllable subspace.
struct DiamondFixture {
  SystemConfig config;
  Eigen::VectorXd dark_mode;  ///< q-space direction of u
  double dark_frequency = 0.0;
};

inline DiamondFixture diamond_fixture(double t_a = 1.0, double t_b = 1.0, double coupling = 1.0) {
  const auto h = PolynomialPotential::harmonic();
  DiamondFixture d{build_graph(4, {{0, 1}, {1, 2}, {2, 3}, {0, 3}},
                               {{0, {t_a, coupling, coupling, ReservoirKind::langevin}},
                                {2, {t_b, coupling, coupling, ReservoirKind::langevin}}},
                               h, h),
                   Eigen::Vector4d(0.0, 1.0, 0.0, -1.0) / std::sqrt(2.0), std::sqrt(3.0)};
  return d;
}

/// 4-vertex path graph with baths on the two ends: the full-rank control for the diamond.
inline SystemConfig path_fixture(double t_a = 1.0, double t_b = 1.0, double coupling = 1.0) {
  const auto h = PolynomialPotential::harmonic();
  return build_graph(4, {{0, 1}, {1, 2}, {2, 3}},
                     {{0, {t_a, coupling, coupling, ReservoirKind::langevin}},
                      {3, {t_b, coupling, coupling, ReservoirKind::langevin}}},
                     h, h);
}

}  // namespace ness
