#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "ness/polynomial.hpp"

namespace ness {

struct H1Report {
  int k1 = 0;
  int k2 = 0;
  bool onsite_confining = false;
  bool pair_confining = false;
  bool confining_ok = false;    ///< both potentials even degree with positive leading coefficient
  bool ordering_ok = false;     ///< k2 >= k1 >= 2
  bool hessian_bound_ok = false;  ///< automatic for confining polynomials
  bool holds() const { return confining_ok && ordering_ok; }
};

/// Growth-at-infinity check for polynomial potentials. For a polynomial the scaling limit
/// exists with exponent equal to its degree, so H1 reduces to degree parity and sign.
inline H1Report check_H1(const Polynomial& onsite, const Polynomial& pair) {
  H1Report r;
  r.k1 = onsite.degree();
  r.k2 = pair.degree();
  r.onsite_confining = PolynomialPotential::is_confining(onsite);
  r.pair_confining = PolynomialPotential::is_confining(pair);
  r.confining_ok = r.onsite_confining && r.pair_confining;
  r.ordering_ok = r.k2 >= r.k1 && r.k1 >= 2;
  r.hessian_bound_ok = r.confining_ok;
  return r;
}

struct H2Report {
  bool holds = false;
  /// Smallest m0 such that at every x one of U2^(2)(x) .. U2^(m0+1)(x) is nonzero.
  int m0_max = 0;
  /// Per probe point: smallest m with U2^(m+1)(x) != 0 (0 if none).
  std::vector<int> probe_m0;
};

namespace detail {

/// Real roots of p via companion-matrix eigenvalues. Near-multiple roots come back with
/// small imaginary parts, hence the loose acceptance tolerance.
inline std::vector<double> real_roots(const Polynomial& p) {
  std::vector<double> roots;
  const int n = p.degree();
  if (n < 1) return roots;
  Eigen::MatrixXd comp = Eigen::MatrixXd::Zero(n, n);
  for (int i = 1; i < n; ++i) comp(i, i - 1) = 1.0;
  for (int i = 0; i < n; ++i) comp(i, n - 1) = -p.coefficient(i) / p.leading();
  Eigen::EigenSolver<Eigen::MatrixXd> es(comp, false);
  for (int i = 0; i < n; ++i) {
    const auto z = es.eigenvalues()(i);
    if (std::abs(z.imag()) <= 1e-6 * (1.0 + std::abs(z))) roots.push_back(z.real());
  }
  return roots;
}

inline double coefficient_scale(const Polynomial& p) {
  double s = 0.0;
  for (double c : p.coefficients()) s = std::max(s, std::abs(c));
  return s;
}

/// Smallest m >= 1 with U^(m+1)(x) != 0 (relative tolerance), 0 if all vanish.
inline int first_nonzero_order(const Polynomial& u, double x, double tol) {
  const double scale = std::max(1.0, coefficient_scale(u)) * std::pow(1.0 + std::abs(x), u.degree());
  for (int m = 1; m + 1 <= u.degree(); ++m) {
    if (std::abs(u.derivative_at(x, m + 1)) > tol * scale) return m;
  }
  return 0;
}

}  // namespace detail

/// Non-degeneracy of the pair potential for scalar coordinates: the rank condition reduces to
/// "some derivative of order >= 2 is nonzero at every x", which any polynomial of degree >= 2
/// satisfies. m0_max is computed exactly from the real roots of U2''.
inline H2Report check_H2(const Polynomial& pair, const std::optional<std::vector<double>>& probes = std::nullopt) {
  H2Report rep;
  if (pair.degree() < 2) {
    rep.holds = false;
    if (probes) rep.probe_m0.assign(probes->size(), 0);
    return rep;
  }
  constexpr double tol = 1e-6;
  rep.holds = true;
  rep.m0_max = 1;
  for (double x : detail::real_roots(pair.derivative(2))) {
    rep.m0_max = std::max(rep.m0_max, detail::first_nonzero_order(pair, x, tol));
  }
  if (probes) {
    for (double x : *probes) rep.probe_m0.push_back(detail::first_nonzero_order(pair, x, tol));
  }
  return rep;
}

}  // namespace ness
