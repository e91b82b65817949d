#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "ness/error.hpp"

namespace ness {

/// Real polynomial sum_m c_m x^m with exact coefficient arithmetic for derivatives.
/// Trailing zero coefficients are trimmed; the zero polynomial has degree -1.
class Polynomial {
 public:
  Polynomial() = default;
  explicit Polynomial(std::vector<double> coefficients) : c_(std::move(coefficients)) {
    for (double v : c_) {
      if (!std::isfinite(v)) throw ConfigError("polynomial coefficient is not finite");
    }
    trim();
  }

  static Polynomial monomial(int power, double coefficient = 1.0) {
    std::vector<double> c(static_cast<std::size_t>(power) + 1, 0.0);
    c.back() = coefficient;
    return Polynomial(std::move(c));
  }

  int degree() const { return static_cast<int>(c_.size()) - 1; }
  bool is_zero() const { return c_.empty(); }
  const std::vector<double>& coefficients() const { return c_; }
  double coefficient(int m) const {
    return (m >= 0 && m < static_cast<int>(c_.size())) ? c_[static_cast<std::size_t>(m)] : 0.0;
  }
  double leading() const { return c_.empty() ? 0.0 : c_.back(); }

  double operator()(double x) const {
    double acc = 0.0;
    for (auto it = c_.rbegin(); it != c_.rend(); ++it) acc = acc * x + *it;
    return acc;
  }

  Polynomial derivative(int order = 1) const {
    std::vector<double> c = c_;
    for (int k = 0; k < order && !c.empty(); ++k) {
      std::vector<double> d(c.size() > 1 ? c.size() - 1 : 0);
      for (std::size_t m = 1; m < c.size(); ++m) d[m - 1] = static_cast<double>(m) * c[m];
      c = std::move(d);
    }
    return Polynomial(std::move(c));
  }

  double derivative_at(double x, int order) const { return derivative(order)(x); }

  friend Polynomial operator+(const Polynomial& a, const Polynomial& b) {
    std::vector<double> c(std::max(a.c_.size(), b.c_.size()), 0.0);
    for (std::size_t m = 0; m < a.c_.size(); ++m) c[m] += a.c_[m];
    for (std::size_t m = 0; m < b.c_.size(); ++m) c[m] += b.c_[m];
    return Polynomial(std::move(c));
  }
  friend Polynomial operator*(double s, const Polynomial& a) {
    std::vector<double> c = a.c_;
    for (double& v : c) v *= s;
    return Polynomial(std::move(c));
  }
  friend Polynomial operator-(const Polynomial& a, const Polynomial& b) { return a + (-1.0) * b; }
  friend bool operator==(const Polynomial&, const Polynomial&) = default;

  std::string to_string() const {
    std::string s;
    for (std::size_t m = 0; m < c_.size(); ++m) {
      if (c_[m] == 0.0) continue;
      if (!s.empty()) s += " + ";
      s += std::to_string(c_[m]);
      if (m > 0) s += "*x^" + std::to_string(m);
    }
    return s.empty() ? "0" : s;
  }

 private:
  void trim() {
    while (!c_.empty() && c_.back() == 0.0) c_.pop_back();
  }

  std::vector<double> c_;
};

/// Confining one-variable potential: even degree k >= 2 with positive leading coefficient.
/// Caches the first and second derivatives used by force and Hessian evaluation.
class PolynomialPotential {
 public:
  explicit PolynomialPotential(Polynomial u) : u_(std::move(u)) {
    if (!is_confining(u_)) {
      throw ConfigError("potential " + u_.to_string() +
                        " is not confining (need even degree >= 2 and positive leading coefficient)");
    }
    du_ = u_.derivative(1);
    d2u_ = u_.derivative(2);
  }
  explicit PolynomialPotential(std::vector<double> coefficients)
      : PolynomialPotential(Polynomial(std::move(coefficients))) {}

  static bool is_confining(const Polynomial& p) {
    return p.degree() >= 2 && p.degree() % 2 == 0 && p.leading() > 0.0;
  }

  static PolynomialPotential harmonic(double stiffness = 1.0) {
    return PolynomialPotential(std::vector<double>{0.0, 0.0, 0.5 * stiffness});
  }
  /// a x^2/2 + b x^4/4
  static PolynomialPotential quartic(double a, double b) {
    return PolynomialPotential(std::vector<double>{0.0, 0.0, 0.5 * a, 0.0, 0.25 * b});
  }

  int degree() const { return u_.degree(); }
  const Polynomial& polynomial() const { return u_; }
  double value(double x) const { return u_(x); }
  double first(double x) const { return du_(x); }
  double second(double x) const { return d2u_(x); }
  bool is_quadratic() const { return u_.degree() == 2; }

 private:
  Polynomial u_;
  Polynomial du_;
  Polynomial d2u_;
};

}  // namespace ness
