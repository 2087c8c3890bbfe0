#pragma once

// Truncated multivariate Taylor polynomials for forward-mode differentiation.
//
// A Jet of degree K in m variables carries every Taylor coefficient of total
// degree <= K. Differentiating a degree-K jet yields an exact degree-(K-1)
// jet, which is what nested partial derivatives of virtual controls need.

#include <cstdint>
#include <span>
#include <vector>

#include <boost/container/small_vector.hpp>

namespace fracstep::ad {

class JetShape;

class Jet {
public:
  using Storage = boost::container::small_vector<double, 32>;

  /// A plain constant compatible with any shape.
  Jet() : Jet(0.0) {}
  Jet(double c);  // NOLINT(google-explicit-constructor)

  static Jet constant(int nvars, int degree, double c);
  static Jet variable(int nvars, int degree, int index, double value);

  [[nodiscard]] int nvars() const noexcept;
  [[nodiscard]] int degree() const noexcept;
  [[nodiscard]] bool is_scalar() const noexcept { return nvars() == 0; }
  [[nodiscard]] double value() const noexcept { return coeffs_[0]; }

  /// First-order partial derivative d/dv_index at the expansion point.
  [[nodiscard]] double partial(int index) const;

  /// Exact derivative d/dv_index as a jet of one lower degree.
  [[nodiscard]] Jet derivative(int index) const;

  /// Drops every coefficient above `degree`.
  [[nodiscard]] Jet truncated(int degree) const;

  /// Taylor coefficient for the monomial with the given exponents.
  [[nodiscard]] double coefficient(std::span<const int> exponents) const;

  Jet& operator+=(const Jet& rhs);
  Jet& operator-=(const Jet& rhs);
  Jet& operator*=(const Jet& rhs);
  Jet& operator/=(const Jet& rhs);
  Jet& operator+=(double rhs) { coeffs_[0] += rhs; return *this; }
  Jet& operator-=(double rhs) { coeffs_[0] -= rhs; return *this; }
  Jet& operator*=(double rhs);
  Jet& operator/=(double rhs) { return *this *= 1.0 / rhs; }

  friend Jet operator-(Jet a);
  friend Jet operator+(Jet a, const Jet& b) { return a += b; }
  friend Jet operator-(Jet a, const Jet& b) { return a -= b; }
  friend Jet operator*(const Jet& a, const Jet& b);
  friend Jet operator/(const Jet& a, const Jet& b);
  friend Jet operator+(Jet a, double b) { return a += b; }
  friend Jet operator+(double a, Jet b) { return b += a; }
  friend Jet operator-(Jet a, double b) { return a -= b; }
  friend Jet operator-(double a, Jet b) { return (-std::move(b)) += a; }
  friend Jet operator*(Jet a, double b) { return a *= b; }
  friend Jet operator*(double a, Jet b) { return b *= a; }
  friend Jet operator/(Jet a, double b) { return a /= b; }
  friend Jet operator/(double a, const Jet& b);

  /// f(a) given f and its derivatives at a.value(): derivs[k] = f^{(k)}(a0).
  friend Jet compose(const Jet& a, std::span<const double> derivs);

  [[nodiscard]] std::span<const double> coefficients() const noexcept { return {coeffs_.data(), coeffs_.size()}; }

private:
  Jet(const JetShape* shape, Storage coeffs) : shape_(shape), coeffs_(std::move(coeffs)) {}

  const JetShape* shape_;
  Storage coeffs_;
};

Jet reciprocal(const Jet& a);
Jet sqrt(const Jet& a);
Jet exp(const Jet& a);
Jet sin(const Jet& a);
Jet cos(const Jet& a);
Jet pow(const Jet& a, int k);

/// Identity overloads so generic code can call value_of on doubles and jets.
inline double value_of(double x) noexcept { return x; }
inline double value_of(const Jet& x) noexcept { return x.value(); }

}  // namespace fracstep::ad
