#pragma once

// Fractional-calculus kernel: Gamma, Mittag-Leffler, and grid operators for
// orders 0 < alpha <= 1 on uniform time grids.

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace fracstep::kernel {

/// Raised when gamma_fn is evaluated at 0 or a negative integer.
class PoleError : public std::domain_error {
public:
  using std::domain_error::domain_error;
};

/// Raised when no Mittag-Leffler evaluation branch reaches its tolerance.
class NonConvergenceError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Fractional order restricted to (0, 1].
class FracOrder {
public:
  explicit FracOrder(double alpha);

  [[nodiscard]] double value() const noexcept { return alpha_; }
  [[nodiscard]] bool is_integer() const noexcept { return alpha_ == 1.0; }

private:
  double alpha_;
};

/// Samples v_k ~ f(t0 + k*dt). At least two finite samples, dt > 0.
class GridFunction {
public:
  GridFunction(double t0, double dt, std::vector<double> values);

  /// Samples `f` at `count` nodes starting at t0.
  template <class F>
  static GridFunction sample(F&& f, double t0, double dt, std::size_t count) {
    std::vector<double> v(count);
    for (std::size_t k = 0; k < count; ++k) v[k] = f(t0 + static_cast<double>(k) * dt);
    return GridFunction(t0, dt, std::move(v));
  }

  [[nodiscard]] double t0() const noexcept { return t0_; }
  [[nodiscard]] double dt() const noexcept { return dt_; }
  [[nodiscard]] std::size_t size() const noexcept { return values_.size(); }
  [[nodiscard]] double time(std::size_t k) const noexcept { return t0_ + static_cast<double>(k) * dt_; }
  [[nodiscard]] double operator[](std::size_t k) const noexcept { return values_[k]; }
  [[nodiscard]] std::span<const double> values() const noexcept { return values_; }

private:
  double t0_;
  double dt_;
  std::vector<double> values_;
};

struct MLParams {
  double alpha;
  double beta;
  double z;
};

/// Switch radius between the power series and the large-|z| expansion.
inline constexpr double kMittagLefflerSwitch = 50.0;

enum class MLBranch { series, asymptotic, integral };

/// Outcome of a single evaluation branch; `converged` is false when the
/// branch could not certify its tolerance.
struct MLBranchResult {
  double value = 0.0;
  double error_estimate = 0.0;  // relative
  int terms = 0;
  bool converged = false;
};

/// Gamma(x) with a pole error at 0, -1, -2, ...
[[nodiscard]] double gamma_fn(double x);

/// 1/Gamma(x), zero at the poles of Gamma.
[[nodiscard]] double reciprocal_gamma(double x);

/// Two-parameter Mittag-Leffler function E_{alpha,beta}(z) for real z.
[[nodiscard]] double mittag_leffler(const MLParams& p);

/// Which branch mittag_leffler() would accept for `p`.
[[nodiscard]] MLBranch mittag_leffler_branch(const MLParams& p);

// Individual branches, exposed for cross-checking.
[[nodiscard]] MLBranchResult mittag_leffler_series(const MLParams& p);
[[nodiscard]] MLBranchResult mittag_leffler_asymptotic(const MLParams& p);
[[nodiscard]] MLBranchResult mittag_leffler_integral(const MLParams& p);

/// Riemann-Liouville integral by product-trapezoidal convolution quadrature.
/// Exact for piecewise-linear f; result node 0 is 0.
[[nodiscard]] GridFunction frac_integral(const GridFunction& f, FracOrder order);

/// Caputo derivative by the L1 scheme (central differences when alpha = 1).
/// Node 0 is defined as 0.
[[nodiscard]] GridFunction caputo_derivative(const GridFunction& f, FracOrder order);

/// Exact Caputo derivative of sin(omega t): omega t^{1-alpha} E_{2,2-alpha}(-omega^2 t^2).
[[nodiscard]] double caputo_sinusoid(double omega, FracOrder order, double t);

}  // namespace fracstep::kernel
