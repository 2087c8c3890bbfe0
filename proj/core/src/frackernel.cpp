#include "fracstep/frackernel.hpp"

#include <cmath>
#include <numbers>

#include <boost/math/quadrature/exp_sinh.hpp>

namespace fracstep::kernel {

FracOrder::FracOrder(double alpha) : alpha_(alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0)) {
    throw std::invalid_argument("FracOrder: alpha must lie in (0, 1], got " + std::to_string(alpha));
  }
}

GridFunction::GridFunction(double t0, double dt, std::vector<double> values)
    : t0_(t0), dt_(dt), values_(std::move(values)) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw std::invalid_argument("GridFunction: dt must be positive");
  if (!std::isfinite(t0)) throw std::invalid_argument("GridFunction: t0 must be finite");
  if (values_.size() < 2) throw std::invalid_argument("GridFunction: need at least 2 samples");
  for (double v : values_) {
    if (!std::isfinite(v)) throw std::invalid_argument("GridFunction: samples must be finite");
  }
}

GridFunction frac_integral(const GridFunction& f, FracOrder order) {
  const double a = order.value();
  const std::size_t n = f.size();
  std::vector<double> pw(n + 1);  // m^{a+1}
  for (std::size_t m = 0; m <= n; ++m) pw[m] = std::pow(static_cast<double>(m), a + 1.0);

  // weight for lag m = k - j with 1 <= j <= k-1
  std::vector<double> mid(n + 1, 0.0);
  for (std::size_t m = 1; m < n; ++m) mid[m] = pw[m + 1] - 2.0 * pw[m] + pw[m - 1];

  const double scale = std::pow(f.dt(), a) / gamma_fn(a + 2.0);
  std::span<const double> v = f.values();
  std::vector<double> g(n, 0.0);
  for (std::size_t k = 1; k < n; ++k) {
    const double kk = static_cast<double>(k);
    double acc = (pw[k - 1] - (kk - 1.0 - a) * std::pow(kk, a)) * v[0];
    for (std::size_t j = 1; j < k; ++j) acc += mid[k - j] * v[j];
    acc += v[k];
    g[k] = scale * acc;
  }
  return GridFunction(f.t0(), f.dt(), std::move(g));
}

GridFunction caputo_derivative(const GridFunction& f, FracOrder order) {
  const std::size_t n = f.size();
  std::span<const double> v = f.values();
  std::vector<double> d(n, 0.0);
  const double h = f.dt();

  if (order.is_integer()) {
    for (std::size_t k = 1; k + 1 < n; ++k) d[k] = (v[k + 1] - v[k - 1]) / (2.0 * h);
    d[n - 1] = (v[n - 1] - v[n - 2]) / h;
    return GridFunction(f.t0(), h, std::move(d));
  }

  const double a = order.value();
  std::vector<double> b(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double jj = static_cast<double>(j);
    b[j] = std::pow(jj + 1.0, 1.0 - a) - std::pow(jj, 1.0 - a);
  }
  std::vector<double> diff(n, 0.0);
  for (std::size_t k = 1; k < n; ++k) diff[k] = v[k] - v[k - 1];

  const double scale = std::pow(h, -a) / gamma_fn(2.0 - a);
  for (std::size_t k = 1; k < n; ++k) {
    double acc = 0.0;
    for (std::size_t j = 0; j < k; ++j) acc += b[j] * diff[k - j];
    d[k] = scale * acc;
  }
  return GridFunction(f.t0(), h, std::move(d));
}

double caputo_sinusoid(double omega, FracOrder order, double t) {
  if (!(t >= 0.0)) throw std::invalid_argument("caputo_sinusoid: t must be non-negative");
  const double a = order.value();
  if (order.is_integer()) return omega * std::cos(omega * t);
  if (t == 0.0 || omega == 0.0) return 0.0;
  if (omega < 0.0) return -caputo_sinusoid(-omega, order, t);

  const double x = omega * t;
  try {
    return omega * std::pow(t, 1.0 - a) * mittag_leffler({2.0, 2.0 - a, -x * x});
  } catch (const NonConvergenceError&) {
    // Steady-state phasor minus the decaying memory tail, with the tail
    // integral rotated onto the negative imaginary axis.
  }
  auto tail = [=](double y) {
    return std::exp(-omega * y) * std::pow(t * t + y * y, -0.5 * a) * std::sin(a * std::atan2(y, t));
  };
  boost::math::quadrature::exp_sinh<double> integrator;
  const double im = integrator.integrate(tail, 1e-14);
  return std::pow(omega, a) * std::sin(x + 0.5 * a * std::numbers::pi) - omega / gamma_fn(1.0 - a) * im;
}

}  // namespace fracstep::kernel
