#include "fracstep/frackernel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include <boost/math/quadrature/exp_sinh.hpp>

#include "double_double.hpp"

namespace fracstep::kernel {

namespace {

using detail::DoubleDouble;

constexpr double kEps = std::numeric_limits<double>::epsilon();
constexpr double kDoubleDoubleEps = 4.93e-32;  // 2^-104
constexpr double kTermTolerance = 1e-15;
constexpr double kAcceptTolerance = 1e-12;
constexpr int kMaxSeriesTerms = 20000;
constexpr int kMaxAsymptoticTerms = 500;

void validate(const MLParams& p) {
  if (!(p.alpha > 0.0) || !(p.beta > 0.0) || !std::isfinite(p.alpha) || !std::isfinite(p.beta)) {
    throw std::invalid_argument("mittag_leffler: alpha and beta must be positive and finite");
  }
  if (!std::isfinite(p.z)) throw std::invalid_argument("mittag_leffler: z must be finite");
}

bool is_small_integer(double a) { return a == std::round(a) && a <= 16.0; }

// log|1/Gamma(x)| and its sign; returns -inf at the poles.
double log_abs_rgamma(double x, int& sign) {
  if (x > 0.0) {
    sign = 1;
    return -std::lgamma(x);
  }
  if (x == std::round(x)) {
    sign = 0;
    return -std::numeric_limits<double>::infinity();
  }
  // 1/Gamma(x) = sin(pi x) Gamma(1-x) / pi, with x reduced mod 2 before sin.
  const double r = x - 2.0 * std::round(x / 2.0);
  const double s = std::sin(std::numbers::pi * r);
  sign = s > 0.0 ? 1 : -1;
  return std::log(std::fabs(s)) + std::lgamma(1.0 - x) - std::log(std::numbers::pi);
}

}  // namespace

double gamma_fn(double x) {
  if (std::isnan(x)) throw std::invalid_argument("gamma_fn: NaN argument");
  if (x <= 0.0 && x == std::round(x)) {
    std::ostringstream os;
    os << "gamma_fn: pole at x = " << x;
    throw PoleError(os.str());
  }
  return std::tgamma(x);
}

double reciprocal_gamma(double x) {
  if (x <= 0.0 && x == std::round(x)) return 0.0;
  if (x > 0.0 && x < 170.0) return 1.0 / std::tgamma(x);
  int sign = 0;
  const double l = log_abs_rgamma(x, sign);
  return sign * std::exp(l);
}

MLBranchResult mittag_leffler_series(const MLParams& p) {
  validate(p);
  MLBranchResult out;
  const double z = p.z;
  if (z == 0.0) {
    out.value = reciprocal_gamma(p.beta);
    out.converged = true;
    out.terms = 1;
    return out;
  }

  // Integer alpha admits an exact rational term recurrence, so every term is
  // carried in double-double; otherwise terms come from lgamma in double.
  const bool exact_terms = is_small_integer(p.alpha);
  const double log_abs_z = std::log(std::fabs(z));

  DoubleDouble sum;
  DoubleDouble term(reciprocal_gamma(p.beta));
  double rounding = exact_terms ? 0.0 : std::fabs(term.hi) * kEps;
  double prev_abs = std::fabs(term.hi);
  sum = term;

  int k = 1;
  for (; k < kMaxSeriesTerms; ++k) {
    double abs_t = 0.0;
    if (exact_terms) {
      const int m = static_cast<int>(p.alpha);
      DoubleDouble denom(1.0);
      for (int j = 0; j < m; ++j) {
        denom = denom * (DoubleDouble(p.beta) + DoubleDouble(p.alpha * (k - 1) + j));
      }
      term = term * DoubleDouble(z) / denom;
      abs_t = detail::abs(term);
      rounding += abs_t * kDoubleDoubleEps * (4.0 + 2.0 * k);
    } else {
      const double lg = std::lgamma(p.alpha * k + p.beta);
      const double log_t = k * log_abs_z - lg;
      abs_t = std::exp(log_t);
      const double t = (z < 0.0 && (k % 2 == 1)) ? -abs_t : abs_t;
      term = DoubleDouble(t);
      rounding += abs_t * kEps * (2.0 + k * std::fabs(log_abs_z) + std::fabs(lg));
    }
    if (!std::isfinite(abs_t)) break;
    sum = sum + term;
    const double s = std::fabs(sum.value());
    const bool decreasing = abs_t <= prev_abs;
    prev_abs = abs_t;
    if (decreasing && (abs_t <= kTermTolerance * s || abs_t == 0.0)) {
      ++k;
      break;
    }
  }

  out.value = sum.value();
  out.terms = k;
  const double mag = std::fabs(out.value);
  if (!std::isfinite(out.value) || mag == 0.0 || k >= kMaxSeriesTerms) {
    out.error_estimate = std::numeric_limits<double>::infinity();
    out.converged = false;
    return out;
  }
  out.error_estimate = (rounding + kTermTolerance * mag) / mag;
  out.converged = out.error_estimate <= kAcceptTolerance;
  return out;
}

MLBranchResult mittag_leffler_asymptotic(const MLParams& p) {
  validate(p);
  MLBranchResult out;
  if (!(p.z < 0.0) || p.alpha >= 2.0) {
    out.error_estimate = std::numeric_limits<double>::infinity();
    return out;
  }
  const double az = std::fabs(p.z);
  const double log_az = std::log(az);

  // Exponentially small contributions on the negative axis exist for alpha >= 1.
  double exp_part = 0.0;
  if (p.alpha >= 1.0) {
    const double c = std::cos(std::numbers::pi / p.alpha);
    exp_part = std::exp(std::pow(az, 1.0 / p.alpha) * c + (1.0 - p.beta) / p.alpha * log_az) / p.alpha;
  }

  double sum = 0.0;
  double prev_abs = std::numeric_limits<double>::infinity();
  int used = 0;
  for (int j = 1; j <= kMaxAsymptoticTerms; ++j) {
    int sign = 0;
    const double l = log_abs_rgamma(p.beta - p.alpha * j, sign);
    if (sign == 0) continue;  // 1/Gamma vanishes at a pole
    const double abs_t = std::exp(l - j * log_az);
    // -z^{-j}: z < 0 so z^{-j} has sign (-1)^j.
    const double t = -((j % 2 == 0) ? 1.0 : -1.0) * sign * abs_t;
    if (used > 0 && std::fabs(sum) > 0.0 && abs_t <= kAcceptTolerance * std::fabs(sum)) {
      out.value = sum;
      out.terms = used;
      out.error_estimate = (abs_t + exp_part) / std::fabs(sum);
      out.converged = out.error_estimate <= kAcceptTolerance;
      return out;
    }
    if (abs_t > prev_abs && used > 0) break;  // past optimal truncation
    prev_abs = abs_t;
    sum += t;
    ++used;
  }
  out.value = sum;
  out.terms = used;
  out.error_estimate = std::numeric_limits<double>::infinity();
  return out;
}

MLBranchResult mittag_leffler_integral(const MLParams& p) {
  validate(p);
  MLBranchResult out;
  if (!(p.z < 0.0) || p.alpha >= 1.0) {
    out.error_estimate = std::numeric_limits<double>::infinity();
    return out;
  }
  // Lower beta into (0, 1 + alpha) via E_{a,b}(z) = (E_{a,b-a}(z) - 1/Gamma(b-a)) / z.
  if (p.beta >= 1.0 + p.alpha) {
    MLBranchResult inner = mittag_leffler_integral({p.alpha, p.beta - p.alpha, p.z});
    const double shifted = reciprocal_gamma(p.beta - p.alpha);
    out.value = (inner.value - shifted) / p.z;
    const double abs_err = inner.error_estimate * std::fabs(inner.value) + kEps * std::fabs(shifted);
    out.error_estimate = abs_err / std::fabs(p.z) / std::max(std::fabs(out.value), 1e-300);
    out.terms = inner.terms;
    out.converged = inner.converged && out.error_estimate <= kAcceptTolerance;
    return out;
  }

  // Kernel with chi = s^alpha:
  //   (1/pi) s^{alpha-beta} e^{-s} [s^alpha sin(pi(1-beta)) - z sin(pi(1-beta+alpha))]
  //         / (s^{2 alpha} - 2 s^alpha z cos(pi alpha) + z^2)
  const double a = p.alpha;
  const double b = p.beta;
  const double z = p.z;
  const double s1 = std::sin(std::numbers::pi * (1.0 - b));
  const double s2 = std::sin(std::numbers::pi * (1.0 - b + a));
  const double ca = std::cos(std::numbers::pi * a);
  auto kernel = [=](double s) {
    const double sa = std::pow(s, a);
    const double num = sa * s1 - z * s2;
    const double den = sa * sa - 2.0 * sa * z * ca + z * z;
    return std::pow(s, a - b) * std::exp(-s) * num / den / std::numbers::pi;
  };
  boost::math::quadrature::exp_sinh<double> integrator;
  double err = 0.0;
  double l1 = 0.0;
  std::size_t levels = 0;
  try {
    out.value = integrator.integrate(kernel, 1e-14, &err, &l1, &levels);
  } catch (const std::exception&) {
    out.error_estimate = std::numeric_limits<double>::infinity();
    return out;
  }
  const double mag = std::fabs(out.value);
  out.terms = static_cast<int>(levels);
  out.error_estimate = mag > 0.0 ? (err + kEps * l1) / mag : std::numeric_limits<double>::infinity();
  out.converged = std::isfinite(out.value) && out.error_estimate <= kAcceptTolerance;
  return out;
}

namespace {

struct Attempt {
  MLBranch branch;
  MLBranchResult result;
};

Attempt evaluate(const MLParams& p) {
  validate(p);
  std::vector<MLBranch> order;
  const bool far = std::fabs(p.z) > kMittagLefflerSwitch;
  if (p.z < 0.0 && far) {
    order = {MLBranch::asymptotic, MLBranch::series, MLBranch::integral};
  } else if (p.z < 0.0) {
    order = {MLBranch::series, MLBranch::integral, MLBranch::asymptotic};
  } else {
    order = {MLBranch::series};
  }

  Attempt best{order.front(), {}};
  best.result.error_estimate = std::numeric_limits<double>::infinity();
  for (MLBranch b : order) {
    MLBranchResult r;
    switch (b) {
      case MLBranch::series: r = mittag_leffler_series(p); break;
      case MLBranch::asymptotic: r = mittag_leffler_asymptotic(p); break;
      case MLBranch::integral: r = mittag_leffler_integral(p); break;
    }
    if (r.converged) return {b, r};
    if (r.error_estimate < best.result.error_estimate) best = {b, r};
  }
  std::ostringstream os;
  os.precision(6);
  os << "mittag_leffler: no branch converged for alpha=" << p.alpha << " beta=" << p.beta << " z=" << p.z
     << " (best relative error estimate " << best.result.error_estimate << ")";
  throw NonConvergenceError(os.str());
}

}  // namespace

double mittag_leffler(const MLParams& p) { return evaluate(p).result.value; }

MLBranch mittag_leffler_branch(const MLParams& p) { return evaluate(p).branch; }

}  // namespace fracstep::kernel
