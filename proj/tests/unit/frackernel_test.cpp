#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "fracstep/frackernel.hpp"

namespace {

using namespace fracstep::kernel;

double max_abs_diff(const GridFunction& g, auto&& exact, double t_min = 0.0) {
  double worst = 0.0;
  for (std::size_t k = 0; k < g.size(); ++k) {
    if (g.time(k) < t_min) continue;
    worst = std::max(worst, std::fabs(g[k] - exact(g.time(k))));
  }
  return worst;
}

double max_rel_diff(const GridFunction& g, auto&& exact, double t_min) {
  double worst = 0.0;
  for (std::size_t k = 0; k < g.size(); ++k) {
    if (g.time(k) < t_min) continue;
    const double e = exact(g.time(k));
    worst = std::max(worst, std::fabs(g[k] - e) / std::fabs(e));
  }
  return worst;
}

TEST(Gamma, SmallIntegersAndHalf) {
  EXPECT_DOUBLE_EQ(gamma_fn(1.0), 1.0);
  EXPECT_DOUBLE_EQ(gamma_fn(5.0), 24.0);
  EXPECT_NEAR(gamma_fn(0.5), std::sqrt(std::numbers::pi), 1e-15);
}

TEST(Gamma, TwelveDigitsAcrossRange) {
  // mpmath at 30 digits
  const std::pair<double, double> cases[] = {
      {0.1, 9.5135076986687312858},  {0.37, 2.4035500200786532783},  {1.5, 0.88622692545275801365},
      {2.95, 1.9107672699815324498}, {7.3, 1271.4236336639088399},   {13.25, 902965985.82293187636},
      {29.9, 6.304174488373721221e+30},
  };
  for (auto [x, g] : cases) EXPECT_NEAR(gamma_fn(x) / g, 1.0, 1e-12) << "x=" << x;
}

TEST(Gamma, PolesThrow) {
  EXPECT_THROW((void)gamma_fn(0.0), PoleError);
  EXPECT_THROW((void)gamma_fn(-1.0), PoleError);
  EXPECT_THROW((void)gamma_fn(-7.0), PoleError);
  EXPECT_NO_THROW((void)gamma_fn(-0.5));
}

TEST(Gamma, ReciprocalOnNegativeAxis) {
  EXPECT_EQ(reciprocal_gamma(-3.0), 0.0);
  EXPECT_NEAR(reciprocal_gamma(-0.5), -0.28209479177387814347, 1e-15);
  EXPECT_NEAR(reciprocal_gamma(-1.5), 0.42314218766081721521, 1e-15);
  EXPECT_NEAR(reciprocal_gamma(-2.7), -1.0740183539887440371, 1e-14);
}

TEST(FracOrder, RejectsOutsideUnitInterval) {
  EXPECT_THROW(FracOrder(0.0), std::invalid_argument);
  EXPECT_THROW(FracOrder(1.2), std::invalid_argument);
  EXPECT_THROW(FracOrder(-0.5), std::invalid_argument);
  EXPECT_NO_THROW(FracOrder(1.0));
  EXPECT_TRUE(FracOrder(1.0).is_integer());
}

TEST(GridFunction, Invariants) {
  EXPECT_THROW(GridFunction(0.0, 0.0, {1.0, 2.0}), std::invalid_argument);
  EXPECT_THROW(GridFunction(0.0, 0.1, {1.0}), std::invalid_argument);
  EXPECT_THROW(GridFunction(0.0, 0.1, {1.0, NAN}), std::invalid_argument);
  EXPECT_THROW(GridFunction(0.0, 0.1, {1.0, INFINITY}), std::invalid_argument);
  const GridFunction g = GridFunction::sample([](double t) { return 2.0 * t; }, 1.0, 0.5, 3);
  EXPECT_EQ(g.size(), 3u);
  EXPECT_DOUBLE_EQ(g.time(2), 2.0);
  EXPECT_DOUBLE_EQ(g[2], 4.0);
}

TEST(FracIntegral, ConstantHalfOrder) {
  const double dt = 1e-3;
  const auto f = GridFunction::sample([](double) { return 1.0; }, 0.0, dt, 2001);
  const auto g = frac_integral(f, FracOrder(0.5));
  EXPECT_EQ(g[0], 0.0);
  EXPECT_LT(max_rel_diff(g, [](double t) { return std::sqrt(t) / gamma_fn(1.5); }, dt), 1e-10);
}

TEST(FracIntegral, LinearIsExact) {
  const double dt = 1e-3;
  const auto f = GridFunction::sample([](double t) { return t; }, 0.0, dt, 3001);
  for (double a : {0.3, 0.5, 0.95}) {
    const auto g = frac_integral(f, FracOrder(a));
    auto exact = [a](double t) { return std::pow(t, 1.0 + a) / gamma_fn(2.0 + a); };
    EXPECT_LT(max_rel_diff(g, exact, dt), 1e-10) << "alpha=" << a;
  }
}

TEST(FracIntegral, ExponentialMatchesMittagLeffler) {
  const double dt = 1e-3;
  const auto f = GridFunction::sample([](double t) { return std::exp(-t); }, 0.0, dt, 5001);
  const auto g = frac_integral(f, FracOrder(0.95));
  auto exact = [](double t) { return std::pow(t, 0.95) * mittag_leffler({1.0, 1.95, -t}); };
  EXPECT_LT(max_rel_diff(g, exact, 0.1), 1e-3);
}

TEST(FracIntegral, SemigroupOnMonomials) {
  const double dt = 1e-3;
  for (int nu : {0, 1, 2}) {
    const auto f = GridFunction::sample([nu](double t) { return std::pow(t, nu); }, 0.0, dt, 2001);
    const auto twice = frac_integral(frac_integral(f, FracOrder(0.3)), FracOrder(0.5));
    const auto once = frac_integral(f, FracOrder(0.8));
    for (std::size_t k = 100; k < f.size(); ++k) {
      EXPECT_LE(std::fabs(twice[k] - once[k]), 5.0 * dt * std::fabs(once[k])) << "nu=" << nu << " k=" << k;
    }
  }
}

TEST(CaputoDerivative, ConstantIsZero) {
  const auto f = GridFunction::sample([](double) { return 3.5; }, 0.0, 1e-2, 200);
  for (double a : {0.3, 0.95, 1.0}) {
    const auto d = caputo_derivative(f, FracOrder(a));
    for (std::size_t k = 0; k < d.size(); ++k) EXPECT_EQ(d[k], 0.0);
  }
}

TEST(CaputoDerivative, LinearPowerRule) {
  const double dt = 1e-3;
  const auto f = GridFunction::sample([](double t) { return t; }, 0.0, dt, 2001);
  const auto d = caputo_derivative(f, FracOrder(0.5));
  EXPECT_EQ(d[0], 0.0);
  EXPECT_LT(max_rel_diff(d, [](double t) { return std::sqrt(t) / gamma_fn(1.5); }, dt), 1e-10);
}

TEST(CaputoDerivative, SineMatchesClosedForm) {
  const double dt = 1e-3;
  const auto f = GridFunction::sample([](double t) { return std::sin(0.5 * t); }, 0.0, dt, 5001);
  const auto d = caputo_derivative(f, FracOrder(0.95));
  EXPECT_LT(max_abs_diff(d, [](double t) { return caputo_sinusoid(0.5, FracOrder(0.95), t); }, dt), 1e-3);
}

TEST(CaputoDerivative, IntegerOrderIsCentralDifference) {
  const double dt = 1e-3;
  const auto f = GridFunction::sample([](double t) { return std::sin(t); }, 0.0, dt, 1001);
  const auto d = caputo_derivative(f, FracOrder(1.0));
  for (std::size_t k = 1; k + 1 < d.size(); ++k) EXPECT_NEAR(d[k], std::cos(d.time(k)), 1e-6);
}

TEST(CaputoSinusoid, Examples) {
  EXPECT_NEAR(caputo_sinusoid(0.5, FracOrder(1.0), std::numbers::pi), 0.0, 1e-15);
  EXPECT_EQ(caputo_sinusoid(0.5, FracOrder(0.95), 0.0), 0.0);
  // L1 scheme on a dt = 1e-4 grid
  const double dt = 1e-4;
  const auto f = GridFunction::sample([](double t) { return std::sin(0.5 * t); }, 0.0, dt, 20001);
  const auto d = caputo_derivative(f, FracOrder(0.95));
  EXPECT_NEAR(caputo_sinusoid(0.5, FracOrder(0.95), 2.0), d[20000], 1e-3);
}

TEST(CaputoSinusoid, HighPrecisionReference) {
  // term-wise differentiated sine series summed with mpmath
  EXPECT_NEAR(caputo_sinusoid(0.5, FracOrder(0.95), 2.0), 0.30405085542733984, 1e-13);
  EXPECT_NEAR(caputo_sinusoid(0.5, FracOrder(0.95), 25.0), 0.51202974116251998, 1e-12);
  EXPECT_NEAR(caputo_sinusoid(0.5, FracOrder(0.95), 60.0), 0.03943945996824845, 1e-12);
  EXPECT_NEAR(caputo_sinusoid(2.0, FracOrder(0.5), 40.0), -1.1048331106653373, 1e-12);
}

TEST(CaputoSinusoid, OddInOmega) {
  EXPECT_DOUBLE_EQ(caputo_sinusoid(-0.7, FracOrder(0.8), 3.0), -caputo_sinusoid(0.7, FracOrder(0.8), 3.0));
}

TEST(CaputoSinusoid, NegativeTimeRejected) {
  EXPECT_THROW((void)caputo_sinusoid(1.0, FracOrder(0.5), -1.0), std::invalid_argument);
}

class RoundTrip : public ::testing::TestWithParam<std::tuple<int, double>> {};

TEST_P(RoundTrip, IntegralOfDerivativeRecoversIncrement) {
  const auto [which, a] = GetParam();
  auto fn = [which](double t) {
    switch (which) {
      case 0: return t;
      case 1: return t * t;
      case 2: return std::sin(t);
      default: return std::exp(-t);
    }
  };
  const auto f = GridFunction::sample(fn, 0.0, 1e-3, 5001);
  const auto back = frac_integral(caputo_derivative(f, FracOrder(a)), FracOrder(a));
  double worst = 0.0;
  for (std::size_t k = 0; k < f.size(); ++k) worst = std::max(worst, std::fabs(back[k] - (f[k] - f[0])));
  EXPECT_LE(worst, 1e-2);
}

INSTANTIATE_TEST_SUITE_P(SmoothFunctions, RoundTrip,
                         ::testing::Combine(::testing::Values(0, 1, 2, 3), ::testing::Values(0.3, 0.5, 0.95)));

TEST(CaputoDerivative, QuadraticInequality) {
  // 1/2 D(x^2) <= x D(x) for smooth x
  const double dt = 1e-3;
  const auto x = GridFunction::sample([](double t) { return std::sin(t); }, 0.0, dt, 5001);
  const auto x2 = GridFunction::sample([](double t) { return std::sin(t) * std::sin(t); }, 0.0, dt, 5001);
  for (double a : {0.3, 0.5, 0.95}) {
    const auto dx = caputo_derivative(x, FracOrder(a));
    const auto dx2 = caputo_derivative(x2, FracOrder(a));
    for (std::size_t k = 1; k + 1 < x.size(); ++k) {
      EXPECT_LE(0.5 * dx2[k], x[k] * dx[k] + 10.0 * dt) << "alpha=" << a << " k=" << k;
    }
  }
}

}  // namespace
