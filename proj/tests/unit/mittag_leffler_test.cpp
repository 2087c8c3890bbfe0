#include <cmath>

#include <gtest/gtest.h>

#include "fracstep/frackernel.hpp"

namespace {

using namespace fracstep::kernel;

struct Reference {
  double alpha;
  double beta;
  double z;
  double value;
};

// tests/oracles/mittag_leffler_oracle.py
constexpr Reference kReferences[] = {
    {1.0, 1.0, 1.0, 2.7182818284590452},
    {1.0, 2.0, -1.0, 0.63212055882855768},
    {1.0, 1.95, -5.0, 0.19512497033726878},
    {1.0, 1.95, -10.0, 0.09749778007708864},
    {1.0, 1.95, -50.0, 0.019409931630292496},
    {1.0, 1.95, -100.0, 0.009699957762824244},
    {1.0, 1.95, -1000.0, 0.00096955435209759555},
    {0.8, 1.0, -6.3, 0.04305981764598776},
    {0.8, 1.0, -20.0, 0.011617250451432778},
    {0.8, 1.0, -50.0, 0.0044677761579029923},
    {0.95, 1.0, -20.0, 0.0028432225780766326},
    {0.5, 1.0, -3.0, 0.17900115118138995},
    {2.0, 1.05, -900.0, 0.064276673514542289},
    {2.0, 1.05, -49.0, 0.72775836153134598},
    {0.8, 1.8, -50.0, 0.01991064447684194},
};

TEST(MittagLeffler, MatchesHighPrecisionSeries) {
  for (const auto& r : kReferences) {
    const double v = mittag_leffler({r.alpha, r.beta, r.z});
    EXPECT_NEAR(v / r.value, 1.0, 1e-11) << "alpha=" << r.alpha << " beta=" << r.beta << " z=" << r.z;
  }
}

TEST(MittagLeffler, ZeroArgumentIsReciprocalGamma) {
  for (double b : {0.5, 1.0, 1.95, 3.0}) EXPECT_DOUBLE_EQ(mittag_leffler({0.7, b, 0.0}), 1.0 / std::tgamma(b));
}

TEST(MittagLeffler, ExponentialSpecialCase) {
  for (double z : {-3.0, -0.5, 0.25, 2.0, 10.0}) EXPECT_NEAR(mittag_leffler({1.0, 1.0, z}) / std::exp(z), 1.0, 1e-13);
  EXPECT_NEAR(mittag_leffler({1.0, 2.0, -1.0}), 1.0 - std::exp(-1.0), 1e-15);
}

TEST(MittagLeffler, CosineSpecialCase) {
  for (double x : {0.3, 2.0, 7.0, 20.0}) EXPECT_NEAR(mittag_leffler({2.0, 1.0, -x * x}), std::cos(x), 1e-12);
}

TEST(MittagLeffler, BranchSelection) {
  EXPECT_EQ(mittag_leffler_branch({1.0, 1.95, -10.0}), MLBranch::series);
  EXPECT_EQ(mittag_leffler_branch({0.95, 1.95, -500.0}), MLBranch::asymptotic);
  EXPECT_EQ(mittag_leffler_branch({0.8, 1.0, 5.0}), MLBranch::series);
  // Non-integer alpha with a large series peak cannot certify the series sum.
  EXPECT_EQ(mittag_leffler_branch({0.8, 1.0, -15.0}), MLBranch::integral);
}

TEST(MittagLeffler, BranchConsistencyAtSwitch) {
  const MLParams p{1.0, 1.95, -kMittagLefflerSwitch};
  const auto s = mittag_leffler_series(p);
  const auto a = mittag_leffler_asymptotic(p);
  EXPECT_NEAR(s.value / a.value, 1.0, 1e-8);
}

TEST(MittagLeffler, IntegralBranchMatchesReference) {
  // tests/oracles/mittag_leffler_oracle.py
  const Reference cases[] = {
      {0.8, 1.0, -2.0, 0.18979669236370565},
      {0.8, 1.0, -15.0, 0.015843800747790798},
      {0.95, 1.95, -10.0, 0.099349286468774394},
      {0.5, 1.9, -4.0, 0.23042500116226641},
  };
  for (const auto& r : cases) {
    const auto q = mittag_leffler_integral({r.alpha, r.beta, r.z});
    ASSERT_TRUE(q.converged) << r.z;
    EXPECT_NEAR(q.value / r.value, 1.0, 1e-12) << "alpha=" << r.alpha << " beta=" << r.beta << " z=" << r.z;
  }
}

TEST(MittagLeffler, SeriesFlagsCancellation) {
  const auto s = mittag_leffler_series({0.8, 1.0, -15.0});
  EXPECT_FALSE(s.converged);
  EXPECT_GT(s.error_estimate, 1e-12);
}

TEST(MittagLeffler, AsymptoticRefusesPositiveArgument) {
  EXPECT_FALSE(mittag_leffler_asymptotic({0.5, 1.0, 60.0}).converged);
}

TEST(MittagLeffler, NonConvergenceReported) {
  // Huge positive argument overflows the series.
  EXPECT_THROW((void)mittag_leffler({0.5, 1.0, 1000.0}), NonConvergenceError);
}

TEST(MittagLeffler, RejectsInvalidParameters) {
  EXPECT_THROW((void)mittag_leffler({0.0, 1.0, 1.0}), std::invalid_argument);
  EXPECT_THROW((void)mittag_leffler({1.0, -1.0, 1.0}), std::invalid_argument);
  EXPECT_THROW((void)mittag_leffler({1.0, 1.0, NAN}), std::invalid_argument);
}

TEST(MittagLeffler, PowerTimesMLDecaysToZero) {
  double prev = INFINITY;
  for (double t : {10.0, 100.0, 1000.0}) {
    const double v = std::pow(t, 0.95) * mittag_leffler({1.0, 1.95, -t});
    EXPECT_LT(v, prev);
    EXPECT_GT(v, 0.0);
    prev = v;
  }
  // t^a E_{1,a+1}(-t) = I^a e^{-t} ~ t^{a-1}/Gamma(a) for large t
  EXPECT_NEAR(prev, std::pow(1000.0, -0.05) / std::tgamma(0.95), 1e-3);
}

}  // namespace
