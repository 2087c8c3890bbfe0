#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "fracstep/backstep.hpp"
#include "fracstep/scenarios.hpp"

namespace {

using namespace fracstep::control;
using fracstep::scenarios::chua_hartley_scenario;
using fracstep::scenarios::ControllerKind;
using fracstep::scenarios::second_order_scenario;

PlantModel zero_regressor_plant(int n) {
  PlantModel plant;
  plant.n = n;
  plant.p = 1;
  for (int i = 0; i < n; ++i) plant.phi.push_back(make_regressor(1, [](auto, auto out) { out[0] = 0.0; }));
  plant.g = [](std::span<const double>) { return 1.0; };
  plant.theta_true.assign(n, {1.0});
  plant.disturbance = [](double) { return 0.0; };
  return plant;
}

ReferenceSignal constant_reference(double r) {
  return {[r](double) { return r; }, [](double) { return 0.0; }};
}

TEST(Sg, Examples) {
  EXPECT_EQ(sg(0.0, 1.0), 0.0);
  EXPECT_DOUBLE_EQ(sg(3.0, 4.0), 0.6);
}

TEST(Sg, BoundAndSymmetryOnRandomSamples) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> xs(-50.0, 50.0);
  std::uniform_real_distribution<double> es(1e-6, 10.0);
  for (int k = 0; k < 1000; ++k) {
    const double x = xs(rng);
    const double e = es(rng);
    EXPECT_LT(std::fabs(x), e + x * sg(x, e));
    EXPECT_LT(std::fabs(sg(x, e)), 1.0);
    EXPECT_EQ(sg(-x, e), -sg(x, e));
  }
}

TEST(EpsilonFn, Examples) {
  EXPECT_EQ(epsilon_fn(0.0, 0.7), 1.0);
  EXPECT_NEAR(epsilon_fn(1.0, 1.0), 0.36787944117144233, 1e-16);
  EXPECT_NEAR(epsilon_fn(0.3, 2.0) * epsilon_fn(1.1, 2.0), epsilon_fn(1.4, 2.0), 1e-16);
}

TEST(CompensationFactor, Kinds) {
  EXPECT_EQ(compensation_factor(Compensation::sign, 0.0, 1.0), 0.0);
  EXPECT_EQ(compensation_factor(Compensation::sign, 0.01, 1.0) - compensation_factor(Compensation::sign, -0.01, 1.0), 2.0);
  EXPECT_NEAR(compensation_factor(Compensation::arctan, 1e9, 1.0), 1.0, 1e-9);
  EXPECT_DOUBLE_EQ(compensation_factor(Compensation::smooth, 3.0, 4.0), 0.6);
}

TEST(ControllerGains, Validation) {
  auto ok = ControllerGains::scaled_identity(1, {1.0, 2.0}, {1.0, 1.0}, {1.0}, 1.0, 1.0);
  EXPECT_NO_THROW(ok.validate(2, 1));
  auto bad_c = ok;
  bad_c.c[1] = 0.0;
  EXPECT_THROW(bad_c.validate(2, 1), std::invalid_argument);
  auto indefinite = ok;
  indefinite.Gamma[1] << 1.0, 2.0, 2.0, 1.0;
  EXPECT_THROW(indefinite.validate(2, 1), std::invalid_argument);
  auto asym = ok;
  asym.Gamma[1] << 1.0, 0.5, 0.0, 1.0;
  EXPECT_THROW(asym.validate(2, 1), std::invalid_argument);
  auto wrong_dim = ok;
  wrong_dim.Gamma[1] = Eigen::MatrixXd::Identity(3, 3);
  EXPECT_THROW(wrong_dim.validate(2, 1), std::invalid_argument);
  auto bad_a = ok;
  bad_a.a = -1.0;
  EXPECT_THROW(bad_a.validate(2, 1), std::invalid_argument);
}

TEST(StateLayout, Dimensions) {
  EXPECT_EQ(StateLayout(2, 1).size(), 7u);
  EXPECT_EQ(StateLayout(3, 1).size(), 12u);
  const StateLayout lay(3, 2);
  EXPECT_EQ(lay.size(), 3u + 12u + 2u + 1u);
  EXPECT_EQ(lay.theta_offset(1), 3u);
  EXPECT_EQ(lay.theta_offset(2), 5u);
  EXPECT_EQ(lay.theta_offset(3), 9u);
  EXPECT_EQ(lay.rho_offset(1), 15u);
  EXPECT_EQ(lay.d_hat_offset(), 17u);
}

TEST(StateLayout, PackUnpackRoundTrip) {
  const StateLayout lay(3, 1);
  std::vector<double> aug(lay.size());
  for (std::size_t i = 0; i < aug.size(); ++i) aug[i] = 0.5 * static_cast<double>(i) - 1.0;
  const AdaptiveState est = lay.unpack(aug);
  std::vector<double> back(lay.size(), 0.0);
  lay.pack(std::span<const double>(aug).first(3), est, back);
  EXPECT_EQ(back, aug);
}

TEST(EvalStage1, Examples) {
  const auto s = second_order_scenario(ControllerKind::proposed, false);
  const double th = 0.5;
  const StageEval e = eval_stage1(1.0, std::span<const double>(&th, 1), 0.0, 0.0, s.gains, s.plant);
  EXPECT_DOUBLE_EQ(e.value, -29.8);
  // d/dx1 = -c1 - theta * d phi1/dx1 = -30 - 0.5 * (-0.8)
  EXPECT_DOUBLE_EQ(e.d_dx[0], -29.6);
  EXPECT_DOUBLE_EQ(e.d_dtheta[0][0], 0.4);

  const auto zero = zero_regressor_plant(2);
  auto gains = ControllerGains::scaled_identity(1, {30.0, 1.0}, {1.0, 1.0}, {1.0}, 1.0, 1.0);
  const double th0 = 0.0;
  EXPECT_EQ(eval_stage1(0.0, std::span<const double>(&th0, 1), 0.0, 0.0, gains, zero).value, 0.0);
  EXPECT_NEAR(eval_stage1(0.1, std::span<const double>(&th0, 1), 0.0, 0.0, gains, zero).value, -3.0, 1e-15);
}

TEST(BuildPhiV, Examples) {
  const auto s = second_order_scenario(ControllerKind::proposed, false);
  const std::vector<double> x{0.0, 0.7};
  const double th = 0.3;
  const StageEval prev = eval_stage1(x[0], std::span<const double>(&th, 1), 0.0, 0.0, s.gains, s.plant);
  const auto pv = build_phi_v(2, x, prev, s.plant);
  ASSERT_EQ(pv.size(), 2u);
  EXPECT_DOUBLE_EQ(pv[0], -0.1 * 0.7 + 0.7);
  EXPECT_EQ(pv[1], 0.0);

  const auto zero = zero_regressor_plant(3);
  auto gains = ControllerGains::scaled_identity(1, {1.0, 1.0, 1.0}, {1.0, 1.0, 1.0}, {1.0, 1.0}, 1.0, 1.0);
  const std::vector<double> x3{0.3, -0.2, 0.1};
  const auto est = AdaptiveState::zeros(3, 1);
  const StageEval s1 = eval_stage1(x3[0], est.theta_hat[0], 0.0, 0.0, gains, zero);
  const StageEval s2 = eval_stage_i(2, x3, est, std::span<const StageEval>(&s1, 1), 0.0, 0.0, gains, zero);
  const auto pv3 = build_phi_v(3, x3, s2, zero);
  EXPECT_EQ(pv3, std::vector<double>(3, 0.0));
}

TEST(BuildZeta, Examples) {
  StageEval prev;
  prev.d_dx = {0.0};
  prev.d_dtheta = {{0.0}};
  const std::vector<double> x{0.4, -0.3};
  const std::vector<std::vector<double>> rates{{0.0}};
  EXPECT_EQ(build_zeta(2, x, prev, rates), 0.0);
  prev.d_dx = {2.5};
  EXPECT_DOUBLE_EQ(build_zeta(2, x, prev, rates), -2.5 * -0.3);
  prev.d_dtheta = {{1.5}};
  const std::vector<std::vector<double>> r2{{2.0}};
  EXPECT_DOUBLE_EQ(build_zeta(2, x, prev, r2), 0.75 - 3.0);
}

TEST(EvalStageI, ArithmeticExample) {
  // z_{i-1} = 1, c_i = 2, z_i = 0.5, everything else zero -> -2
  const auto zero = zero_regressor_plant(3);
  auto gains = ControllerGains::scaled_identity(1, {1.0, 2.0, 1.0}, {1.0, 1.0, 1.0}, {1.0, 1.0}, 1.0, 1.0);
  // r = -1 makes z1 = 1 with alpha1 = -c1 z1 = -1, so x2 = -0.5 gives z2 = 0.5.
  const std::vector<double> x{0.0, -0.5, 0.0};
  const auto est = AdaptiveState::zeros(3, 1);
  const StageEval s1 = eval_stage1(x[0], est.theta_hat[0], -1.0, 0.0, gains, zero);
  ASSERT_DOUBLE_EQ(s1.value, -1.0);
  const StageEval s2 = eval_stage_i(2, x, est, std::span<const StageEval>(&s1, 1), -1.0, 0.0, gains, zero);
  // zeta_2 = -(d alpha1/dx1) x2 = -(-1)(-0.5) = -0.5 is the only extra term.
  EXPECT_DOUBLE_EQ(s2.value + -0.5, -2.0);

  const std::vector<double> origin(3, 0.0);
  const StageEval o1 = eval_stage1(0.0, est.theta_hat[0], 0.0, 0.0, gains, zero);
  EXPECT_EQ(eval_stage_i(2, origin, est, std::span<const StageEval>(&o1, 1), 0.0, 0.0, gains, zero).value, 0.0);
}

TEST(EvalStageI, RejectsBadStage) {
  const auto s = chua_hartley_scenario(ControllerKind::proposed);
  const auto est = AdaptiveState::zeros(3, 1);
  const std::vector<double> x{0.1, 0.2, 0.3};
  EXPECT_THROW((void)eval_stage_i(3, x, est, {}, 0.0, 0.0, s.gains, s.plant), std::invalid_argument);
}

TEST(ControlInput, ArithmeticExample) {
  // z2 = 0.5, D_hat = 2, eps = 1, c2 = 1: u = -(0.5 + 2 * 0.5/sqrt(1.25)) - zeta_2
  const auto plant = zero_regressor_plant(2);
  auto gains = ControllerGains::scaled_identity(1, {1e-3, 1.0}, {1.0, 1.0}, {1.0}, 1.0, 1.0);
  const Backstepper ctrl(plant, gains, ReferenceSignal::zero());
  auto est = AdaptiveState::zeros(2, 1);
  est.D_hat = 2.0;
  const std::vector<double> x{0.0, 0.5};
  const auto ev = ctrl.evaluate(0.0, x, est);
  EXPECT_DOUBLE_EQ(ev.zeta[1], 1e-3 * 0.5);
  EXPECT_NEAR(ev.u + ev.zeta[1], -1.3944271909999159, 1e-15);

  const std::vector<double> origin{0.0, 0.0};
  EXPECT_EQ(ctrl.control_input(0.0, origin, AdaptiveState::zeros(2, 1)), 0.0);
}

TEST(ControlInput, SingularGainRejected) {
  auto plant = zero_regressor_plant(2);
  plant.g = [](std::span<const double>) { return 1e-14; };
  auto gains = ControllerGains::scaled_identity(1, {1.0, 1.0}, {1.0, 1.0}, {1.0}, 1.0, 1.0);
  const Backstepper ctrl(plant, gains, ReferenceSignal::zero());
  const std::vector<double> x{0.1, 0.1};
  EXPECT_THROW((void)ctrl.control_input(0.0, x, AdaptiveState::zeros(2, 1)), SingularGainError);
  std::vector<double> aug(7, 0.0), out(7);
  EXPECT_THROW(ctrl.closed_loop_rhs(0.0, aug, out), SingularGainError);
}

TEST(AdaptiveRates, Examples) {
  auto s = second_order_scenario(ControllerKind::proposed, false);
  const Backstepper zero_ref(s.plant, s.gains, ReferenceSignal::zero());
  const std::vector<double> origin{0.0, 0.0};
  const auto r0 = zero_ref.adaptive_rates(0.0, origin, AdaptiveState::zeros(2, 1));
  EXPECT_EQ(r0.theta_hat[0][0], 0.0);
  EXPECT_EQ(r0.theta_hat[1], std::vector<double>(2, 0.0));
  EXPECT_EQ(r0.rho_hat[0], 0.0);
  EXPECT_EQ(r0.D_hat, 0.0);

  // z1 = 0.2 with x1 = 1: D^a theta_hat_1 = 0.2 * 2 * (-0.4)
  const Backstepper ref08(s.plant, s.gains, constant_reference(0.8));
  const std::vector<double> x{1.0, 0.0};
  EXPECT_NEAR(ref08.adaptive_rates(0.0, x, AdaptiveState::zeros(2, 1)).theta_hat[0][0], -0.16, 1e-15);

  // D_hat rate with eta = 4, z2 = 0.3, eps = 1
  const auto plant = zero_regressor_plant(2);
  auto gains = ControllerGains::scaled_identity(1, {1.0, 1.0}, {1.0, 1.0}, {1.0}, 4.0, 1.0);
  const Backstepper ctrl(plant, gains, ReferenceSignal::zero());
  const std::vector<double> xz{0.0, 0.3};
  const auto rates = ctrl.adaptive_rates(0.0, xz, AdaptiveState::zeros(2, 1));
  EXPECT_NEAR(rates.D_hat, 4.0 * 0.3 * 0.3 / std::sqrt(1.09), 1e-15);
  EXPECT_NEAR(rates.D_hat, 0.3448, 1e-4);
  EXPECT_DOUBLE_EQ(rates.rho_hat[0], 0.3 * 1.0);
}

TEST(ClosedLoop, OriginOfSecondOrderPlant) {
  auto s = second_order_scenario(ControllerKind::proposed, false);
  s.plant.disturbance = [](double) { return 0.0; };
  const auto ctrl = s.make_controller();
  std::vector<double> aug(ctrl.layout().size(), 0.0), out(aug.size());
  ctrl.closed_loop_rhs(0.0, aug, out);
  EXPECT_EQ(out[0], 0.0);
  EXPECT_TRUE(std::isfinite(out[1]));
  EXPECT_EQ(out[1], ctrl.control_input(0.0, std::span<const double>(aug).first(2), AdaptiveState::zeros(2, 1)));
}

TEST(ClosedLoop, UncontrolledFreezesEstimates) {
  const auto s = chua_hartley_scenario(ControllerKind::uncontrolled);
  const auto ctrl = s.make_controller();
  auto aug = s.initial_state();
  std::vector<double> out(aug.size());
  ctrl.closed_loop_rhs(1.0, aug, out);
  for (std::size_t i = 3; i < out.size(); ++i) EXPECT_EQ(out[i], 0.0);
  // x3 rate is phi3 + d only
  EXPECT_DOUBLE_EQ(out[2], -100.0 / 7.0 * -2.0 + 0.5 * std::sin(2.0));
}

// tests/oracles/backstep_oracle.py
TEST(SymbolicOracle, SecondOrderSnapshot) {
  const auto s = second_order_scenario(ControllerKind::proposed, false);
  const auto ctrl = s.make_controller();
  AdaptiveState est = AdaptiveState::zeros(2, 1);
  est.theta_hat = {{0.3}, {-0.5, 0.7}};
  est.rho_hat = {0.15};
  est.D_hat = 1.2;
  const std::vector<double> x{0.2, -0.1};
  const auto ev = ctrl.evaluate(1.5, x, est);
  EXPECT_NEAR(ev.stages[0].value, -5.9952, 1e-13);
  EXPECT_NEAR(ev.stages[0].d_dx[0], -29.952, 1e-13);
  EXPECT_NEAR(ev.zeta[1], -2.9950976, 1e-13);
  EXPECT_NEAR(ev.phi_v[1][0], -0.10980830670926517572, 1e-15);
  EXPECT_NEAR(ev.phi_v[1][1], -0.479232, 1e-15);
  EXPECT_NEAR(ev.u, -4.1553784660334341588, 1e-12);

  // the double-only building blocks agree with the full evaluation
  const auto pv = build_phi_v(2, x, ev.stages[0], s.plant);
  EXPECT_NEAR(pv[1], ev.phi_v[1][1], 1e-15);
  EXPECT_NEAR(build_zeta(2, x, ev.stages[0], ev.rates.theta_hat), ev.zeta[1], 1e-13);
}

TEST(SymbolicOracle, ChuaHartleySnapshot) {
  const auto s = chua_hartley_scenario(ControllerKind::proposed);
  const auto ctrl = s.make_controller();
  AdaptiveState est = AdaptiveState::zeros(3, 1);
  est.theta_hat = {{0.1}, {0.2, -0.3}, {0.4, 0.5, -0.6}};
  est.rho_hat = {0.25, -0.125};
  est.D_hat = 0.3;
  const std::vector<double> x{0.8, -2.0, 1.0};
  const auto ev = ctrl.evaluate(2.0, x, est);
  EXPECT_NEAR(ev.stages[0].value, -1.6411428571428571429, 1e-13);
  EXPECT_NEAR(ev.stages[1].value, 1.6219503673469387755, 1e-12);
  EXPECT_NEAR(ev.stages[1].d_dx[0], -8.8603689795918367347, 1e-12);
  EXPECT_NEAR(ev.stages[1].d_dx[1], -3.6685714285714285714, 1e-12);
  EXPECT_NEAR(ev.zeta[1], -3.7236009795918367347, 1e-12);
  EXPECT_NEAR(ev.zeta[2], -17.543006758219991194, 1e-11);
  EXPECT_NEAR(ev.phi_v[2][2], 3.6454089516034985423, 1e-12);
  EXPECT_NEAR(ev.u, -8.1205222146784024620, 1e-11);

  const StageEval s2 = eval_stage_i(2, x, est, std::span<const StageEval>(ev.stages.data(), 1), 0.0, 0.0, s.gains, s.plant);
  EXPECT_EQ(s2.value, ev.stages[1].value);
}

// Central differences of the stage values through full re-evaluation.
void check_partials_against_fd(const fracstep::scenarios::Scenario& s, std::uint64_t seed, int samples) {
  const auto ctrl = s.make_controller();
  const int n = s.plant.n;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(-1.5, 1.5);
  for (int k = 0; k < samples; ++k) {
    std::vector<double> x(n);
    for (auto& v : x) v = U(rng);
    AdaptiveState est = AdaptiveState::zeros(n, 1);
    for (auto& th : est.theta_hat) {
      for (auto& v : th) v = U(rng);
    }
    for (auto& v : est.rho_hat) v = U(rng);
    est.D_hat = std::fabs(U(rng));
    const double t = 1.0 + std::fabs(U(rng));
    const auto ev = ctrl.evaluate(t, x, est);

    auto stage_value = [&](int i, const std::vector<double>& xx, const AdaptiveState& ee) {
      return ctrl.evaluate(t, xx, ee).stages[i - 1].value;
    };
    auto close = [](double ad, double fd) { return std::fabs(ad - fd) <= 1e-5 * std::max(1.0, std::fabs(ad)); };
    for (int i = 1; i < n; ++i) {
      const StageEval& se = ev.stages[i - 1];
      for (int j = 1; j <= i; ++j) {
        const double h = 1e-6 * std::max(1.0, std::fabs(x[j - 1]));
        auto xp = x, xm = x;
        xp[j - 1] += h;
        xm[j - 1] -= h;
        const double fd = (stage_value(i, xp, est) - stage_value(i, xm, est)) / (2.0 * h);
        EXPECT_TRUE(close(se.d_dx[j - 1], fd)) << "stage " << i << " x" << j << " ad=" << se.d_dx[j - 1] << " fd=" << fd;
      }
      for (int j = 1; j <= i; ++j) {
        for (std::size_t e = 0; e < est.theta_hat[j - 1].size(); ++e) {
          const double v = est.theta_hat[j - 1][e];
          const double h = 1e-6 * std::max(1.0, std::fabs(v));
          auto ep = est, em = est;
          ep.theta_hat[j - 1][e] += h;
          em.theta_hat[j - 1][e] -= h;
          const double fd = (stage_value(i, x, ep) - stage_value(i, x, em)) / (2.0 * h);
          EXPECT_TRUE(close(se.d_dtheta[j - 1][e], fd))
              << "stage " << i << " theta" << j << "," << e << " ad=" << se.d_dtheta[j - 1][e] << " fd=" << fd;
        }
      }
    }
  }
}

TEST(Partials, MatchFiniteDifferencesSecondOrder) {
  check_partials_against_fd(second_order_scenario(ControllerKind::proposed, true), 11, 200);
}

TEST(Partials, MatchFiniteDifferencesChuaHartley) {
  check_partials_against_fd(chua_hartley_scenario(ControllerKind::proposed), 12, 200);
}

}  // namespace
