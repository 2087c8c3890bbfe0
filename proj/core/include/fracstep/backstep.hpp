#pragma once

// Adaptive backstepping for commensurate fractional strict-feedback plants
//   D^a x_i = x_{i+1} + phi_i(x_1..x_i)^T theta_i        (i < n)
//   D^a x_n = g(x) u + phi_n(x)^T theta_n + d(t)
// with smooth disturbance-bound compensation sg(z_n, e^{-a t}) D_hat.

#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "fracstep/jet.hpp"

namespace fracstep::control {

class SingularGainError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// |g(x)| below this is rejected.
inline constexpr double kSingularGain = 1e-12;

/// Regressor phi_i evaluated on the first i states, in plain doubles or in jets.
struct Regressor {
  int p = 0;
  std::function<void(std::span<const double>, std::span<double>)> value;
  std::function<void(std::span<const ad::Jet>, std::span<ad::Jet>)> jet;
};

/// Wraps a generic callable f(x, out) usable with both double and Jet spans.
template <class F>
Regressor make_regressor(int p, F f) {
  return {p,
          [f](std::span<const double> x, std::span<double> out) { f(x, out); },
          [f](std::span<const ad::Jet> x, std::span<ad::Jet> out) { f(x, out); }};
}

struct PlantModel {
  int n = 0;
  int p = 0;
  std::vector<Regressor> phi;
  std::function<double(std::span<const double>)> g;
  std::vector<std::vector<double>> theta_true;
  std::function<double(double)> disturbance;

  void validate() const;
};

struct ControllerGains {
  std::vector<double> c;
  std::vector<Eigen::MatrixXd> Gamma;  // stage i is (p*i) x (p*i)
  std::vector<double> lambda;
  double eta = 1.0;
  double a = 1.0;

  /// Gamma_i = gamma[i] * I.
  static ControllerGains scaled_identity(int p, std::vector<double> c, const std::vector<double>& gamma,
                                         std::vector<double> lambda, double eta, double a);
  /// Throws std::invalid_argument unless every gain is positive and each
  /// Gamma_i is symmetric positive definite.
  void validate(int n, int p) const;
};

struct AdaptiveState {
  std::vector<std::vector<double>> theta_hat;  // theta_hat_{v,i}, length p*i
  std::vector<double> rho_hat;                 // rho_hat_1..rho_hat_{n-1}
  double D_hat = 0.0;

  static AdaptiveState zeros(int n, int p);
};

struct AdaptiveRates {
  std::vector<std::vector<double>> theta_hat;
  std::vector<double> rho_hat;
  double D_hat = 0.0;
};

struct ReferenceSignal {
  std::function<double(double)> r;
  std::function<double(double)> dr_alpha;

  static ReferenceSignal zero();
};

/// Virtual control alpha_i together with its partial derivatives. `jet`
/// carries the higher-order expansion later stages differentiate.
struct StageEval {
  int stage = 0;
  double value = 0.0;
  std::vector<double> d_dx;                  // d alpha_i / d x_j, j = 1..i
  std::vector<std::vector<double>> d_dtheta;  // d alpha_i / d theta_hat_{v,j}, j = 1..i
  ad::Jet jet;
};

/// Augmented closed-loop state [x; theta_hat_{v,1..n}; rho_hat_{1..n-1}; D_hat].
class StateLayout {
public:
  StateLayout(int n, int p);

  [[nodiscard]] int n() const noexcept { return n_; }
  [[nodiscard]] int p() const noexcept { return p_; }
  [[nodiscard]] std::size_t size() const noexcept;
  /// Offset of theta_hat_{v,i}, 1-based stage.
  [[nodiscard]] std::size_t theta_offset(int i) const noexcept;
  /// Offset of rho_hat_i, 1 <= i <= n-1.
  [[nodiscard]] std::size_t rho_offset(int i) const noexcept;
  [[nodiscard]] std::size_t d_hat_offset() const noexcept;

  [[nodiscard]] AdaptiveState unpack(std::span<const double> aug) const;
  void pack(std::span<const double> x, const AdaptiveState& est, std::span<double> aug) const;
  void pack_rates(std::span<const double> plant_rates, const AdaptiveRates& rates, std::span<double> out) const;

private:
  int n_;
  int p_;
};

enum class Compensation { smooth, sign, arctan };

/// x / sqrt(x^2 + eps^2).
[[nodiscard]] double sg(double x, double eps);
/// e^{-a t}.
[[nodiscard]] double epsilon_fn(double t, double a);
/// Disturbance compensation factor: sg(z, eps), sign(z) or (2/pi) atan(10 z).
[[nodiscard]] double compensation_factor(Compensation kind, double z, double eps);

// Stage-by-stage building blocks. Stages are 1-based; `earlier` holds the
// StageEval of stages 1..i-1 in order.
[[nodiscard]] StageEval eval_stage1(double x1, std::span<const double> theta_hat_1, double r, double ref_dr,
                                    const ControllerGains& gains, const PlantModel& plant);
[[nodiscard]] std::vector<double> build_phi_v(int i, std::span<const double> x, const StageEval& prev,
                                              const PlantModel& plant);
[[nodiscard]] double build_zeta(int i, std::span<const double> x, const StageEval& prev,
                                std::span<const std::vector<double>> theta_rates);
[[nodiscard]] StageEval eval_stage_i(int i, std::span<const double> x, const AdaptiveState& est,
                                     std::span<const StageEval> earlier, double r, double ref_dr,
                                     const ControllerGains& gains, const PlantModel& plant);

/// Full controller evaluation at one instant.
struct ControllerEval {
  std::vector<StageEval> stages;             // alpha_1..alpha_{n-1}
  std::vector<double> z;                     // z_1..z_n
  std::vector<std::vector<double>> phi_v;    // phi_{v,1..n}
  std::vector<double> zeta;                  // zeta_1..zeta_n (zeta_1 = 0)
  double eps = 1.0;
  double u = 0.0;
  AdaptiveRates rates;
};

struct BackstepOptions {
  Compensation compensation = Compensation::smooth;
  /// When false the loop is open: u = 0 and every estimate stays frozen.
  bool active = true;
};

class Backstepper {
public:
  Backstepper(PlantModel plant, ControllerGains gains, ReferenceSignal reference, BackstepOptions options = {});

  [[nodiscard]] ControllerEval evaluate(double t, std::span<const double> x, const AdaptiveState& est) const;
  [[nodiscard]] double control_input(double t, std::span<const double> x, const AdaptiveState& est) const;
  [[nodiscard]] AdaptiveRates adaptive_rates(double t, std::span<const double> x, const AdaptiveState& est) const;

  /// Plant rates D^a x for a given control input.
  void plant_rates(double t, std::span<const double> x, double u, std::span<double> out) const;
  /// Caputo rates of the augmented state.
  void closed_loop_rhs(double t, std::span<const double> aug, std::span<double> out) const;

  [[nodiscard]] const StateLayout& layout() const noexcept { return layout_; }
  [[nodiscard]] const PlantModel& plant() const noexcept { return plant_; }
  [[nodiscard]] const ControllerGains& gains() const noexcept { return gains_; }
  [[nodiscard]] const ReferenceSignal& reference() const noexcept { return reference_; }
  [[nodiscard]] const BackstepOptions& options() const noexcept { return options_; }

private:
  PlantModel plant_;
  ControllerGains gains_;
  ReferenceSignal reference_;
  BackstepOptions options_;
  StateLayout layout_;
};

}  // namespace fracstep::control
