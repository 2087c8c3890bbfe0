#pragma once

// The two simulation studies: a second-order plant (stabilization and
// tracking) and the fractional Chua-Hartley system, plus baseline variants
// that swap the smooth compensation for sign or arctan.

#include <string>
#include <vector>

#include "fracstep/backstep.hpp"
#include "fracstep/fdesolve.hpp"
#include "fracstep/frackernel.hpp"

namespace fracstep::scenarios {

enum class ControllerKind { proposed, sign_baseline, arctan_baseline, uncontrolled };

[[nodiscard]] std::string to_string(ControllerKind kind);
/// Accepts proposed|sign|arctan|none.
[[nodiscard]] ControllerKind parse_controller_kind(const std::string& name);

struct Sinusoid {
  enum class Kind { sin, cos };
  double amplitude = 0.0;
  double frequency = 0.0;
  Kind kind = Kind::sin;
};

struct Step {
  double amplitude = 0.0;
  double onset = 0.0;
};

/// d(t) = sum of sinusoids + sum of amplitude * U(t - onset), U(0) = 1.
struct DisturbanceSpec {
  std::vector<Sinusoid> sinusoids;
  std::vector<Step> steps;

  [[nodiscard]] double operator()(double t) const;
  /// sup_t |d(t)| upper bound: per-frequency phasor magnitudes plus |steps|.
  [[nodiscard]] double bound() const;
  /// Step onsets, sorted and de-duplicated.
  [[nodiscard]] std::vector<double> onsets() const;
  void validate() const;
};

struct Scenario {
  std::string name;
  control::PlantModel plant;
  control::ControllerGains gains;
  DisturbanceSpec disturbance;
  double reference_omega = 0.0;  // r = sin(omega t); 0 means r = 0
  std::vector<double> x0;
  kernel::FracOrder alpha{1.0};
  ControllerKind controller_kind = ControllerKind::proposed;
  double horizon = 1.0;
  double dt = 1e-3;

  /// r and its Caputo derivative of order alpha.
  [[nodiscard]] control::ReferenceSignal reference() const;
  [[nodiscard]] control::Backstepper make_controller() const;
  /// Closed loop as a solver problem; `ctrl` must outlive the result.
  [[nodiscard]] solve::CommensurateFDE make_system(const control::Backstepper& ctrl) const;
  /// Initial augmented state: x0 with zero estimates.
  [[nodiscard]] std::vector<double> initial_state() const;
};

/// Decay rates of eps(t) = e^{-a t}. Each keeps D_hat / eps(t) within what
/// the default step dt = 1e-3 resolves over the scenario horizon, so the
/// compensation stays a smooth boundary layer instead of switching per step.
inline constexpr double kSecondOrderEpsilonDecay = 0.06;
inline constexpr double kChuaHartleyEpsilonDecay = 0.15;

[[nodiscard]] Scenario second_order_scenario(ControllerKind kind, bool tracking);
[[nodiscard]] Scenario chua_hartley_scenario(ControllerKind kind);

/// Looks up a CLI scenario name (second-order-stabilize, second-order-track,
/// second-order-uncontrolled, chua-hartley, chua-hartley-uncontrolled).
[[nodiscard]] Scenario scenario_by_name(const std::string& name, ControllerKind kind);
[[nodiscard]] ControllerKind default_controller(const std::string& name);
[[nodiscard]] const std::vector<std::string>& scenario_names();

/// Control input with sign(z_n) or (2/pi) atan(10 z_n) in place of sg(z_n, eps).
[[nodiscard]] double baseline_control_input(ControllerKind kind, const control::PlantModel& plant,
                                            const control::ControllerGains& gains,
                                            const control::ReferenceSignal& reference, double t,
                                            std::span<const double> x, const control::AdaptiveState& est);

}  // namespace fracstep::scenarios
