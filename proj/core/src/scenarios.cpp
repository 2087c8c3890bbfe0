#include "fracstep/scenarios.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace fracstep::scenarios {

using control::ControllerGains;
using control::make_regressor;
using control::PlantModel;

std::string to_string(ControllerKind kind) {
  switch (kind) {
    case ControllerKind::proposed: return "proposed";
    case ControllerKind::sign_baseline: return "sign";
    case ControllerKind::arctan_baseline: return "arctan";
    case ControllerKind::uncontrolled: return "none";
  }
  return "unknown";
}

ControllerKind parse_controller_kind(const std::string& name) {
  if (name == "proposed") return ControllerKind::proposed;
  if (name == "sign") return ControllerKind::sign_baseline;
  if (name == "arctan") return ControllerKind::arctan_baseline;
  if (name == "none") return ControllerKind::uncontrolled;
  throw std::invalid_argument("unknown controller '" + name + "' (expected proposed, sign, arctan or none)");
}

double DisturbanceSpec::operator()(double t) const {
  double d = 0.0;
  for (const auto& s : sinusoids) {
    const double arg = s.frequency * t;
    d += s.amplitude * (s.kind == Sinusoid::Kind::sin ? std::sin(arg) : std::cos(arg));
  }
  for (const auto& st : steps) {
    if (t >= st.onset) d += st.amplitude;
  }
  return d;
}

double DisturbanceSpec::bound() const {
  // sin and cos at the same frequency combine into one phasor.
  std::map<double, std::pair<double, double>> by_freq;
  double constant = 0.0;
  for (const auto& s : sinusoids) {
    if (s.frequency == 0.0) {
      if (s.kind == Sinusoid::Kind::cos) constant += s.amplitude;
      continue;
    }
    auto& [a_sin, a_cos] = by_freq[std::fabs(s.frequency)];
    const double sign = s.frequency < 0.0 && s.kind == Sinusoid::Kind::sin ? -1.0 : 1.0;
    (s.kind == Sinusoid::Kind::sin ? a_sin : a_cos) += sign * s.amplitude;
  }
  double b = std::fabs(constant);
  for (const auto& [f, ac] : by_freq) b += std::hypot(ac.first, ac.second);
  for (const auto& st : steps) b += std::fabs(st.amplitude);
  return b;
}

std::vector<double> DisturbanceSpec::onsets() const {
  std::vector<double> t;
  for (const auto& st : steps) t.push_back(st.onset);
  std::sort(t.begin(), t.end());
  t.erase(std::unique(t.begin(), t.end()), t.end());
  return t;
}

void DisturbanceSpec::validate() const {
  for (const auto& st : steps) {
    if (!(st.onset >= 0.0)) throw std::invalid_argument("DisturbanceSpec: step onsets must be >= 0");
  }
}

control::ReferenceSignal Scenario::reference() const {
  if (reference_omega == 0.0) return control::ReferenceSignal::zero();
  const double w = reference_omega;
  const kernel::FracOrder a = alpha;
  return {[w](double t) { return std::sin(w * t); }, [w, a](double t) { return kernel::caputo_sinusoid(w, a, t); }};
}

control::Backstepper Scenario::make_controller() const {
  control::BackstepOptions opt;
  switch (controller_kind) {
    case ControllerKind::proposed: opt.compensation = control::Compensation::smooth; break;
    case ControllerKind::sign_baseline: opt.compensation = control::Compensation::sign; break;
    case ControllerKind::arctan_baseline: opt.compensation = control::Compensation::arctan; break;
    case ControllerKind::uncontrolled: opt.active = false; break;
  }
  return control::Backstepper(plant, gains, reference(), opt);
}

solve::CommensurateFDE Scenario::make_system(const control::Backstepper& ctrl) const {
  solve::CommensurateFDE sys;
  sys.order = alpha;
  sys.dim = ctrl.layout().size();
  sys.rhs = [&ctrl](double t, std::span<const double> x, std::span<double> r) { ctrl.closed_loop_rhs(t, x, r); };
  sys.discontinuity_times = disturbance.onsets();
  return sys;
}

std::vector<double> Scenario::initial_state() const {
  const control::StateLayout lay(plant.n, plant.p);
  std::vector<double> aug(lay.size(), 0.0);
  lay.pack(x0, control::AdaptiveState::zeros(plant.n, plant.p), aug);
  return aug;
}

namespace {

PlantModel make_plant(int n, std::vector<control::Regressor> phi, DisturbanceSpec d) {
  PlantModel plant;
  plant.n = n;
  plant.p = 1;
  plant.phi = std::move(phi);
  plant.g = [](std::span<const double>) { return 1.0; };
  plant.theta_true.assign(n, std::vector<double>{1.0});
  plant.disturbance = [d = std::move(d)](double t) { return d(t); };
  return plant;
}

}  // namespace

Scenario second_order_scenario(ControllerKind kind, bool tracking) {
  Scenario s;
  s.name = kind == ControllerKind::uncontrolled ? "second-order-uncontrolled"
                                                 : (tracking ? "second-order-track" : "second-order-stabilize");
  s.disturbance = {{{1.0, 1.0, Sinusoid::Kind::sin}, {1.0, 1.0, Sinusoid::Kind::cos}}, {{2.0, 15.0}}};
  std::vector<control::Regressor> phi;
  phi.push_back(make_regressor(1, [](auto x, auto out) { out[0] = -0.4 * x[0] * x[0]; }));
  phi.push_back(make_regressor(1, [](auto x, auto out) {
    const auto x1sq = x[0] * x[0];
    out[0] = -0.1 * x[1] + (x[1] - 0.5 * x1sq) / (1.0 + x1sq * x1sq);
  }));
  s.plant = make_plant(2, std::move(phi), s.disturbance);
  s.gains = ControllerGains::scaled_identity(1, {30.0, 1.0}, {2.0, 2.0}, {2.0}, 4.0, kSecondOrderEpsilonDecay);
  s.reference_omega = tracking ? 0.5 : 0.0;
  s.x0 = {0.5, 0.5};
  s.alpha = kernel::FracOrder(0.95);
  s.controller_kind = kind;
  s.horizon = kind == ControllerKind::uncontrolled ? 50.0 : (tracking ? 60.0 : 40.0);
  return s;
}

Scenario chua_hartley_scenario(ControllerKind kind) {
  Scenario s;
  s.name = kind == ControllerKind::uncontrolled ? "chua-hartley-uncontrolled" : "chua-hartley";
  s.disturbance = {{{0.5, 2.0, Sinusoid::Kind::sin}}, {{3.0, 10.0}}};
  std::vector<control::Regressor> phi;
  phi.push_back(make_regressor(1, [](auto x, auto out) { out[0] = 10.0 / 7.0 * (x[0] - x[0] * x[0] * x[0]); }));
  phi.push_back(make_regressor(1, [](auto x, auto out) { out[0] = 10.0 * x[0] - x[1]; }));
  phi.push_back(make_regressor(1, [](auto x, auto out) { out[0] = -100.0 / 7.0 * x[1]; }));
  s.plant = make_plant(3, std::move(phi), s.disturbance);
  s.gains = ControllerGains::scaled_identity(1, {2.0, 2.0, 2.0}, {0.1, 0.1, 0.1}, {1.0, 1.0}, 0.1, kChuaHartleyEpsilonDecay);
  s.x0 = {0.8, -2.0, 1.0};
  s.alpha = kernel::FracOrder(0.98);
  s.controller_kind = kind;
  s.horizon = 50.0;
  return s;
}

const std::vector<std::string>& scenario_names() {
  static const std::vector<std::string> names{"second-order-stabilize", "second-order-track", "second-order-uncontrolled",
                                              "chua-hartley", "chua-hartley-uncontrolled"};
  return names;
}

ControllerKind default_controller(const std::string& name) {
  return name.ends_with("-uncontrolled") ? ControllerKind::uncontrolled : ControllerKind::proposed;
}

Scenario scenario_by_name(const std::string& name, ControllerKind kind) {
  Scenario s;
  if (name == "second-order-stabilize" || name == "second-order-uncontrolled") {
    s = second_order_scenario(kind, false);
    if (name == "second-order-uncontrolled") s.horizon = 50.0;
  } else if (name == "second-order-track") {
    s = second_order_scenario(kind, true);
  } else if (name == "chua-hartley" || name == "chua-hartley-uncontrolled") {
    s = chua_hartley_scenario(kind);
  } else {
    std::string msg = "unknown scenario '" + name + "'; valid:";
    for (const auto& n : scenario_names()) msg += " " + n;
    throw std::invalid_argument(msg);
  }
  s.name = name;
  return s;
}

double baseline_control_input(ControllerKind kind, const control::PlantModel& plant, const control::ControllerGains& gains,
                              const control::ReferenceSignal& reference, double t, std::span<const double> x,
                              const control::AdaptiveState& est) {
  control::BackstepOptions opt;
  if (kind == ControllerKind::sign_baseline) {
    opt.compensation = control::Compensation::sign;
  } else if (kind == ControllerKind::arctan_baseline) {
    opt.compensation = control::Compensation::arctan;
  } else {
    throw std::invalid_argument("baseline_control_input: kind must be a baseline");
  }
  return control::Backstepper(plant, gains, reference, opt).control_input(t, x, est);
}

}  // namespace fracstep::scenarios
