#include "fracstep/backstep.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace fracstep::control {

using ad::Jet;

void PlantModel::validate() const {
  if (n < 2) throw std::invalid_argument("PlantModel: backstepping needs n >= 2");
  if (p < 1) throw std::invalid_argument("PlantModel: p must be positive");
  if (static_cast<int>(phi.size()) != n) throw std::invalid_argument("PlantModel: need one regressor per state");
  for (const auto& r : phi) {
    if (r.p != p || !r.value || !r.jet) throw std::invalid_argument("PlantModel: regressor dimension mismatch");
  }
  if (!g) throw std::invalid_argument("PlantModel: missing input gain");
  if (!disturbance) throw std::invalid_argument("PlantModel: missing disturbance");
  if (static_cast<int>(theta_true.size()) != n) throw std::invalid_argument("PlantModel: need one theta per state");
  for (const auto& th : theta_true) {
    if (static_cast<int>(th.size()) != p) throw std::invalid_argument("PlantModel: theta length must be p");
  }
}

ControllerGains ControllerGains::scaled_identity(int p, std::vector<double> c, const std::vector<double>& gamma,
                                                 std::vector<double> lambda, double eta, double a) {
  ControllerGains g;
  g.c = std::move(c);
  for (std::size_t i = 0; i < gamma.size(); ++i) {
    const auto dim = static_cast<Eigen::Index>(p) * static_cast<Eigen::Index>(i + 1);
    g.Gamma.push_back(gamma[i] * Eigen::MatrixXd::Identity(dim, dim));
  }
  g.lambda = std::move(lambda);
  g.eta = eta;
  g.a = a;
  return g;
}

void ControllerGains::validate(int n, int p) const {
  auto positive = [](double v) { return std::isfinite(v) && v > 0.0; };
  if (static_cast<int>(c.size()) != n) throw std::invalid_argument("ControllerGains: need n values of c");
  if (static_cast<int>(Gamma.size()) != n) throw std::invalid_argument("ControllerGains: need n Gamma matrices");
  if (static_cast<int>(lambda.size()) != n - 1) throw std::invalid_argument("ControllerGains: need n-1 values of lambda");
  for (int i = 0; i < n; ++i) {
    if (!positive(c[i])) throw std::invalid_argument("ControllerGains: c_" + std::to_string(i + 1) + " must be positive");
  }
  for (int i = 0; i + 1 < n; ++i) {
    if (!positive(lambda[i])) {
      throw std::invalid_argument("ControllerGains: lambda_" + std::to_string(i + 1) + " must be positive");
    }
  }
  if (!positive(eta)) throw std::invalid_argument("ControllerGains: eta must be positive");
  if (!positive(a)) throw std::invalid_argument("ControllerGains: a must be positive");
  for (int i = 0; i < n; ++i) {
    const Eigen::MatrixXd& G = Gamma[i];
    const Eigen::Index dim = static_cast<Eigen::Index>(p) * (i + 1);
    const std::string name = "ControllerGains: Gamma_" + std::to_string(i + 1);
    if (G.rows() != dim || G.cols() != dim) throw std::invalid_argument(name + " has the wrong dimension");
    if (!G.allFinite() || !G.isApprox(G.transpose(), 1e-12)) throw std::invalid_argument(name + " must be symmetric");
    Eigen::LLT<Eigen::MatrixXd> llt(G);
    if (llt.info() != Eigen::Success) throw std::invalid_argument(name + " must be positive definite");
  }
}

AdaptiveState AdaptiveState::zeros(int n, int p) {
  AdaptiveState s;
  for (int i = 1; i <= n; ++i) s.theta_hat.emplace_back(static_cast<std::size_t>(p * i), 0.0);
  s.rho_hat.assign(static_cast<std::size_t>(n - 1), 0.0);
  return s;
}

ReferenceSignal ReferenceSignal::zero() {
  return {[](double) { return 0.0; }, [](double) { return 0.0; }};
}

StateLayout::StateLayout(int n, int p) : n_(n), p_(p) {}

std::size_t StateLayout::size() const noexcept {
  return static_cast<std::size_t>(n_ + p_ * n_ * (n_ + 1) / 2 + (n_ - 1) + 1);
}

std::size_t StateLayout::theta_offset(int i) const noexcept {
  return static_cast<std::size_t>(n_ + p_ * (i - 1) * i / 2);
}

std::size_t StateLayout::rho_offset(int i) const noexcept {
  return static_cast<std::size_t>(n_ + p_ * n_ * (n_ + 1) / 2 + (i - 1));
}

std::size_t StateLayout::d_hat_offset() const noexcept { return size() - 1; }

AdaptiveState StateLayout::unpack(std::span<const double> aug) const {
  AdaptiveState s;
  for (int i = 1; i <= n_; ++i) {
    const auto off = theta_offset(i);
    s.theta_hat.emplace_back(aug.begin() + off, aug.begin() + off + p_ * i);
  }
  for (int i = 1; i < n_; ++i) s.rho_hat.push_back(aug[rho_offset(i)]);
  s.D_hat = aug[d_hat_offset()];
  return s;
}

void StateLayout::pack(std::span<const double> x, const AdaptiveState& est, std::span<double> aug) const {
  std::copy(x.begin(), x.begin() + n_, aug.begin());
  for (int i = 1; i <= n_; ++i) std::copy(est.theta_hat[i - 1].begin(), est.theta_hat[i - 1].end(), aug.begin() + theta_offset(i));
  for (int i = 1; i < n_; ++i) aug[rho_offset(i)] = est.rho_hat[i - 1];
  aug[d_hat_offset()] = est.D_hat;
}

void StateLayout::pack_rates(std::span<const double> plant_rates, const AdaptiveRates& rates, std::span<double> out) const {
  AdaptiveState as_state{rates.theta_hat, rates.rho_hat, rates.D_hat};
  pack(plant_rates, as_state, out);
}

double sg(double x, double eps) { return x / std::sqrt(x * x + eps * eps); }

double epsilon_fn(double t, double a) { return std::exp(-a * t); }

double compensation_factor(Compensation kind, double z, double eps) {
  switch (kind) {
    case Compensation::smooth: return sg(z, eps);
    case Compensation::sign: return z > 0.0 ? 1.0 : (z < 0.0 ? -1.0 : 0.0);
    case Compensation::arctan: return 2.0 / std::numbers::pi * std::atan(10.0 * z);
  }
  return 0.0;
}

namespace {

// Jet variables: x_1..x_{n-1}, then theta_hat_{v,1..n-1} entry by entry.
struct JetLayout {
  int n;
  int p;
  [[nodiscard]] int nvars() const { return (n - 1) + p * n * (n - 1) / 2; }
  [[nodiscard]] int x(int j) const { return j - 1; }
  [[nodiscard]] int theta(int stage, int e) const { return (n - 1) + p * (stage - 1) * stage / 2 + e; }
  // Stage i is expanded to the order later stages will differentiate it.
  [[nodiscard]] int degree(int stage) const { return stage < n ? n - stage : 0; }
};

// Everything later stages need from the stages built so far.
struct Chain {
  JetLayout lay;
  std::vector<Jet> alpha;                // alpha_1..
  std::vector<Jet> z;                    // z_1..
  std::vector<std::vector<Jet>> phi;     // phi_1..
  std::vector<std::vector<Jet>> phi_v;   // phi_{v,1}..
  std::vector<std::vector<Jet>> rate;    // D^a theta_hat_{v,1}..
  std::vector<Jet> zeta;                 // zeta_1..
};

Jet state_jet(const JetLayout& lay, int K, int j, std::span<const double> x) {
  if (j <= lay.n - 1) return Jet::variable(lay.nvars(), K, lay.x(j), x[j - 1]);
  return Jet::constant(lay.nvars(), K, x[j - 1]);
}

Jet theta_jet(const JetLayout& lay, int K, int stage, int e, double v) {
  if (stage <= lay.n - 1) return Jet::variable(lay.nvars(), K, lay.theta(stage, e), v);
  return Jet::constant(lay.nvars(), K, v);
}

// Adds stage i to the chain. `given` supplies alpha_i instead of computing it.
void advance(Chain& ch, int i, std::span<const double> x, const AdaptiveState& est, double r, double ref_dr,
             const ControllerGains& gains, const PlantModel& plant, const Jet* given = nullptr) {
  const JetLayout& lay = ch.lay;
  const int K = lay.degree(i);
  const int p = plant.p;

  std::vector<Jet> X;
  X.reserve(i);
  for (int j = 1; j <= i; ++j) X.push_back(state_jet(lay, K, j, x));

  const Jet z = i == 1 ? X[0] - r : X[i - 1] - ch.alpha[i - 2];

  std::vector<Jet> phi(p);
  plant.phi[i - 1].jet(X, phi);

  std::vector<Jet> phi_v = phi;
  Jet zeta = Jet::constant(lay.nvars(), K, 0.0);
  if (i >= 2) {
    const Jet& prev = ch.alpha[i - 2];
    std::vector<Jet> dx;
    for (int j = 1; j < i; ++j) dx.push_back(prev.derivative(lay.x(j)));
    for (int j = i - 1; j >= 1; --j) {
      for (int e = 0; e < p; ++e) phi_v.push_back(-dx[j - 1] * ch.phi[j - 1][e]);
    }
    for (int j = 2; j <= i; ++j) zeta -= dx[j - 2] * X[j - 1];
    for (int j = 1; j < i; ++j) {
      for (int e = 0; e < p * j; ++e) zeta -= prev.derivative(lay.theta(j, e)) * ch.rate[j - 1][e];
    }
  }

  const auto& th = est.theta_hat[i - 1];
  const auto& G = gains.Gamma[i - 1];
  const int dim = p * i;
  std::vector<Jet> rate(dim);
  for (int e = 0; e < dim; ++e) {
    Jet acc = Jet::constant(lay.nvars(), K, 0.0);
    for (int f = 0; f < dim; ++f) {
      if (G(e, f) != 0.0) acc += G(e, f) * phi_v[f];
    }
    rate[e] = z * acc;
  }

  if (i < lay.n) {
    if (given != nullptr) {
      ch.alpha.push_back(*given);
    } else {
      Jet a = -gains.c[i - 1] * z - zeta;
      for (int e = 0; e < dim; ++e) a -= phi_v[e] * theta_jet(lay, K, i, e, th[e]);
      if (i == 1) {
        a += ref_dr;
      } else {
        a -= ch.z[i - 2];
        a -= est.rho_hat[i - 2];
      }
      ch.alpha.push_back(std::move(a));
    }
  }
  ch.z.push_back(z);
  ch.phi.push_back(std::move(phi));
  ch.phi_v.push_back(std::move(phi_v));
  ch.rate.push_back(std::move(rate));
  ch.zeta.push_back(std::move(zeta));
}

StageEval to_stage_eval(const Chain& ch, int i) {
  const Jet& a = ch.alpha[i - 1];
  StageEval s;
  s.stage = i;
  s.value = a.value();
  for (int j = 1; j <= i; ++j) s.d_dx.push_back(a.partial(ch.lay.x(j)));
  for (int j = 1; j <= i; ++j) {
    std::vector<double> d;
    for (int e = 0; e < ch.lay.p * j; ++e) d.push_back(a.partial(ch.lay.theta(j, e)));
    s.d_dtheta.push_back(std::move(d));
  }
  s.jet = a;
  return s;
}

void check_dims(std::span<const double> x, const AdaptiveState& est, const PlantModel& plant) {
  if (static_cast<int>(x.size()) < plant.n) throw std::invalid_argument("controller: state vector too short");
  if (static_cast<int>(est.theta_hat.size()) != plant.n || static_cast<int>(est.rho_hat.size()) != plant.n - 1) {
    throw std::invalid_argument("controller: adaptive state has the wrong shape");
  }
  for (int i = 1; i <= plant.n; ++i) {
    if (static_cast<int>(est.theta_hat[i - 1].size()) != plant.p * i) {
      throw std::invalid_argument("controller: theta_hat_" + std::to_string(i) + " has the wrong length");
    }
  }
}

}  // namespace

StageEval eval_stage1(double x1, std::span<const double> theta_hat_1, double r, double ref_dr,
                      const ControllerGains& gains, const PlantModel& plant) {
  Chain ch{{plant.n, plant.p}, {}, {}, {}, {}, {}, {}};
  AdaptiveState est = AdaptiveState::zeros(plant.n, plant.p);
  est.theta_hat[0].assign(theta_hat_1.begin(), theta_hat_1.end());
  std::vector<double> x(plant.n, 0.0);
  x[0] = x1;
  advance(ch, 1, x, est, r, ref_dr, gains, plant);
  return to_stage_eval(ch, 1);
}

std::vector<double> build_phi_v(int i, std::span<const double> x, const StageEval& prev, const PlantModel& plant) {
  const int p = plant.p;
  std::vector<double> out(p);
  plant.phi[i - 1].value(x.first(i), out);
  std::vector<double> phi_j(p);
  for (int j = i - 1; j >= 1; --j) {
    plant.phi[j - 1].value(x.first(j), phi_j);
    for (int e = 0; e < p; ++e) out.push_back(-prev.d_dx[j - 1] * phi_j[e]);
  }
  return out;
}

double build_zeta(int i, std::span<const double> x, const StageEval& prev, std::span<const std::vector<double>> theta_rates) {
  double zeta = 0.0;
  for (int j = 2; j <= i; ++j) zeta -= prev.d_dx[j - 2] * x[j - 1];
  for (int j = 1; j < i; ++j) {
    for (std::size_t e = 0; e < theta_rates[j - 1].size(); ++e) zeta -= prev.d_dtheta[j - 1][e] * theta_rates[j - 1][e];
  }
  return zeta;
}

StageEval eval_stage_i(int i, std::span<const double> x, const AdaptiveState& est, std::span<const StageEval> earlier,
                       double r, double ref_dr, const ControllerGains& gains, const PlantModel& plant) {
  if (i < 2 || i > plant.n - 1) throw std::invalid_argument("eval_stage_i: stage must satisfy 2 <= i <= n-1");
  if (static_cast<int>(earlier.size()) != i - 1) throw std::invalid_argument("eval_stage_i: need the i-1 earlier stages");
  check_dims(x, est, plant);
  Chain ch{{plant.n, plant.p}, {}, {}, {}, {}, {}, {}};
  for (int j = 1; j < i; ++j) advance(ch, j, x, est, r, ref_dr, gains, plant, &earlier[j - 1].jet);
  advance(ch, i, x, est, r, ref_dr, gains, plant);
  return to_stage_eval(ch, i);
}

Backstepper::Backstepper(PlantModel plant, ControllerGains gains, ReferenceSignal reference, BackstepOptions options)
    : plant_(std::move(plant)),
      gains_(std::move(gains)),
      reference_(std::move(reference)),
      options_(options),
      layout_(plant_.n, plant_.p) {
  plant_.validate();
  gains_.validate(plant_.n, plant_.p);
  if (!reference_.r || !reference_.dr_alpha) throw std::invalid_argument("Backstepper: reference callbacks missing");
}

ControllerEval Backstepper::evaluate(double t, std::span<const double> x, const AdaptiveState& est) const {
  check_dims(x, est, plant_);
  const int n = plant_.n;
  const double r = reference_.r(t);
  const double ref_dr = reference_.dr_alpha(t);

  Chain ch{{n, plant_.p}, {}, {}, {}, {}, {}, {}};
  for (int i = 1; i <= n; ++i) advance(ch, i, x, est, r, ref_dr, gains_, plant_);

  ControllerEval out;
  for (int i = 1; i < n; ++i) out.stages.push_back(to_stage_eval(ch, i));
  for (int i = 1; i <= n; ++i) {
    out.z.push_back(ch.z[i - 1].value());
    out.zeta.push_back(ch.zeta[i - 1].value());
    std::vector<double> pv;
    for (const auto& j : ch.phi_v[i - 1]) pv.push_back(j.value());
    out.phi_v.push_back(std::move(pv));
  }
  out.eps = epsilon_fn(t, gains_.a);

  const double zn = out.z[n - 1];
  const double comp = compensation_factor(options_.compensation, zn, out.eps);
  out.rates.theta_hat.resize(n);
  out.rates.rho_hat.assign(n - 1, 0.0);
  if (!options_.active) {
    for (int i = 1; i <= n; ++i) out.rates.theta_hat[i - 1].assign(plant_.p * i, 0.0);
    return out;
  }

  const double g = plant_.g(x);
  if (!(std::fabs(g) >= kSingularGain)) throw SingularGainError("controller: input gain g(x) is (near) zero");
  double v = -out.z[n - 2] - gains_.c[n - 1] * zn - comp * est.D_hat - out.zeta[n - 1] - est.rho_hat[n - 2];
  for (std::size_t e = 0; e < out.phi_v[n - 1].size(); ++e) v -= out.phi_v[n - 1][e] * est.theta_hat[n - 1][e];
  out.u = v / g;

  for (int i = 1; i <= n; ++i) {
    for (const auto& j : ch.rate[i - 1]) out.rates.theta_hat[i - 1].push_back(j.value());
  }
  for (int i = 2; i <= n; ++i) out.rates.rho_hat[i - 2] = out.z[i - 1] * gains_.lambda[i - 2];
  out.rates.D_hat = gains_.eta * zn * comp;
  return out;
}

double Backstepper::control_input(double t, std::span<const double> x, const AdaptiveState& est) const {
  return evaluate(t, x, est).u;
}

AdaptiveRates Backstepper::adaptive_rates(double t, std::span<const double> x, const AdaptiveState& est) const {
  return evaluate(t, x, est).rates;
}

void Backstepper::plant_rates(double t, std::span<const double> x, double u, std::span<double> out) const {
  const int n = plant_.n;
  const int p = plant_.p;
  std::vector<double> phi(p);
  for (int i = 1; i <= n; ++i) {
    plant_.phi[i - 1].value(x.first(i), phi);
    double s = 0.0;
    for (int e = 0; e < p; ++e) s += phi[e] * plant_.theta_true[i - 1][e];
    out[i - 1] = s + (i < n ? x[i] : plant_.g(x) * u + plant_.disturbance(t));
  }
}

void Backstepper::closed_loop_rhs(double t, std::span<const double> aug, std::span<double> out) const {
  const auto x = aug.first(plant_.n);
  const AdaptiveState est = layout_.unpack(aug);
  const ControllerEval ev = evaluate(t, x, est);
  std::vector<double> xr(plant_.n);
  plant_rates(t, x, ev.u, xr);
  layout_.pack_rates(xr, ev.rates, out);
}

}  // namespace fracstep::control
