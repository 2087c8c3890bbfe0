#include <cmath>
#include <ostream>
#include <random>
#include <sstream>

#include "fracstep/harness.hpp"

namespace fracstep::harness {

using control::AdaptiveState;

PartialsCheck check_partials(const scenarios::Scenario& s, std::uint64_t seed, int samples, double tolerance) {
  const auto ctrl = s.make_controller();
  const int n = s.plant.n;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(-1.5, 1.5);
  PartialsCheck out;

  auto record = [&](double ad, double fd) {
    const double rel = std::fabs(ad - fd) / std::max(1.0, std::fabs(ad));
    ++out.checked;
    out.worst = std::max(out.worst, rel);
    if (!(rel <= tolerance)) ++out.failures;
  };

  for (int k = 0; k < samples; ++k) {
    std::vector<double> x(n);
    for (auto& v : x) v = U(rng);
    AdaptiveState est = AdaptiveState::zeros(n, s.plant.p);
    for (auto& th : est.theta_hat) {
      for (auto& v : th) v = U(rng);
    }
    for (auto& v : est.rho_hat) v = U(rng);
    est.D_hat = std::fabs(U(rng));
    const double t = std::fabs(U(rng)) * s.horizon / 1.5;
    const auto ev = ctrl.evaluate(t, x, est);
    auto value = [&](int i, const std::vector<double>& xx, const AdaptiveState& ee) {
      return ctrl.evaluate(t, xx, ee).stages[i - 1].value;
    };

    for (int i = 1; i < n; ++i) {
      const auto& se = ev.stages[i - 1];
      for (int j = 1; j <= i; ++j) {
        const double h = 1e-6 * std::max(1.0, std::fabs(x[j - 1]));
        auto xp = x, xm = x;
        xp[j - 1] += h;
        xm[j - 1] -= h;
        record(se.d_dx[j - 1], (value(i, xp, est) - value(i, xm, est)) / (2.0 * h));

        for (std::size_t e = 0; e < est.theta_hat[j - 1].size(); ++e) {
          const double th = est.theta_hat[j - 1][e];
          const double ht = 1e-6 * std::max(1.0, std::fabs(th));
          auto ep = est, em = est;
          ep.theta_hat[j - 1][e] += ht;
          em.theta_hat[j - 1][e] -= ht;
          record(se.d_dtheta[j - 1][e], (value(i, x, ep) - value(i, x, em)) / (2.0 * ht));
        }
      }
    }
  }
  return out;
}

namespace {

struct Reporter {
  std::ostream& os;
  int failures = 0;

  void check(const std::string& name, bool ok, const std::string& detail) {
    os << (ok ? "[PASS] " : "[FAIL] ") << name << "  (" << detail << ")\n";
    if (!ok) ++failures;
  }
};

std::string fmt(double v) {
  std::ostringstream ss;
  ss.precision(3);
  ss << v;
  return ss.str();
}

}  // namespace

int selftest(std::ostream& os, std::uint64_t seed) {
  using kernel::FracOrder;
  using kernel::GridFunction;
  Reporter rep{os};

  {
    const double e1 = std::fabs(kernel::mittag_leffler({1.0, 1.0, -1.0}) - std::exp(-1.0));
    const double e2 = std::fabs(kernel::mittag_leffler({2.0, 1.0, -4.0}) - std::cos(2.0));
    const double e3 = std::fabs(kernel::mittag_leffler({0.5, 1.0, -1.0}) - std::exp(1.0) * std::erfc(1.0));
    const double worst = std::max({e1, e2, e3});
    rep.check("mittag-leffler closed forms", worst < 1e-13, "max abs error " + fmt(worst));
  }
  {
    const double a = 0.95;
    const double dt = 1e-3;
    const auto f = GridFunction::sample([](double t) { return std::exp(-t); }, 0.0, dt, 2001);
    const auto g = kernel::frac_integral(f, FracOrder(a));
    double worst = 0.0;
    for (std::size_t k = 100; k < g.size(); ++k) {
      const double t = g.time(k);
      const double ref = std::pow(t, a) * kernel::mittag_leffler({1.0, 1.0 + a, -t});
      worst = std::max(worst, std::fabs(g[k] - ref) / std::fabs(ref));
    }
    rep.check("fractional integral of exp(-t)", worst <= 1e-3, "max rel error " + fmt(worst));
  }
  {
    const double dt = 1e-3;
    const auto f = GridFunction::sample([](double t) { return std::sin(t); }, 0.0, dt, 3001);
    const auto back = kernel::frac_integral(kernel::caputo_derivative(f, FracOrder(0.5)), FracOrder(0.5));
    double worst = 0.0;
    for (std::size_t k = 0; k < f.size(); ++k) worst = std::max(worst, std::fabs(back[k] - f[k]));
    rep.check("integral of Caputo derivative of sin", worst <= 1e-2, "max abs error " + fmt(worst));
  }
  {
    solve::CommensurateFDE sys;
    sys.order = FracOrder(0.8);
    sys.dim = 1;
    sys.rhs = [](double, std::span<const double> x, std::span<double> r) { r[0] = -x[0]; };
    solve::SolverConfig cfg;
    cfg.dt = 1e-2;
    cfg.t_end = 10.0;
    const double x0 = 1.0;
    const auto traj = solve::solve_abm(sys, std::span<const double>(&x0, 1), cfg);
    double worst = 0.0;
    for (std::size_t k = 0; k < traj.size(); ++k) {
      const double t = traj.times[k];
      worst = std::max(worst, std::fabs(traj.states[k][0] - kernel::mittag_leffler({0.8, 1.0, -std::pow(t, 0.8)})));
    }
    rep.check("ABM on relaxation equation", worst <= 5e-3, "max abs error " + fmt(worst));
  }
  {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> xs(-20.0, 20.0);
    std::uniform_real_distribution<double> es(0.0, 10.0);
    int bad = 0;
    for (int k = 0; k < 10000; ++k) {
      const double x = xs(rng);
      double e = es(rng);
      if (e == 0.0) e = 10.0;
      const double s = control::sg(x, e);
      if (!(std::fabs(x) < e + x * s) || !(std::fabs(s) < 1.0)) ++bad;
    }
    rep.check("sg bound property", bad == 0, std::to_string(bad) + " violations in 10000 samples");
  }
  for (const auto* name : {"second-order-track", "chua-hartley"}) {
    const auto s = scenarios::scenario_by_name(name, scenarios::ControllerKind::proposed);
    const auto pc = check_partials(s, seed, 50);
    rep.check(std::string("partials vs finite differences, ") + name, pc.failures == 0,
              std::to_string(pc.checked) + " partials, worst rel " + fmt(pc.worst));
  }
  {
    std::mt19937_64 rng(seed + 1);
    std::normal_distribution<double> N(0.0, 1e3);
    Table t;
    for (const auto* name : {"t", "a", "b"}) {
      std::vector<double> col(200);
      for (auto& v : col) v = N(rng) * std::pow(10.0, static_cast<double>(rng() % 40) - 20.0);
      t.add(name, std::move(col));
    }
    std::stringstream ss;
    write_csv(t, ss);
    const Table back = read_csv(ss);
    bool same = back.names == t.names;
    for (std::size_t c = 0; same && c < t.columns.size(); ++c) same = back.columns[c] == t.columns[c];
    rep.check("CSV round trip", same, "600 values");
  }
  os << (rep.failures == 0 ? "selftest passed\n" : std::to_string(rep.failures) + " selftest check(s) failed\n");
  return rep.failures;
}

}  // namespace fracstep::harness
