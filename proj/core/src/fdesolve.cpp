#include "fracstep/fdesolve.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace fracstep::solve {

namespace {

constexpr double kCorrectorTolerance = 1e-6;

double max_move(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t c = 0; c < a.size(); ++c) m = std::max(m, std::fabs(a[c] - b[c]));
  return m;
}

double magnitude(std::span<const double> x) {
  double m = 1.0;
  for (double v : x) m = std::max(m, std::fabs(v));
  return m;
}

// A corrector pass sequence counts as non-converged when its last update is
// both non-negligible and not contracting relative to the one before.
bool stalled(double last, double before, std::span<const double> x) {
  return last > kCorrectorTolerance * magnitude(x) && last > 0.5 * before;
}

void validate(const CommensurateFDE& sys, std::span<const double> x0, const SolverConfig& cfg) {
  if (sys.dim == 0) throw ConfigError("solver: system dimension must be positive");
  if (!sys.rhs) throw ConfigError("solver: missing right-hand side");
  if (x0.size() != sys.dim) throw ConfigError("solver: x0 length does not match system dimension");
  for (double v : x0) {
    if (!std::isfinite(v)) throw ConfigError("solver: x0 must be finite");
  }
  if (!(cfg.dt > 0.0) || !std::isfinite(cfg.dt)) throw ConfigError("solver: dt must be positive");
  if (!(cfg.t_end >= cfg.dt) || !std::isfinite(cfg.t_end)) throw ConfigError("solver: need 0 < dt <= t_end");
  if (cfg.corrector_iters < 1) throw ConfigError("solver: corrector_iters must be >= 1");
  if (cfg.memory_window && *cfg.memory_window == 0) throw ConfigError("solver: memory_window must be positive");
  double prev = -1.0;
  for (double td : sys.discontinuity_times) {
    if (!(td >= 0.0) || !(td > prev)) throw ConfigError("solver: discontinuity times must be >= 0 and strictly increasing");
    prev = td;
  }
}

// Node times, with every discontinuity snapped onto its nearest node and the
// exact discontinuity time handed to the right-hand side there.
std::vector<double> node_times(const CommensurateFDE& sys, const SolverConfig& cfg, std::size_t steps) {
  std::vector<double> t(steps + 1);
  for (std::size_t k = 0; k <= steps; ++k) t[k] = static_cast<double>(k) * cfg.dt;
  for (double td : sys.discontinuity_times) {
    const double k = std::round(td / cfg.dt);
    if (k >= 0.0 && k <= static_cast<double>(steps)) t[static_cast<std::size_t>(k)] = td;
  }
  return t;
}

bool finite_and_bounded(std::span<const double> x) {
  return std::all_of(x.begin(), x.end(), [](double v) { return std::isfinite(v) && std::fabs(v) <= kDivergenceThreshold; });
}

bool all_finite(std::span<const double> x) {
  return std::all_of(x.begin(), x.end(), [](double v) { return std::isfinite(v); });
}

Trajectory start(const SolverConfig& cfg, std::span<const double> x0, std::size_t steps) {
  Trajectory traj;
  traj.dt = cfg.dt;
  traj.times.reserve(steps + 1);
  traj.states.reserve(steps + 1);
  traj.times.push_back(0.0);
  traj.states.emplace_back(x0.begin(), x0.end());
  return traj;
}

// Rates stored per component so each history sum is a contiguous dot product.
class History {
public:
  History(std::size_t dim, std::size_t capacity) : cols_(dim) {
    for (auto& c : cols_) c.reserve(capacity);
  }
  void push(std::span<const double> f) {
    for (std::size_t c = 0; c < cols_.size(); ++c) cols_[c].push_back(f[c]);
  }
  [[nodiscard]] const std::vector<double>& column(std::size_t c) const { return cols_[c]; }

private:
  std::vector<std::vector<double>> cols_;
};

// sum_{j=lo}^{hi-1} w[j] * f[j] and the same with v, accumulated in four lanes.
inline void dot2(const double* w, const double* v, const double* f, std::size_t lo, std::size_t hi, double& sw, double& sv) {
  double a0 = 0.0, a1 = 0.0, a2 = 0.0, a3 = 0.0;
  double b0 = 0.0, b1 = 0.0, b2 = 0.0, b3 = 0.0;
  std::size_t j = lo;
  for (; j + 4 <= hi; j += 4) {
    a0 += w[j] * f[j];
    a1 += w[j + 1] * f[j + 1];
    a2 += w[j + 2] * f[j + 2];
    a3 += w[j + 3] * f[j + 3];
    b0 += v[j] * f[j];
    b1 += v[j + 1] * f[j + 1];
    b2 += v[j + 2] * f[j + 2];
    b3 += v[j + 3] * f[j + 3];
  }
  for (; j < hi; ++j) {
    a0 += w[j] * f[j];
    b0 += v[j] * f[j];
  }
  sw = (a0 + a1) + (a2 + a3);
  sv = (b0 + b1) + (b2 + b3);
}

}  // namespace

std::size_t step_count(const SolverConfig& cfg) {
  return static_cast<std::size_t>(std::floor(cfg.t_end / cfg.dt + 1e-9));
}

kernel::GridFunction Trajectory::component(std::size_t i) const {
  std::vector<double> v(states.size());
  for (std::size_t k = 0; k < states.size(); ++k) v[k] = states[k].at(i);
  return kernel::GridFunction(t0, dt, std::move(v));
}

Trajectory solve_abm(const CommensurateFDE& sys, std::span<const double> x0, const SolverConfig& cfg) {
  validate(sys, x0, cfg);
  const std::size_t steps = step_count(cfg);
  const std::size_t dim = sys.dim;
  const double a = sys.order.value();
  const double h = cfg.dt;
  const std::vector<double> t = node_times(sys, cfg, steps);
  const std::size_t window = cfg.memory_window.value_or(steps + 1);

  // Lag-indexed weights, laid out reversed so that for target node n the
  // weight of history node j sits at index (steps - n) + j.
  //   predictor: b_m = ((m)^a - (m-1)^a) h^a / Gamma(a+1), m = n - j >= 1
  //   corrector: c_m = ((m+1)^{a+1} - 2 m^{a+1} + (m-1)^{a+1}) h^a / Gamma(a+2), m >= 1
  const double bp = std::pow(h, a) / kernel::gamma_fn(a + 1.0);
  const double bc = std::pow(h, a) / kernel::gamma_fn(a + 2.0);
  std::vector<double> pw_a(steps + 2), pw_a1(steps + 2);
  for (std::size_t m = 0; m <= steps + 1; ++m) {
    pw_a[m] = std::pow(static_cast<double>(m), a);
    pw_a1[m] = std::pow(static_cast<double>(m), a + 1.0);
  }
  std::vector<double> wp(steps + 1, 0.0), wc(steps + 1, 0.0);
  for (std::size_t m = 1; m <= steps; ++m) {
    wp[steps - m] = bp * (pw_a[m] - pw_a[m - 1]);
    wc[steps - m] = bc * (pw_a1[m + 1] - 2.0 * pw_a1[m] + pw_a1[m - 1]);
  }

  Trajectory traj = start(cfg, x0, steps);
  History hist(dim, steps + 1);
  std::vector<double> f(dim), xp(dim), xc(dim), prev(dim), sp(dim), sc(dim);
  sys.rhs(t[0], x0, f);
  if (!all_finite(f)) {
    traj.diverged = true;
    return traj;
  }
  hist.push(f);
  std::vector<double> f0 = f;

  for (std::size_t n = 1; n <= steps; ++n) {
    const double nn = static_cast<double>(n);
    // History nodes j < n with lag n - j <= window; node 0 carries its own
    // corrector weight and is handled separately.
    const std::size_t lo = n > window ? n - window : 0;
    const std::size_t first = std::max<std::size_t>(lo, 1);
    const std::size_t off = steps - n;
    for (std::size_t c = 0; c < dim; ++c) {
      const double* col = hist.column(c).data();
      double s_pred = 0.0;
      double s_corr = 0.0;
      if (first < n) dot2(wp.data() + off, wc.data() + off, col, first, n, s_pred, s_corr);
      if (lo == 0) {
        s_pred += bp * (pw_a[n] - pw_a[n - 1]) * col[0];
        s_corr += bc * (pw_a1[n - 1] - (nn - 1.0 - a) * pw_a[n]) * col[0];
      }
      sp[c] = s_pred;
      sc[c] = s_corr;
    }

    for (std::size_t c = 0; c < dim; ++c) xp[c] = x0[c] + sp[c];
    xc = xp;
    bool ok = finite_and_bounded(xc);
    double last = 0.0;
    double before = std::numeric_limits<double>::infinity();
    for (int it = 0; ok && it < cfg.corrector_iters; ++it) {
      sys.rhs(t[n], xc, f);
      if (!all_finite(f)) {
        ok = false;
        break;
      }
      prev = xc;
      for (std::size_t c = 0; c < dim; ++c) xc[c] = x0[c] + sc[c] + bc * f[c];
      ok = finite_and_bounded(xc);
      before = last;
      last = max_move(xc, prev);
    }
    if (ok) {
      sys.rhs(t[n], xc, f);
      ok = all_finite(f);
    }
    if (!ok) {
      traj.diverged = true;
      break;
    }
    if (cfg.corrector_iters > 1 && stalled(last, before, xc)) ++traj.corrector_flags;
    hist.push(f);
    traj.times.push_back(static_cast<double>(n) * h);
    traj.states.push_back(xc);
  }
  return traj;
}

Trajectory solve_gl(const CommensurateFDE& sys, std::span<const double> x0, const SolverConfig& cfg) {
  validate(sys, x0, cfg);
  const std::size_t steps = step_count(cfg);
  const std::size_t dim = sys.dim;
  const double a = sys.order.value();
  const double h = cfg.dt;
  const double ha = std::pow(h, a);
  const std::vector<double> t = node_times(sys, cfg, steps);
  const std::size_t window = cfg.memory_window.value_or(steps + 1);

  // w_0 = 1, w_j = w_{j-1} (1 - (a+1)/j), stored reversed like the ABM weights.
  std::vector<double> w(steps + 1);
  w[0] = 1.0;
  for (std::size_t j = 1; j <= steps; ++j) w[j] = w[j - 1] * (1.0 - (a + 1.0) / static_cast<double>(j));
  std::vector<double> wr(steps + 1, 0.0);
  for (std::size_t m = 1; m <= steps; ++m) wr[steps - m] = w[m];

  Trajectory traj = start(cfg, x0, steps);
  std::vector<std::vector<double>> y(dim);
  for (auto& col : y) {
    col.reserve(steps + 1);
    col.push_back(0.0);
  }
  std::vector<double> f(dim), x(dim), prev(dim), mem(dim);
  std::vector<double> xprev(x0.begin(), x0.end());

  for (std::size_t n = 1; n <= steps; ++n) {
    const std::size_t lo = n > window ? n - window : 0;
    const std::size_t off = steps - n;
    for (std::size_t c = 0; c < dim; ++c) {
      double s = 0.0;
      double unused = 0.0;
      dot2(wr.data() + off, wr.data() + off, y[c].data(), lo, n, s, unused);
      mem[c] = s;
    }
    // Explicit predictor from the previous node's rate, then fixed-point passes.
    sys.rhs(t[n - 1], xprev, f);
    bool ok = all_finite(f);
    for (std::size_t c = 0; ok && c < dim; ++c) x[c] = x0[c] + ha * f[c] - mem[c];
    ok = ok && finite_and_bounded(x);
    double last = 0.0;
    double before = std::numeric_limits<double>::infinity();
    for (int it = 0; ok && it < cfg.corrector_iters; ++it) {
      sys.rhs(t[n], x, f);
      if (!all_finite(f)) {
        ok = false;
        break;
      }
      prev = x;
      for (std::size_t c = 0; c < dim; ++c) x[c] = x0[c] + ha * f[c] - mem[c];
      ok = finite_and_bounded(x);
      before = last;
      last = max_move(x, prev);
    }
    if (!ok) {
      traj.diverged = true;
      break;
    }
    if (cfg.corrector_iters > 1 && stalled(last, before, x)) ++traj.corrector_flags;
    for (std::size_t c = 0; c < dim; ++c) y[c].push_back(x[c] - x0[c]);
    xprev = x;
    traj.times.push_back(static_cast<double>(n) * h);
    traj.states.push_back(x);
  }
  return traj;
}

}  // namespace fracstep::solve
