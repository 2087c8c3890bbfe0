#include "fracstep/harness.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <future>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

namespace fracstep::harness {

using scenarios::ControllerKind;
using scenarios::Scenario;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string join(const std::vector<std::string>& items, const char* sep) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += sep;
    out += items[i];
  }
  return out;
}

// "gamma2" -> 2 for prefix "gamma"
int key_index(const std::string& key, const std::string& prefix) {
  return std::stoi(key.substr(prefix.size()));
}

bool positive_finite(double v) { return std::isfinite(v) && v > 0.0; }

}  // namespace

ControllerKind RunConfig::controller_kind() const {
  return controller.value_or(scenarios::default_controller(scenario));
}

std::string RunConfig::label() const { return scenario + ":" + scenarios::to_string(controller_kind()); }

std::vector<std::string> override_keys(int n) {
  std::vector<std::string> keys;
  for (int i = 1; i <= n; ++i) keys.push_back("c" + std::to_string(i));
  for (int i = 1; i <= n; ++i) keys.push_back("gamma" + std::to_string(i));
  for (int i = 1; i < n; ++i) keys.push_back("lambda" + std::to_string(i));
  keys.emplace_back("eta");
  keys.emplace_back("a");
  for (int i = 1; i <= n; ++i) keys.push_back("x0_" + std::to_string(i));
  keys.emplace_back("alpha");
  return keys;
}

Scenario RunConfig::build() const {
  if (scenario.empty()) throw ConfigError("run config: scenario name is required");
  Scenario s;
  try {
    s = scenarios::scenario_by_name(scenario, controller_kind());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (dt) {
    if (!positive_finite(*dt)) throw ConfigError("run config: dt must be positive");
    s.dt = *dt;
  }
  if (horizon) {
    if (!positive_finite(*horizon)) throw ConfigError("run config: horizon must be positive");
    s.horizon = *horizon;
  }
  if (s.dt > s.horizon) throw ConfigError("run config: dt exceeds the horizon");

  const int n = s.plant.n;
  const auto keys = override_keys(n);
  for (const auto& [key, v] : overrides) {
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
      throw ConfigError("unknown override key '" + key + "'; valid keys: " + join(keys, ", "));
    }
    if (!std::isfinite(v)) throw ConfigError("override '" + key + "' must be finite");
    if (key == "eta") {
      s.gains.eta = v;
    } else if (key == "a") {
      s.gains.a = v;
    } else if (key == "alpha") {
      try {
        s.alpha = kernel::FracOrder(v);
      } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
      }
    } else if (key.starts_with("x0_")) {
      s.x0[key_index(key, "x0_") - 1] = v;
    } else if (key.starts_with("gamma")) {
      const int i = key_index(key, "gamma");
      const auto dim = static_cast<Eigen::Index>(s.plant.p) * i;
      s.gains.Gamma[i - 1] = v * Eigen::MatrixXd::Identity(dim, dim);
    } else if (key.starts_with("lambda")) {
      s.gains.lambda[key_index(key, "lambda") - 1] = v;
    } else {
      s.gains.c[key_index(key, "c") - 1] = v;
    }
  }
  try {
    s.gains.validate(n, s.plant.p);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return s;
}

RunConfig config_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config: top level must be an object");
  static const std::vector<std::string> fields{"scenario", "controller", "dt", "horizon", "seed", "out", "overrides"};
  RunConfig cfg;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "scenario") {
        cfg.scenario = value.get<std::string>();
      } else if (key == "controller") {
        cfg.controller = scenarios::parse_controller_kind(value.get<std::string>());
      } else if (key == "dt") {
        cfg.dt = value.get<double>();
      } else if (key == "horizon") {
        cfg.horizon = value.get<double>();
      } else if (key == "seed") {
        cfg.seed = value.get<std::uint64_t>();
      } else if (key == "out") {
        cfg.out_dir = value.get<std::string>();
      } else if (key == "overrides") {
        if (!value.is_object()) throw ConfigError("config: overrides must be an object");
        for (const auto& [k, v] : value.items()) cfg.overrides[k] = v.get<double>();
      } else {
        throw ConfigError("config: unknown field '" + key + "'; valid fields: " + join(fields, ", "));
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return config_from_json(ss.str());
}

bool Table::has(const std::string& name) const { return std::find(names.begin(), names.end(), name) != names.end(); }

const std::vector<double>& Table::column(const std::string& name) const {
  const auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw ChannelError("unknown channel '" + name + "'; available: " + join(names, ", "));
  return columns[static_cast<std::size_t>(it - names.begin())];
}

void Table::add(std::string name, std::vector<double> values) {
  if (!columns.empty() && values.size() != rows()) throw std::invalid_argument("Table: column length mismatch");
  names.push_back(std::move(name));
  columns.push_back(std::move(values));
}

void write_csv(const Table& table, std::ostream& os) {
  os << join(table.names, ",") << '\n';
  char buf[64];
  for (std::size_t r = 0; r < table.rows(); ++r) {
    for (std::size_t c = 0; c < table.columns.size(); ++c) {
      if (c) os << ',';
      const auto res = std::to_chars(buf, buf + sizeof(buf), table.columns[c][r], std::chars_format::general, 17);
      os.write(buf, res.ptr - buf);
    }
    os << '\n';
  }
}

Table read_csv(std::istream& is) {
  Table t;
  std::string line;
  if (!std::getline(is, line) || line.empty()) throw std::invalid_argument("read_csv: missing header row");
  {
    std::stringstream ss(line);
    std::string name;
    while (std::getline(ss, name, ',')) t.names.push_back(name);
  }
  t.columns.resize(t.names.size());
  std::size_t row = 0;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    ++row;
    const char* p = line.data();
    const char* end = p + line.size();
    for (std::size_t c = 0; c < t.names.size(); ++c) {
      double v = 0.0;
      const auto res = std::from_chars(p, end, v);
      if (res.ec != std::errc()) throw std::invalid_argument("read_csv: bad number in row " + std::to_string(row));
      t.columns[c].push_back(v);
      p = res.ptr;
      if (c + 1 < t.names.size()) {
        if (p == end || *p != ',') throw std::invalid_argument("read_csv: short row " + std::to_string(row));
        ++p;
      }
    }
    if (p != end) throw std::invalid_argument("read_csv: long row " + std::to_string(row));
  }
  return t;
}

double total_variation(const Table& table, const std::string& channel, double begin, double end) {
  const auto& t = table.column("t");
  const auto& y = table.column(channel);
  double tv = 0.0;
  bool started = false;
  double prev = 0.0;
  for (std::size_t k = 0; k < t.size(); ++k) {
    if (t[k] < begin || t[k] > end) continue;
    if (started) tv += std::fabs(y[k] - prev);
    prev = y[k];
    started = true;
  }
  return started ? tv : kNaN;
}

std::vector<double> window_maxima(const Table& table, const std::string& channel, double t0, double width) {
  if (!(width > 0.0)) throw std::invalid_argument("window_maxima: width must be positive");
  const auto& t = table.column("t");
  const auto& y = table.column(channel);
  if (t.empty() || t.back() < t0 + width * (1.0 - 1e-9)) return {};
  // only complete windows; the final node closes the last one
  const auto count = static_cast<std::size_t>(std::floor((t.back() - t0) / width + 1e-9));
  std::vector<double> out(count, 0.0);
  for (std::size_t k = 0; k < t.size(); ++k) {
    if (t[k] < t0) continue;
    const auto w = static_cast<std::size_t>(std::floor((t[k] - t0) / width + 1e-9));
    if (w < count) {
      out[w] = std::max(out[w], std::fabs(y[k]));
    } else if (k + 1 == t.size()) {
      out[count - 1] = std::max(out[count - 1], std::fabs(y[k]));
    }
  }
  return out;
}

std::vector<double> caputo_of_channel(const Table& table, const std::string& channel, double alpha) {
  const auto& t = table.column("t");
  const auto& y = table.column(channel);
  if (t.size() < 2) throw std::invalid_argument("caputo_of_channel: need at least 2 samples");
  const double dt = (t.back() - t.front()) / static_cast<double>(t.size() - 1);
  const kernel::GridFunction f(t.front(), dt, y);
  const auto d = kernel::caputo_derivative(f, kernel::FracOrder(alpha));
  return {d.values().begin(), d.values().end()};
}

MetricsReport compute_metrics(const Table& table, int n, double horizon, bool diverged, const MetricsOptions& opt) {
  if (table.rows() == 0) throw std::invalid_argument("compute_metrics: empty trajectory");
  const auto& t = table.column("t");
  const auto& u = table.column("u");
  std::vector<const std::vector<double>*> z;
  for (int i = 1; i <= n; ++i) z.push_back(&table.column("z" + std::to_string(i)));

  MetricsReport m;
  m.diverged = diverged;

  const double tail_begin = (1.0 - opt.tail_fraction) * horizon;
  bool any_tail = false;
  double tail = 0.0;
  for (std::size_t k = 0; k < t.size(); ++k) {
    if (t[k] + 1e-9 < tail_begin) continue;
    tail = std::max(tail, std::fabs((*z[0])[k]));
    any_tail = true;
  }
  m.tail_tracking_error = any_tail ? tail : kNaN;

  double ss = 0.0;
  for (double v : u) ss += v * v;
  m.rms_control = std::sqrt(ss / static_cast<double>(u.size()));

  m.chattering_index = total_variation(table, "u", opt.chatter_begin * horizon, opt.chatter_end * horizon);

  if (!diverged) {
    std::optional<std::size_t> last_bad;
    for (std::size_t k = t.size(); k-- > 0;) {
      bool bad = false;
      for (const auto* zi : z) bad = bad || !(std::fabs((*zi)[k]) < opt.settle_threshold);
      if (bad) {
        last_bad = k;
        break;
      }
    }
    if (!last_bad) {
      m.settle_time = t.front();
    } else if (*last_bad + 1 < t.size()) {
      m.settle_time = t[*last_bad + 1];
    }
  }
  return m;
}

namespace {

// Per-node controller quantities gathered in one pass over a trajectory.
struct Pass {
  Table table;
  std::vector<std::vector<double>> alpha;  // alpha_1..alpha_{n-1}
  std::vector<std::vector<double>> chain;  // chain-rule part of D^a alpha_i
};

Pass evaluate_trajectory(const Scenario& s, const control::Backstepper& ctrl, const solve::Trajectory& traj) {
  const int n = s.plant.n;
  const int p = s.plant.p;
  const auto& lay = ctrl.layout();
  const std::size_t N = traj.size();

  std::vector<std::vector<double>> xs(n, std::vector<double>(N)), zs(n, std::vector<double>(N));
  std::vector<std::vector<double>> rho_hat(n - 1, std::vector<double>(N));
  std::vector<std::vector<double>> theta(static_cast<std::size_t>(p * n * (n + 1) / 2), std::vector<double>(N));
  std::vector<double> u(N), d_hat(N), d(N);
  Pass pass;
  pass.alpha.assign(n - 1, std::vector<double>(N));
  pass.chain.assign(n - 1, std::vector<double>(N));

  std::vector<double> xr(n);
  for (std::size_t k = 0; k < N; ++k) {
    const double t = traj.times[k];
    const auto& st = traj.states[k];
    const std::span<const double> x(st.data(), static_cast<std::size_t>(n));
    const auto est = lay.unpack(st);
    const auto ev = ctrl.evaluate(t, x, est);
    ctrl.plant_rates(t, x, ev.u, xr);
    for (int i = 0; i < n; ++i) {
      xs[i][k] = x[i];
      zs[i][k] = ev.z[i];
    }
    u[k] = ev.u;
    d_hat[k] = est.D_hat;
    d[k] = s.plant.disturbance(t);
    for (int i = 0; i + 1 < n; ++i) rho_hat[i][k] = est.rho_hat[i];
    std::size_t col = 0;
    for (const auto& th : est.theta_hat) {
      for (double v : th) theta[col++][k] = v;
    }
    for (int i = 1; i < n; ++i) {
      const auto& se = ev.stages[i - 1];
      double c = 0.0;
      for (int j = 1; j <= i; ++j) {
        c += se.d_dx[j - 1] * xr[j - 1];
        for (std::size_t e = 0; e < se.d_dtheta[j - 1].size(); ++e) {
          c += se.d_dtheta[j - 1][e] * ev.rates.theta_hat[j - 1][e];
        }
      }
      pass.alpha[i - 1][k] = se.value;
      pass.chain[i - 1][k] = c;
    }
  }

  Table& tab = pass.table;
  tab.add("t", traj.times);
  for (int i = 0; i < n; ++i) tab.add("x" + std::to_string(i + 1), std::move(xs[i]));
  for (int i = 0; i < n; ++i) tab.add("z" + std::to_string(i + 1), std::move(zs[i]));
  tab.add("u", std::move(u));
  tab.add("D_hat", std::move(d_hat));
  for (int i = 0; i + 1 < n; ++i) tab.add("rho_hat_" + std::to_string(i + 1), std::move(rho_hat[i]));
  std::size_t col = 0;
  for (int i = 1; i <= n; ++i) {
    for (int e = 1; e <= p * i; ++e) {
      tab.add("theta_hat_" + std::to_string(i) + "_" + std::to_string(e), std::move(theta[col++]));
    }
  }
  tab.add("d", std::move(d));
  return pass;
}

std::vector<double> bounds_from(const Pass& pass, const solve::Trajectory& traj, kernel::FracOrder order) {
  std::vector<double> out;
  if (traj.size() < 2) return std::vector<double>(pass.alpha.size(), 0.0);
  for (std::size_t i = 0; i < pass.alpha.size(); ++i) {
    const auto dalpha = kernel::caputo_derivative(kernel::GridFunction(traj.t0, traj.dt, pass.alpha[i]), order);
    double m = 0.0;
    for (std::size_t k = 0; k < traj.size(); ++k) m = std::max(m, std::fabs(pass.chain[i][k] - dalpha[k]));
    out.push_back(m);
  }
  return out;
}

}  // namespace

std::vector<double> rho_bounds(const Scenario& s, const control::Backstepper& ctrl, const solve::Trajectory& traj) {
  return bounds_from(evaluate_trajectory(s, ctrl, traj), traj, s.alpha);
}

Table record(const Scenario& s, const control::Backstepper& ctrl, const solve::Trajectory& traj) {
  Pass pass = evaluate_trajectory(s, ctrl, traj);
  const auto rho_bar = bounds_from(pass, traj, s.alpha);
  const int n = s.plant.n;
  const int p = s.plant.p;
  const auto& g = ctrl.gains();
  const double D = s.disturbance.bound();

  std::vector<Eigen::MatrixXd> gamma_inv;
  std::vector<Eigen::VectorXd> theta_v;
  for (int i = 1; i <= n; ++i) {
    gamma_inv.push_back(g.Gamma[i - 1].inverse());
    Eigen::VectorXd tv(p * i);
    for (int j = i, pos = 0; j >= 1; --j) {
      for (int e = 0; e < p; ++e) tv[pos++] = s.plant.theta_true[j - 1][e];
    }
    theta_v.push_back(std::move(tv));
  }

  Table& tab = pass.table;
  const std::size_t N = tab.rows();
  std::vector<double> V(N);
  for (std::size_t k = 0; k < N; ++k) {
    double v = 0.0;
    for (int i = 1; i <= n; ++i) {
      const double z = tab.column("z" + std::to_string(i))[k];
      v += 0.5 * z * z;
      Eigen::VectorXd err = theta_v[i - 1];
      for (int e = 1; e <= p * i; ++e) {
        err[e - 1] -= tab.column("theta_hat_" + std::to_string(i) + "_" + std::to_string(e))[k];
      }
      v += 0.5 * err.dot(gamma_inv[i - 1] * err);
    }
    for (int i = 1; i < n; ++i) {
      const double r = rho_bar[i - 1] - tab.column("rho_hat_" + std::to_string(i))[k];
      v += r * r / (2.0 * g.lambda[i - 1]);
    }
    const double dd = D - tab.column("D_hat")[k];
    v += dd * dd / (2.0 * g.eta);
    V[k] = v;
  }
  tab.add("V_n", std::move(V));
  return std::move(tab);
}

RunResult run(const RunConfig& config) {
  RunResult res;
  res.config = config;
  res.scenario = config.build();
  const Scenario& s = res.scenario;
  const auto ctrl = s.make_controller();
  const auto sys = s.make_system(ctrl);
  solve::SolverConfig sc;
  sc.dt = s.dt;
  sc.t_end = s.horizon;
  const auto x0 = s.initial_state();
  const auto traj = solve::solve_abm(sys, x0, sc);
  res.table = record(s, ctrl, traj);
  res.metrics = compute_metrics(res.table, s.plant.n, s.horizon, traj.diverged);
  res.corrector_flags = traj.corrector_flags;
  if (!config.out_dir.empty()) write_outputs(res, config.out_dir);
  return res;
}

std::string metrics_json(const RunResult& result) {
  auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  const auto& m = result.metrics;
  nlohmann::json j;
  j["scenario"] = result.config.scenario;
  j["controller"] = scenarios::to_string(result.config.controller_kind());
  j["dt"] = result.scenario.dt;
  j["horizon"] = result.scenario.horizon;
  j["alpha"] = result.scenario.alpha.value();
  j["seed"] = result.config.seed;
  j["overrides"] = result.config.overrides;
  j["tail_tracking_error"] = num(m.tail_tracking_error);
  j["rms_control"] = num(m.rms_control);
  j["chattering_index"] = num(m.chattering_index);
  j["settle_time"] = m.settle_time ? num(*m.settle_time) : nlohmann::json(nullptr);
  j["diverged"] = m.diverged;
  j["corrector_flags"] = result.corrector_flags;
  return j.dump(2) + "\n";
}

void write_outputs(const RunResult& result, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream os(dir / "trajectory.csv");
    if (!os) throw std::runtime_error("cannot write " + (dir / "trajectory.csv").string());
    write_csv(result.table, os);
  }
  std::ofstream js(dir / "metrics.json");
  if (!js) throw std::runtime_error("cannot write " + (dir / "metrics.json").string());
  js << metrics_json(result);
}

Comparison compare(const std::vector<RunConfig>& configs, const std::filesystem::path& out_dir) {
  if (configs.size() < 2) throw ConfigError("compare: need at least two runs");
  std::vector<Scenario> built;
  for (const auto& c : configs) built.push_back(c.build());
  for (std::size_t i = 1; i < configs.size(); ++i) {
    if (configs[i].scenario != configs[0].scenario || built[i].dt != built[0].dt) {
      std::ostringstream os;
      os << "compare: runs differ in scenario or dt (" << configs[0].scenario << " dt=" << built[0].dt << " vs "
         << configs[i].scenario << " dt=" << built[i].dt << ")";
      throw MismatchError(os.str());
    }
  }

  std::vector<std::future<RunResult>> jobs;
  for (const auto& c : configs) jobs.push_back(std::async(std::launch::async, [c] { return run(c); }));
  Comparison out;
  for (auto& j : jobs) out.runs.push_back(j.get());

  auto fmt = [](double v) {
    if (!std::isfinite(v)) return std::string("-");
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return std::string(buf);
  };
  std::ostringstream text, csv;
  char line[256];
  std::snprintf(line, sizeof(line), "%-32s %14s %14s %16s %12s %9s\n", "run", "tail_error", "rms_control", "chattering",
                "settle_time", "diverged");
  text << line;
  csv << "run,tail_tracking_error,rms_control,chattering_index,settle_time,diverged\n";
  for (const auto& r : out.runs) {
    const auto& m = r.metrics;
    const std::string settle = m.settle_time ? fmt(*m.settle_time) : "-";
    std::snprintf(line, sizeof(line), "%-32s %14s %14s %16s %12s %9s\n", r.config.label().c_str(),
                  fmt(m.tail_tracking_error).c_str(), fmt(m.rms_control).c_str(), fmt(m.chattering_index).c_str(),
                  settle.c_str(), m.diverged ? "yes" : "no");
    text << line;
    csv << r.config.label() << ',' << fmt(m.tail_tracking_error) << ',' << fmt(m.rms_control) << ','
        << fmt(m.chattering_index) << ',' << (m.settle_time ? fmt(*m.settle_time) : "") << ','
        << (m.diverged ? 1 : 0) << '\n';
  }
  out.text = text.str();
  out.csv = csv.str();

  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    std::ofstream(out_dir / "comparison.csv") << out.csv;
    std::ofstream(out_dir / "comparison.txt") << out.text;
    for (const std::string ch : {"u", "z1", "z2"}) {
      std::vector<Series> series;
      for (const auto& r : out.runs) {
        series.push_back({r.config.label(), &r.table.column("t"), &r.table.column(ch)});
      }
      write_line_chart(series, ch, out_dir / (ch + ".svg"));
    }
  }
  return out;
}

}  // namespace fracstep::harness
