// fracstep command line: run, compare and selftest.

#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fracstep/harness.hpp"

namespace fs = std::filesystem;
using namespace fracstep;

namespace {

constexpr int kExitDiverged = 3;

struct RunArgs {
  std::string scenario;
  std::string controller;
  double dt = 0.0;
  double horizon = 0.0;
  std::vector<std::string> sets;
  std::string out;
  std::string config;
  std::uint64_t seed = 0;
  bool plot = false;
  bool phase3d = false;
  bool expect_stable = false;
};

void apply_set(harness::RunConfig& cfg, const std::string& kv) {
  const auto eq = kv.find('=');
  if (eq == std::string::npos || eq == 0) throw harness::ConfigError("--set expects key=value, got '" + kv + "'");
  const std::string key = kv.substr(0, eq);
  const std::string val = kv.substr(eq + 1);
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(val, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != val.size()) throw harness::ConfigError("--set " + key + ": '" + val + "' is not a number");
  cfg.overrides[key] = v;
}

harness::RunConfig to_config(const RunArgs& a, CLI::App& cmd) {
  harness::RunConfig cfg = a.config.empty() ? harness::RunConfig{} : harness::load_config(a.config);
  if (!a.scenario.empty()) cfg.scenario = a.scenario;
  if (cfg.scenario.empty()) throw harness::ConfigError("run: give a scenario name or a config file with one");
  if (cmd.count("--controller")) cfg.controller = scenarios::parse_controller_kind(a.controller);
  if (cmd.count("--dt")) cfg.dt = a.dt;
  if (cmd.count("--horizon")) cfg.horizon = a.horizon;
  if (cmd.count("--seed")) cfg.seed = a.seed;
  for (const auto& kv : a.sets) apply_set(cfg, kv);
  if (!a.out.empty()) cfg.out_dir = a.out;
  if (cfg.out_dir.empty()) cfg.out_dir = fs::path("out") / (cfg.scenario + "_" + scenarios::to_string(cfg.controller_kind()));
  return cfg;
}

int do_run(const RunArgs& a, CLI::App& cmd) {
  const auto cfg = to_config(a, cmd);
  if (a.phase3d && cfg.build().plant.n != 3) throw harness::ConfigError("--phase3d needs a three-state scenario");
  const auto res = harness::run(cfg);
  std::cout << harness::metrics_json(res);
  std::cerr << "wrote " << (cfg.out_dir / "trajectory.csv").string() << " and metrics.json\n";

  if (a.plot) {
    const int n = res.scenario.plant.n;
    std::vector<std::string> xs, zs, est{"D_hat"};
    for (int i = 1; i <= n; ++i) {
      xs.push_back("x" + std::to_string(i));
      zs.push_back("z" + std::to_string(i));
    }
    for (int i = 1; i < n; ++i) est.push_back("rho_hat_" + std::to_string(i));
    harness::emit_plot(res.table, xs, cfg.out_dir / "states.svg");
    harness::emit_plot(res.table, zs, cfg.out_dir / "errors.svg");
    harness::emit_plot(res.table, {"u"}, cfg.out_dir / "control.svg");
    harness::emit_plot(res.table, est, cfg.out_dir / "estimates.svg");
    harness::emit_plot(res.table, {"d"}, cfg.out_dir / "disturbance.svg");
  }
  if (a.phase3d) harness::emit_phase3d(res.table, cfg.out_dir / "phase3d.svg");

  if (res.metrics.diverged) {
    std::cerr << "run diverged at t = " << res.table.column("t").back() << "\n";
    if (a.expect_stable) return kExitDiverged;
  }
  return 0;
}

int do_compare(const std::vector<std::string>& specs, const std::string& out, double dt, double horizon,
               CLI::App& cmd) {
  std::vector<harness::RunConfig> cfgs;
  for (const auto& spec : specs) {
    harness::RunConfig cfg;
    if (fs::is_regular_file(spec)) {
      cfg = harness::load_config(spec);
    } else {
      const auto colon = spec.find(':');
      cfg.scenario = spec.substr(0, colon);
      if (colon != std::string::npos) cfg.controller = scenarios::parse_controller_kind(spec.substr(colon + 1));
    }
    if (cmd.count("--dt")) cfg.dt = dt;
    if (cmd.count("--horizon")) cfg.horizon = horizon;
    cfg.out_dir.clear();
    cfgs.push_back(std::move(cfg));
  }
  const auto cmp = harness::compare(cfgs, out);
  std::cout << cmp.text;
  std::cerr << "wrote " << (fs::path(out) / "comparison.csv").string() << " and u/z1/z2 overlays\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive backstepping simulations for fractional-order plants"};
  app.require_subcommand(1);

  RunArgs ra;
  auto* run = app.add_subcommand("run", "simulate one scenario and write trajectory.csv / metrics.json");
  run->add_option("scenario", ra.scenario, "scenario name")
      ->check(CLI::IsMember(scenarios::scenario_names()));
  run->add_option("--controller", ra.controller, "proposed | sign | arctan | none");
  run->add_option("--dt", ra.dt, "step size");
  run->add_option("--horizon", ra.horizon, "final time");
  run->add_option("--set", ra.sets, "override key=value (gains, x0_i, a, alpha)")->allow_extra_args(false);
  run->add_option("--out", ra.out, "output directory");
  run->add_option("--config", ra.config, "JSON run description")->check(CLI::ExistingFile);
  run->add_option("--seed", ra.seed, "seed recorded with the run");
  run->add_flag("--plot", ra.plot, "write SVG charts");
  run->add_flag("--phase3d", ra.phase3d, "write the 3-D state curve (three-state scenarios)");
  run->add_flag("--expect-stable", ra.expect_stable, "exit nonzero if the run diverges");

  std::vector<std::string> specs;
  std::string cmp_out = "out/compare";
  double cmp_dt = 0.0, cmp_horizon = 0.0;
  auto* cmp = app.add_subcommand("compare", "run several configurations of one scenario side by side");
  cmp->add_option("configs", specs, "JSON config files or scenario:controller")->required()->expected(2, -1);
  cmp->add_option("--out", cmp_out, "output directory");
  cmp->add_option("--dt", cmp_dt, "step size for every run");
  cmp->add_option("--horizon", cmp_horizon, "final time for every run");

  std::uint64_t st_seed = 1;
  auto* st = app.add_subcommand("selftest", "operator and property checks");
  st->add_option("--seed", st_seed, "random seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return do_run(ra, *run);
    if (*cmp) return do_compare(specs, cmp_out, cmp_dt, cmp_horizon, *cmp);
    if (*st) return harness::selftest(std::cout, st_seed) == 0 ? 0 : 1;
  } catch (const std::exception& e) {
    std::cerr << "fracstep: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
