#pragma once

// Run configuration, trajectory recording, metrics and file output for the
// closed-loop scenarios.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "fracstep/fdesolve.hpp"
#include "fracstep/scenarios.hpp"

namespace fracstep::harness {

class ConfigError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// Runs that cannot be compared (different scenario or grid).
class MismatchError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// Unknown or empty channel selection.
class ChannelError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

struct RunConfig {
  std::string scenario;
  std::optional<scenarios::ControllerKind> controller;  // scenario default when empty
  std::optional<double> dt;
  std::optional<double> horizon;
  std::filesystem::path out_dir;  // empty: nothing written
  std::uint64_t seed = 0;
  std::map<std::string, double> overrides;

  [[nodiscard]] scenarios::ControllerKind controller_kind() const;
  /// Scenario with dt, horizon and overrides applied. Throws ConfigError.
  [[nodiscard]] scenarios::Scenario build() const;
  /// "scenario:controller".
  [[nodiscard]] std::string label() const;
};

/// Valid override keys for an n-state scenario.
[[nodiscard]] std::vector<std::string> override_keys(int n);

/// Reads a JSON run description:
///   {"scenario": ..., "controller": ..., "dt": ..., "horizon": ..., "seed": ...,
///    "out": ..., "overrides": {"c1": 30, ...}}
[[nodiscard]] RunConfig config_from_json(const std::string& text);
[[nodiscard]] RunConfig load_config(const std::filesystem::path& path);

/// Named columns of equal length.
struct Table {
  std::vector<std::string> names;
  std::vector<std::vector<double>> columns;

  [[nodiscard]] std::size_t rows() const noexcept { return columns.empty() ? 0 : columns.front().size(); }
  [[nodiscard]] bool has(const std::string& name) const;
  [[nodiscard]] const std::vector<double>& column(const std::string& name) const;
  void add(std::string name, std::vector<double> values);
};

void write_csv(const Table& table, std::ostream& os);
[[nodiscard]] Table read_csv(std::istream& is);

struct MetricsOptions {
  double tail_fraction = 0.2;
  double chatter_begin = 0.4;
  double chatter_end = 0.9;
  double settle_threshold = 0.05;
};

struct MetricsReport {
  double tail_tracking_error = 0.0;
  double rms_control = 0.0;
  double chattering_index = 0.0;
  std::optional<double> settle_time;
  bool diverged = false;
};

/// Metrics from the recorded channels (needs t, z1..zn, u).
[[nodiscard]] MetricsReport compute_metrics(const Table& table, int n, double horizon, bool diverged,
                                            const MetricsOptions& opt = {});

/// Total variation of a channel over nodes with begin <= t <= end.
[[nodiscard]] double total_variation(const Table& table, const std::string& channel, double begin, double end);
/// max |channel| over the complete windows [t0 + k w, t0 + (k+1) w); a final
/// node exactly on a window edge belongs to the window it closes.
[[nodiscard]] std::vector<double> window_maxima(const Table& table, const std::string& channel, double t0, double width);

/// Caputo derivative of order alpha of a recorded channel (L1 scheme).
[[nodiscard]] std::vector<double> caputo_of_channel(const Table& table, const std::string& channel, double alpha);

/// Bounds on the lumped terms rho_1..rho_{n-1}: max over the run of the
/// chain-rule residual of each virtual control.
[[nodiscard]] std::vector<double> rho_bounds(const scenarios::Scenario& s, const control::Backstepper& ctrl,
                                             const solve::Trajectory& traj);

/// Columns t, x1..xn, z1..zn, u, D_hat, rho_hat_*, theta_hat_<stage>_<entry>, d, V_n.
[[nodiscard]] Table record(const scenarios::Scenario& s, const control::Backstepper& ctrl, const solve::Trajectory& traj);

struct RunResult {
  RunConfig config;
  scenarios::Scenario scenario;
  Table table;
  MetricsReport metrics;
  std::size_t corrector_flags = 0;
};

/// Simulates the configured scenario; writes trajectory.csv and metrics.json
/// into config.out_dir when it is set.
[[nodiscard]] RunResult run(const RunConfig& config);
void write_outputs(const RunResult& result, const std::filesystem::path& dir);
/// Metrics plus the effective run settings as a JSON document.
[[nodiscard]] std::string metrics_json(const RunResult& result);

struct Comparison {
  std::vector<RunResult> runs;
  std::string text;
  std::string csv;
};

/// Runs every config (concurrently) after checking they share scenario and dt.
/// With out_dir set, writes comparison.csv and overlaid u/z plots there.
[[nodiscard]] Comparison compare(const std::vector<RunConfig>& configs, const std::filesystem::path& out_dir = {});

struct Series {
  std::string label;
  const std::vector<double>* t;
  const std::vector<double>* y;
};

/// SVG line chart of the given series against time.
void write_line_chart(const std::vector<Series>& series, const std::string& title, const std::filesystem::path& file);
/// One chart holding the named channels.
void emit_plot(const Table& table, const std::vector<std::string>& channels, const std::filesystem::path& file);
/// Oblique projection of the (x1, x2, x3) state curve.
void emit_phase3d(const Table& table, const std::filesystem::path& file);

struct PartialsCheck {
  std::size_t checked = 0;
  std::size_t failures = 0;
  double worst = 0.0;  // largest |ad - fd| / max(1, |ad|)
};

/// Compares every StageEval partial with central differences of the stage
/// value (step 1e-6 relative) at random states and estimates in [-1.5, 1.5].
[[nodiscard]] PartialsCheck check_partials(const scenarios::Scenario& s, std::uint64_t seed, int samples,
                                           double tolerance = 1e-5);

/// Quick operator and property checks; returns the number of failures.
int selftest(std::ostream& os, std::uint64_t seed);

}  // namespace fracstep::harness
