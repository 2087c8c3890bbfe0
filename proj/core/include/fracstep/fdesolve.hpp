#pragma once

// Fixed-step solvers for commensurate Caputo systems D^alpha x = F(t, x).

#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fracstep/frackernel.hpp"

namespace fracstep::solve {

/// Writes F(t, x) into `rate` (same length as x).
using RateFn = std::function<void(double t, std::span<const double> x, std::span<double> rate)>;

class ConfigError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

struct CommensurateFDE {
  kernel::FracOrder order{1.0};
  std::size_t dim = 0;
  RateFn rhs;
  std::vector<double> discontinuity_times;  // strictly increasing, >= 0
};

/// States above this magnitude stop the run with the divergence flag set.
inline constexpr double kDivergenceThreshold = 1e9;

struct SolverConfig {
  double dt = 1e-3;
  double t_end = 1.0;
  int corrector_iters = 2;
  std::optional<std::size_t> memory_window;  // in steps; empty = full memory
};

struct Trajectory {
  double t0 = 0.0;
  double dt = 0.0;
  std::vector<double> times;
  std::vector<std::vector<double>> states;
  std::map<std::string, std::vector<double>> aux;
  bool diverged = false;
  /// Nodes where the last corrector pass still moved the state noticeably.
  std::size_t corrector_flags = 0;

  [[nodiscard]] std::size_t size() const noexcept { return times.size(); }
  /// Component `i` of the state as a grid function.
  [[nodiscard]] kernel::GridFunction component(std::size_t i) const;
};

/// Fractional Adams-Bashforth-Moulton predictor-corrector (P(EC)^m E).
[[nodiscard]] Trajectory solve_abm(const CommensurateFDE& sys, std::span<const double> x0, const SolverConfig& cfg);

/// Grunwald-Letnikov scheme on y = x - x0 with fixed-point corrector passes.
[[nodiscard]] Trajectory solve_gl(const CommensurateFDE& sys, std::span<const double> x0, const SolverConfig& cfg);

/// Number of steps taken for a configuration (nodes = steps + 1).
[[nodiscard]] std::size_t step_count(const SolverConfig& cfg);

}  // namespace fracstep::solve
