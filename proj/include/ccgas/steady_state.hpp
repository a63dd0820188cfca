#pragma once

#include "ccgas/network.hpp"
#include "ccgas/state.hpp"

#include <optional>

namespace ccgas {

struct FlowSolution {
  VectorXd flow;
  VectorXd pressure;
  int iterations = 0;
  double residual = 0.0;  // scaled max-norm of the steady-state equations
};

/// Solves the steady-state equations for fixed injections, regulation and
/// reference pressure (Newton's method on the convex flow potential
/// Σ |φ|³/(3w) − κφ subject to conservation). `extraction` defaults to the
/// network's mean extraction.
FlowSolution simulate_flow(const GasNetwork& net, const VectorXd& injection,
                           const VectorXd& regulation, double reference_pressure);
FlowSolution simulate_flow(const GasNetwork& net, const VectorXd& injection,
                           const VectorXd& regulation, double reference_pressure,
                           const VectorXd& extraction);

struct SlpOptions {
  double initial_radius = 0.1;  // fraction of each control's range
  double shrink = 0.5;
  double expand = 1.5;
  double relative_tolerance = 1e-7;
  double feasibility_tolerance = 1e-6;
  int max_iterations = 300;
  int num_starts = 5;
};

/// Minimum-cost operating point of the non-convex steady-state model via
/// trust-region successive linearisation from deterministic multi-starts.
StationaryPoint solve_deterministic(const GasNetwork& net, const SlpOptions& options = {});
StationaryPoint solve_deterministic(const GasNetwork& net, const VectorXd& extraction,
                                    const SlpOptions& options = {});

struct ProjectionResult {
  StationaryPoint point;
  double distance = 0.0;  // ‖θ − target_θ‖ + ‖κ − target_κ‖
  bool converged = false;
  bool used_fallback = false;
  int iterations = 0;
};

/// Nearest feasible operating point (in control space) to the given control
/// targets for one extraction realisation. Warm-starts at the targets; on
/// failure restarts from `fallback` when supplied.
ProjectionResult project_controls(const GasNetwork& net, const VectorXd& extraction,
                                  const VectorXd& target_injection,
                                  const VectorXd& target_regulation,
                                  const std::optional<StationaryPoint>& fallback,
                                  const SlpOptions& options = {});

}  // namespace ccgas
