#pragma once

#include "ccgas/policy.hpp"
#include "ccgas/steady_state.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace ccgas {

/// Violation frequency of one inequality of the operating limits.
struct ConstraintFrequency {
  std::string kind;  // pressure_max, pressure_min, flow_min, injection_max, ...
  Index index = -1;  // node or edge index
  Index violations = 0;
  double frequency = 0.0;
};

struct ViolationReport {
  Index samples = 0;
  Index joint_violations = 0;
  double joint_frequency = 0.0;
  double joint_ci_low = 0.0;  // Clopper–Pearson interval
  double joint_ci_high = 0.0;
  std::vector<ConstraintFrequency> constraints;
  std::vector<Index> violated_per_sample;  // number of violated inequalities per sample
};

/// Counts limit violations of the affine policies and the linearised state
/// response over the columns of `samples` (N×S). An inequality counts as
/// violated when it is exceeded by more than tol·(1 + |limit|).
ViolationReport evaluate_policies(const PolicySolution& sol, const LinearizedModel& lin, const GasNetwork& net,
                                  const MatrixXd& samples, double tol = 1e-9, double confidence = 0.95);

/// Two-sided Clopper–Pearson interval for k successes in n trials.
std::pair<double, double> binomial_interval(Index k, Index n, double confidence = 0.95);

struct ProjectionSample {
  double distance = 0.0;
  double injection_gap = 0.0;   // ‖θ̃ − θ‖
  double regulation_gap = 0.0;  // ‖κ̃ − κ‖
  bool converged = false;
  bool used_fallback = false;
  StationaryPoint point;
};

/// Nearest feasible non-convex operating point to the controls
/// (θ̃, κ̃) under extraction δ + ξ.
ProjectionSample project_realization(const GasNetwork& net, const VectorXd& injection, const VectorXd& regulation,
                                     const VectorXd& xi, const std::optional<StationaryPoint>& fallback,
                                     const SlpOptions& options = {});

/// Policy controls θ + αξ and κ + βξ.
VectorXd policy_injection(const PolicySolution& sol, const VectorXd& xi);
VectorXd policy_regulation(const PolicySolution& sol, const VectorXd& xi);

struct ProjectionMetrics {
  Index samples = 0;
  Index failures = 0;      // projections that did not converge (excluded below)
  Index feasible = 0;      // samples whose controls needed no correction
  double p_inj = 0.0;      // mean ‖θ̃ − θ_s‖
  double p_act = 0.0;      // mean ‖κ̃ − κ_s‖
  double p_inj_relative = 0.0;  // p_inj / ‖θ‖
  double p_act_relative = 0.0;  // p_act / ‖κ‖
  std::vector<double> distances;  // per sample, NaN on failure
};

/// Projects the policy controls of every sample; runs samples on `threads`
/// workers (0 = hardware concurrency) and aggregates in sample order.
ProjectionMetrics projection_metrics(const PolicySolution& sol, const GasNetwork& net, const MatrixXd& samples,
                                     const std::optional<StationaryPoint>& fallback, const SlpOptions& options = {},
                                     unsigned threads = 0);

/// Smallest S with S ≥ 1/(p·v) − 1.
Index sample_complexity(double p, double v);

struct ErrorBound {
  Index node = -1;
  Index samples_used = 0;
  double t_star = 0.0;             // max |π̃_n − π*_n| in squared-pressure units
  double t_star_natural = 0.0;     // max |√π̃_n − √π*_n| / √π_n (fraction of nominal pressure)
  bool certificate_valid = false;
  Index failures = 0;
  std::string message;
};

/// Worst-case linearisation error of the pressure at every node, with the
/// sample count chosen for probability 1 − p and confidence 1 − v. A failed
/// projection aborts the run and invalidates every certificate.
std::vector<ErrorBound> error_bounds(const PolicySolution& sol, const LinearizedModel& lin, const GasNetwork& net,
                                     const UncertaintyModel& unc, double p, double v, std::uint64_t seed,
                                     const std::optional<StationaryPoint>& fallback, const SlpOptions& options = {},
                                     unsigned threads = 0);
ErrorBound error_bound(Index node, const PolicySolution& sol, const LinearizedModel& lin, const GasNetwork& net,
                       const UncertaintyModel& unc, double p, double v, std::uint64_t seed,
                       const std::optional<StationaryPoint>& fallback, const SlpOptions& options = {},
                       unsigned threads = 0);

/// Fraction of samples whose linearised flow sign differs from the nominal sign.
VectorXd flow_reversal_stats(const PolicySolution& sol, const LinearizedModel& lin, const MatrixXd& samples);

struct EmpiricalVariance {
  VectorXd pressure;          // squared-pressure variance per node
  VectorXd natural_pressure;  // variance of √π̃ per node
  VectorXd flow;              // per edge
};

EmpiricalVariance empirical_variances(const PolicySolution& sol, const LinearizedModel& lin,
                                      const MatrixXd& samples);

/// First-order variance of the natural pressure √π̃: s²/(4π).
VectorXd natural_pressure_variance(const VectorXd& pressure, const VectorXd& std_pressure);

/// Runs f(i) for i in [0, count) on up to `threads` workers.
void parallel_for(Index count, unsigned threads, const std::function<void(Index)>& f);

}  // namespace ccgas
