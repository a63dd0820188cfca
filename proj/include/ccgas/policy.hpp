#pragma once

#include "ccgas/conic.hpp"
#include "ccgas/linearization.hpp"
#include "ccgas/network.hpp"
#include "ccgas/uncertainty.hpp"

#include <string_view>
#include <vector>

namespace ccgas {

/// Which assets provide recourse: suppliers only, suppliers and compressors,
/// or suppliers, compressors and valves.
enum class PolicyMask { injections, injections_compressors, all_assets };

std::string_view to_string(PolicyMask m);
PolicyMask policy_mask_from_string(std::string_view s);

struct PolicyOptions {
  VectorXd psi_pressure;  // per node, empty means zero
  VectorXd psi_flow;      // per edge, empty means zero
  PolicyMask mask = PolicyMask::all_assets;
};

/// Decision structure of the recourse policies. α has rows for suppliers
/// other than the reference node and β rows for the regulated active edges;
/// both only have columns for stochastic nodes (ξ is identically zero
/// elsewhere).
struct PolicyStructure {
  std::vector<Index> suppliers;           // nodes with a nominal injection decision
  std::vector<Index> recourse_suppliers;  // α rows
  std::vector<Index> regulated_edges;     // β rows
  std::vector<Index> stochastic;          // α/β columns
  std::vector<bool> pressure_random;      // pressure response row has a random part
  std::vector<bool> flow_random;          // flow response row has a random part
};

PolicyStructure policy_structure(const GasNetwork& net, const LinearizedModel& lin,
                                 const std::vector<Index>& stochastic, PolicyMask mask);

/// Number of chance constraints with a random part, i.e. the constraints
/// that share the joint violation budget.
Index count_chance_constraints(const GasNetwork& net, const PolicyStructure& s);

/// Assembled chance-constrained program with the block id of every
/// constraint (−1 where a constraint is not emitted).
struct PolicyProgram {
  ConicProgram program;
  PolicyStructure structure;
  VectorXd psi_pressure, psi_flow;
  double safety = 0.0;
  double objective_constant = 0.0;
  bool recourse_impossible = false;

  std::vector<Index> conservation, recourse, weymouth;
  Index reference = -1;
  std::vector<Index> variance_pressure, variance_flow;
  std::vector<Index> pressure_max, pressure_min, flow_min;
  std::vector<Index> cost_injection, cost_recourse;
  std::vector<Index> injection_max, injection_min, regulation_max, regulation_min;
};

PolicyProgram assemble(const GasNetwork& net, const LinearizedModel& lin, const UncertaintyModel& unc,
                       const PolicyOptions& options = {});

/// Primal and dual solution of the policy program. Dual signs follow the
/// Lagrangian  objective + λᵀ(equality rows) − Σ (λ·t + uᵀv)  over the cone
/// constraints ‖v‖ ≤ t, with equality rows written as
///   conservation  Aφ − θ + Bκ + δ,   recourse  1 − (α − Bβ)ᵀ1,
///   weymouth      φ − γ1 − γ2π − γ3κ, reference  π̊_r − π_r.
/// Chance-constraint cones use v = z·F·(row), so u is the multiplier of
/// z·F·(row). Rotated cost cones ‖v‖² ≤ c carry (μ, λ, u) with
/// ‖u‖² ≤ 2μλ at dual feasibility.
struct PolicySolution {
  SolveStatus status = SolveStatus::iteration_limit;
  bool inaccurate = false;
  int iterations = 0;
  double objective = 0.0;
  double relative_gap = 0.0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  std::string message;
  double safety = 0.0;

  // primal
  VectorXd injection, regulation, flow, pressure;  // θ (N), κ (E), φ (E), π (N)
  MatrixXd alpha;  // N×N
  MatrixXd beta;   // E×N
  VectorXd cost_injection, cost_recourse;  // c^θ, c^α (N)
  VectorXd std_pressure, std_flow;         // s^π (N), s^φ (E)

  // equality duals
  VectorXd lambda_c, lambda_r, lambda_w;
  double lambda_ref = 0.0;
  // state cones
  VectorXd lambda_pi, lambda_pi_max, lambda_pi_min;  // N
  MatrixXd u_pi, u_pi_max, u_pi_min;                 // N×N
  VectorXd lambda_phi, lambda_phi_min;               // E
  MatrixXd u_phi, u_phi_min;                         // E×N
  // cost cones
  VectorXd mu_theta, lambda_theta, u_theta;  // N
  VectorXd mu_alpha, lambda_alpha;           // N
  MatrixXd u_alpha;                          // N×N
  std::vector<bool> has_cost_injection, has_cost_recourse;
  // control limit cones
  VectorXd lambda_theta_max, lambda_theta_min;  // N
  MatrixXd u_theta_max, u_theta_min;            // N×N
  VectorXd lambda_kappa_max, lambda_kappa_min;  // E
  MatrixXd u_kappa_max, u_kappa_min;            // E×N

  bool optimal() const { return status == SolveStatus::optimal; }
};

PolicySolution solve(const PolicyProgram& prog, const GasNetwork& net, const LinearizedModel& lin,
                     const UncertaintyModel& unc, const SolverSettings& settings = {});

/// Uncertainty model whose Bonferroni split matches the chance constraints
/// the policy program will emit. A negative `safety_override` keeps z(ε̂);
/// otherwise z is fixed (z = 0 gives deterministic policies).
UncertaintyModel budgeted_uncertainty(const GasNetwork& net, const LinearizedModel& lin, double epsilon,
                                      Distribution distribution, PolicyMask mask,
                                      double safety_override = -1.0);

/// assemble followed by solve.
PolicySolution optimize_policies(const GasNetwork& net, const LinearizedModel& lin,
                                 const UncertaintyModel& unc, const PolicyOptions& options = {},
                                 const SolverSettings& settings = {});

/// c1ᵀθ + θᵀdiag(c2)θ + Tr[αᵀdiag(c2)αΣ].
double expected_cost(const VectorXd& injection, const MatrixXd& alpha, const MatrixXd& covariance,
                     const VectorXd& c1, const VectorXd& c2);
double expected_cost(const PolicySolution& sol, const UncertaintyModel& unc, const VectorXd& c1,
                     const VectorXd& c2);

struct StateStddev {
  VectorXd pressure;  // N
  VectorXd flow;      // E
};

/// Closed-form standard deviations ‖F·(response row)ᵀ‖ of pressures and flows.
StateStddev state_stddev(const MatrixXd& alpha, const MatrixXd& beta, const LinearizedModel& lin,
                         const UncertaintyModel& unc);
StateStddev state_stddev(const PolicySolution& sol, const LinearizedModel& lin, const UncertaintyModel& unc);

/// Structured-text summary of a solution (primal values and duals).
std::string serialize_policy(const PolicySolution& sol);

}  // namespace ccgas
