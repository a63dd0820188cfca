#pragma once

#include "ccgas/policy.hpp"

#include <string>
#include <utility>
#include <vector>

namespace ccgas {

/// One agent's revenue split into four streams.
struct RevenueSplit {
  double nominal = 0.0;   // nominal balance (for pipelines: nominal pressure regulation)
  double recourse = 0.0;  // recourse balance
  double limits = 0.0;    // pressure and flow limits
  double variance = 0.0;  // pressure and flow variance
  double total() const { return nominal + recourse + limits + variance; }
};

struct RevenueReport {
  std::vector<Index> supplier_nodes;
  std::vector<RevenueSplit> supplier;  // paid to suppliers
  std::vector<Index> active_edges;
  std::vector<RevenueSplit> active;    // paid to active pipelines
  std::vector<RevenueSplit> consumer;  // charged to every node (N)

  double flow_rent = 0.0;
  double pressure_rent = 0.0;
  double variance_rent = 0.0;
  double reference_rent = 0.0;  // −λ^π̊·π_r
  double linearization_surplus = 0.0;  // λ^wᵀγ1

  double total_supplier() const;
  double total_active() const;
  double total_consumer() const;
  double operator_rent() const { return flow_rent + pressure_rent + variance_rent + reference_rent; }
  /// Σ consumer − Σ supplier − Σ active.
  double adequacy_gap() const { return total_consumer() - total_supplier() - total_active(); }
  /// adequacy_gap − rent − λ^wᵀγ1; zero at any optimal solution.
  double identity_residual() const { return adequacy_gap() - operator_rent() - linearization_surplus; }
  /// Magnitude used to scale tolerances on the identity.
  double scale() const;
};

/// Revenue decomposition of an optimal policy solution. Throws
/// ValidationError when the solution is not optimal or lacks duals.
RevenueReport revenues(const PolicySolution& sol, const LinearizedModel& lin, const GasNetwork& net,
                       const UncertaintyModel& unc);

struct AdequacyCheck {
  bool holds = false;
  double gap = 0.0;
  double identity_residual = 0.0;
  bool conditions_met = false;  // γ1 = 0 and π_min = 0
  bool offset_zero = false;
  bool pressure_floor_zero = false;
};

AdequacyCheck check_revenue_adequacy(const RevenueReport& report, const LinearizedModel& lin,
                                     const GasNetwork& net, double tol = 1e-6);

struct AgentProfit {
  bool supplier = true;  // false: active pipeline
  Index index = -1;      // node or edge index
  double revenue = 0.0;
  double cost = 0.0;
  double profit = 0.0;
  bool nonnegative = false;
};

struct CostRecovery {
  std::vector<AgentProfit> agents;
  bool all_nonnegative = false;
  /// Violated design conditions, e.g. "injection_min > 0 at node 3".
  std::vector<std::string> violated_conditions;
  bool conditions_met() const { return violated_conditions.empty(); }
};

CostRecovery check_cost_recovery(const RevenueReport& report, const PolicySolution& sol, const GasNetwork& net,
                                 double tol = 1e-8);

/// Max absolute residual per first-order condition block and the largest
/// dual-feasibility violation over all cones.
struct StationarityReport {
  std::vector<std::pair<std::string, double>> blocks;
  double max() const;
  double get(const std::string& name) const;
};

StationarityReport check_stationarity(const PolicySolution& sol, const LinearizedModel& lin, const GasNetwork& net,
                                      const UncertaintyModel& unc, const PolicyOptions& options = {});

/// Flat CSV, one row per agent per stream, plus operator rent lines.
std::string revenue_csv(const RevenueReport& report, const GasNetwork& net);
std::string serialize_revenue(const RevenueReport& report, const GasNetwork& net);

}  // namespace ccgas
