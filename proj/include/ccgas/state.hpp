#pragma once

#include "ccgas/network.hpp"

#include <filesystem>
#include <string>

namespace ccgas {

/// Operating point of the steady-state equations. All vectors use network
/// ordering; `regulation` has one entry per edge and is zero on passive edges.
struct StationaryPoint {
  VectorXd flow;        // per edge
  VectorXd pressure;    // squared pressure per node
  VectorXd regulation;  // per edge, zero on passive edges
  VectorXd injection;   // per node
  double residual_norm = 0.0;
  double objective = 0.0;
};

/// Max of the scaled conservation and Weymouth residuals at `pt` for the
/// given extraction vector.
double physics_residual(const GasNetwork& net, const StationaryPoint& pt, const VectorXd& extraction);

/// Largest scaled violation of the pressure, injection, regulation and
/// active-flow-direction limits (zero when all hold).
double limit_violation(const GasNetwork& net, const StationaryPoint& pt);

std::string serialize_point(const StationaryPoint& pt);
StationaryPoint parse_point(std::string_view json_text, const GasNetwork& net);
void save_point(const StationaryPoint& pt, const std::filesystem::path& path);
StationaryPoint load_point(const std::filesystem::path& path, const GasNetwork& net);

}  // namespace ccgas
