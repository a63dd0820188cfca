#pragma once

#include "ccgas/network.hpp"
#include "ccgas/state.hpp"

namespace ccgas {

/// Jacobians of W(φ, π, κ) = φ∘|φ| − diag(w)(Aᵀπ + κ). The flow and
/// regulation Jacobians are diagonal and stored as vectors.
struct WeymouthJacobians {
  VectorXd flow;        // 2|φ| (regularised)
  MatrixXd pressure;    // −diag(w)Aᵀ, E×N
  VectorXd regulation;  // −w
};

/// Affine flow model φ ≈ offset + pressure_sens·π + regulation_sens·κ.
struct FlowSensitivities {
  VectorXd offset;           // E
  MatrixXd pressure_sens;    // E×N
  MatrixXd regulation_sens;  // E×E, diagonal
};

/// Linearised network with the response constants used by the affine
/// policies. With net nodal injection change Δ (injection − extraction −
/// compressor consumption), pressures move by pressure_from_injection·Δ and
/// flows by flow_from_injection·Δ; regulation changes enter through
/// nodal_regulation_gain and flow_from_regulation.
struct LinearizedModel {
  FlowSensitivities sens;
  MatrixXd nodal_pressure_gain;      // A·pressure_sens, N×N (weighted Laplacian)
  MatrixXd nodal_regulation_gain;    // B + A·regulation_sens, N×E
  MatrixXd pressure_from_injection;  // reduced inverse of nodal_pressure_gain, N×N
  MatrixXd flow_from_injection;      // pressure_sens·pressure_from_injection, E×N
  MatrixXd flow_from_regulation;     // flow_from_injection·nodal_regulation_gain − regulation_sens, E×E
  MatrixXd pressure_from_regulation; // pressure_from_injection·nodal_regulation_gain, N×E
  Index reference = 0;
  StationaryPoint anchor;
};

/// Flow magnitude floor used at (near-)zero flow: max(|φ|, 1e−6·mean|φ|).
/// Throws DegenerateError when every flow is zero.
VectorXd regularized_flow_magnitude(const VectorXd& flow);

WeymouthJacobians weymouth_jacobians(const StationaryPoint& point, const GasNetwork& net);
FlowSensitivities sensitivities(const StationaryPoint& point, const GasNetwork& net);
LinearizedModel response_constants(const FlowSensitivities& sens, const GasNetwork& net,
                                   const StationaryPoint& anchor);
LinearizedModel linearize(const StationaryPoint& point, const GasNetwork& net);

/// Pressure response matrix pressure_from_injection·(α − I) − pressure_from_regulation·β, N×N.
MatrixXd pressure_response(const LinearizedModel& lin, const MatrixXd& alpha, const MatrixXd& beta);
/// Flow response matrix flow_from_injection·(α − I) − flow_from_regulation·β, E×N.
MatrixXd flow_response(const LinearizedModel& lin, const MatrixXd& alpha, const MatrixXd& beta);

struct StateResponse {
  VectorXd pressure;
  VectorXd flow;
};

/// States under extraction error ξ for nominal (π, φ) and recourse (α, β).
StateResponse respond(const LinearizedModel& lin, const VectorXd& pressure, const VectorXd& flow,
                      const MatrixXd& alpha, const MatrixXd& beta, const VectorXd& xi);

/// Structured-text dump of every matrix for cross-implementation diffing.
std::string serialize_linearization(const LinearizedModel& lin);

}  // namespace ccgas
