#include "ccgas/linearization.hpp"

#include "ccgas/error.hpp"

#include <json.hpp>

#include <cassert>
#include <cmath>

namespace ccgas {

namespace {

const char* kModule = "linearization";

#ifndef NDEBUG
// Central-difference check of the closed-form Jacobians (debug builds only).
void check_against_differences(const WeymouthJacobians& J, const StationaryPoint& p,
                               const GasNetwork& net) {
  const VectorXd w = net.friction();
  const MatrixXd& A = net.incidence();
  auto W = [&](const VectorXd& f, const VectorXd& pi, const VectorXd& k) -> VectorXd {
    return f.cwiseProduct(f.cwiseAbs()) - w.cwiseProduct(A.transpose() * pi + k);
  };
  for (Index l = 0; l < net.num_edges(); ++l) {
    if (std::abs(p.flow(l)) < 1e-3 * std::max(1.0, p.flow.cwiseAbs().maxCoeff())) continue;
    const double h = 1e-6 * std::max(1.0, std::abs(p.flow(l)));
    VectorXd fp = p.flow, fm = p.flow;
    fp(l) += h;
    fm(l) -= h;
    const double fd = (W(fp, p.pressure, p.regulation)(l) - W(fm, p.pressure, p.regulation)(l)) / (2 * h);
    assert(std::abs(fd - J.flow(l)) <= 1e-5 * std::max(1.0, std::abs(fd)));
    (void)fd;
  }
}
#endif

}  // namespace

VectorXd regularized_flow_magnitude(const VectorXd& flow) {
  const VectorXd mag = flow.cwiseAbs();
  const double mean = mag.size() ? mag.mean() : 0.0;
  if (!(mean > 0.0)) {
    std::string edges;
    for (Index l = 0; l < flow.size(); ++l) edges += (edges.empty() ? "" : ",") + std::to_string(l);
    throw DegenerateError(kModule, "zero flow on every edge {" + edges + "}; cannot linearise");
  }
  return mag.cwiseMax(1e-6 * mean);
}

WeymouthJacobians weymouth_jacobians(const StationaryPoint& point, const GasNetwork& net) {
  if (point.flow.size() != net.num_edges() || point.pressure.size() != net.num_nodes() ||
      point.regulation.size() != net.num_edges())
    throw DimensionError(kModule, "stationary point does not match the network");
  WeymouthJacobians J;
  J.flow = 2.0 * regularized_flow_magnitude(point.flow);
  const VectorXd w = net.friction();
  J.pressure = -(w.asDiagonal() * net.incidence().transpose());
  J.regulation = -w;
#ifndef NDEBUG
  check_against_differences(J, point, net);
#endif
  return J;
}

FlowSensitivities sensitivities(const StationaryPoint& point, const GasNetwork& net) {
  const WeymouthJacobians J = weymouth_jacobians(point, net);
  const VectorXd inv = J.flow.cwiseInverse();
  FlowSensitivities s;
  s.pressure_sens = -(inv.asDiagonal() * J.pressure);
  s.regulation_sens = (-(inv.cwiseProduct(J.regulation))).asDiagonal();
  s.offset = point.flow - s.pressure_sens * point.pressure - s.regulation_sens * point.regulation;
  return s;
}

LinearizedModel response_constants(const FlowSensitivities& sens, const GasNetwork& net,
                                   const StationaryPoint& anchor) {
  const Index N = net.num_nodes();
  const Index E = net.num_edges();
  const Index r = net.reference();
  const MatrixXd& A = net.incidence();
  LinearizedModel lin;
  lin.sens = sens;
  lin.reference = r;
  lin.anchor = anchor;
  lin.nodal_pressure_gain = A * sens.pressure_sens;
  lin.nodal_regulation_gain = net.active_incidence() + A * sens.regulation_sens;

  // Edge conductances g = w/(2|φ|) sit on the diagonal of regulation_sens.
  const VectorXd g = sens.regulation_sens.diagonal();
  if (!(g.array() > 0.0).all() || !g.allFinite())
    throw DegenerateError(kModule, "edge conductances must be positive and finite");
  const VectorXd res = g.cwiseInverse();

  // Spanning tree rooted at the reference. Column k of T routes one unit from k
  // to the reference along the tree, so A·T = I − e_r·1ᵀ with T.col(r) = 0.
  std::vector<Index> parent_edge(static_cast<size_t>(N), -1);
  std::vector<bool> seen(static_cast<size_t>(N), false), in_tree(static_cast<size_t>(E), false);
  std::vector<Index> order{r};
  seen[static_cast<size_t>(r)] = true;
  for (size_t head = 0; head < order.size(); ++head) {
    const Index u = order[head];
    for (Index l = 0; l < E; ++l) {
      const Index a = net.sending(l), b = net.receiving(l);
      if (a != u && b != u) continue;
      const Index v = a == u ? b : a;
      if (seen[static_cast<size_t>(v)]) continue;
      seen[static_cast<size_t>(v)] = true;
      parent_edge[static_cast<size_t>(v)] = l;
      in_tree[static_cast<size_t>(l)] = true;
      order.push_back(v);
    }
  }
  if (static_cast<Index>(order.size()) != N) throw DegenerateError(kModule, "network is not connected");
  MatrixXd T = MatrixXd::Zero(E, N);
  for (size_t i = 1; i < order.size(); ++i) {
    const Index k = order[i];
    const Index l = parent_edge[static_cast<size_t>(k)];
    const Index up = net.sending(l) == k ? net.receiving(l) : net.sending(l);
    T.col(k) = T.col(up);
    T(l, k) = net.sending(l) == k ? 1.0 : -1.0;
  }
  // Fundamental cycles, one per chord; A·C = 0 exactly.
  std::vector<Index> chords;
  for (Index l = 0; l < E; ++l)
    if (!in_tree[static_cast<size_t>(l)]) chords.push_back(l);
  MatrixXd C = MatrixXd::Zero(E, static_cast<Index>(chords.size()));
  for (Index c = 0; c < C.cols(); ++c) {
    const Index l = chords[static_cast<size_t>(c)];
    C.col(c) = T.col(net.receiving(l)) - T.col(net.sending(l));
    C(l, c) = 1.0;
  }

  // Loop form: with resistances 1/g a zero-flow edge (huge g) stays well
  // conditioned, where the nodal form would cancel two O(g) terms.
  // Q = (I − G·Aᵀ·L⁺·A)·G = C·(Cᵀ·R·C)⁻¹·Cᵀ.
  MatrixXd Q = MatrixXd::Zero(E, E);
  if (C.cols() > 0) {
    const MatrixXd loop = C.transpose() * res.asDiagonal() * C;
    Eigen::LLT<MatrixXd> llt(loop);
    if (llt.info() != Eigen::Success) throw DegenerateError(kModule, "loop resistance matrix is singular");
    Q = C * llt.solve(C.transpose());
  }
  lin.flow_from_injection = T - Q * res.asDiagonal() * T;
  lin.pressure_from_injection = T.transpose() * res.asDiagonal() * lin.flow_from_injection;
  lin.pressure_from_injection = 0.5 * (lin.pressure_from_injection + lin.pressure_from_injection.transpose());
  lin.flow_from_regulation = lin.flow_from_injection * net.active_incidence() - Q;
  lin.pressure_from_regulation =
      lin.pressure_from_injection * net.active_incidence() + T.transpose() - T.transpose() * res.asDiagonal() * Q;
  return lin;
}

LinearizedModel linearize(const StationaryPoint& point, const GasNetwork& net) {
  return response_constants(sensitivities(point, net), net, point);
}

MatrixXd pressure_response(const LinearizedModel& lin, const MatrixXd& alpha, const MatrixXd& beta) {
  const Index N = lin.pressure_from_injection.rows();
  return lin.pressure_from_injection * (alpha - MatrixXd::Identity(N, N)) - lin.pressure_from_regulation * beta;
}

MatrixXd flow_response(const LinearizedModel& lin, const MatrixXd& alpha, const MatrixXd& beta) {
  const Index N = lin.pressure_from_injection.rows();
  return lin.flow_from_injection * (alpha - MatrixXd::Identity(N, N)) -
         lin.flow_from_regulation * beta;
}

StateResponse respond(const LinearizedModel& lin, const VectorXd& pressure, const VectorXd& flow,
                      const MatrixXd& alpha, const MatrixXd& beta, const VectorXd& xi) {
  const Index N = lin.pressure_from_injection.rows();
  const Index E = lin.flow_from_regulation.rows();
  if (pressure.size() != N || flow.size() != E || alpha.rows() != N || alpha.cols() != N ||
      beta.rows() != E || beta.cols() != N || xi.size() != N)
    throw DimensionError(kModule, "policy dimensions do not match the linearisation");
  // Evaluate as matrix-vector products to avoid forming the response matrices.
  const VectorXd inj = alpha * xi - lin.nodal_regulation_gain * (beta * xi) - xi;
  StateResponse out;
  out.pressure = pressure + lin.pressure_from_injection * inj;
  out.flow = flow + lin.flow_from_injection * (alpha * xi - xi) -
             lin.flow_from_regulation * (beta * xi);
  return out;
}

std::string serialize_linearization(const LinearizedModel& lin) {
  using json = nlohmann::json;
  auto mat = [](const MatrixXd& M) {
    json rows = json::array();
    for (Index i = 0; i < M.rows(); ++i) {
      json row = json::array();
      for (Index j = 0; j < M.cols(); ++j) row.push_back(M(i, j));
      rows.push_back(row);
    }
    return rows;
  };
  json j;
  j["reference"] = lin.reference;
  j["flow_offset"] = std::vector<double>(lin.sens.offset.data(), lin.sens.offset.data() + lin.sens.offset.size());
  j["flow_pressure_sens"] = mat(lin.sens.pressure_sens);
  j["flow_regulation_sens"] = mat(lin.sens.regulation_sens);
  j["nodal_pressure_gain"] = mat(lin.nodal_pressure_gain);
  j["nodal_regulation_gain"] = mat(lin.nodal_regulation_gain);
  j["pressure_from_injection"] = mat(lin.pressure_from_injection);
  j["flow_from_injection"] = mat(lin.flow_from_injection);
  j["flow_from_regulation"] = mat(lin.flow_from_regulation);
  j["pressure_from_regulation"] = mat(lin.pressure_from_regulation);
  return j.dump(2);
}

}  // namespace ccgas
