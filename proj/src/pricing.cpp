#include "ccgas/pricing.hpp"

#include "ccgas/error.hpp"

#include <fmt/format.h>
#include <json.hpp>

#include <algorithm>
#include <cmath>

namespace ccgas {

namespace {

const char* kModule = "pricing";

double sum_total(const std::vector<RevenueSplit>& v) {
  double s = 0.0;
  for (const RevenueSplit& r : v) s += r.total();
  return s;
}

void require_duals(const PolicySolution& s, Index N, Index E) {
  if (!s.optimal()) throw ValidationError(kModule, "revenues need an optimal policy solution");
  auto bad_v = [](const VectorXd& v, Index n) { return v.size() != n; };
  auto bad_m = [](const MatrixXd& m, Index r, Index c) { return m.rows() != r || m.cols() != c; };
  if (bad_v(s.lambda_c, N) || bad_v(s.lambda_r, N) || bad_v(s.lambda_w, E) || bad_v(s.lambda_pi, N) ||
      bad_v(s.lambda_pi_max, N) || bad_v(s.lambda_pi_min, N) || bad_v(s.lambda_phi, E) ||
      bad_v(s.lambda_phi_min, E) || bad_m(s.u_pi, N, N) || bad_m(s.u_pi_max, N, N) || bad_m(s.u_pi_min, N, N) ||
      bad_m(s.u_phi, E, N) || bad_m(s.u_phi_min, E, N) || bad_m(s.u_theta_max, N, N) ||
      bad_m(s.u_theta_min, N, N) || bad_m(s.u_kappa_max, E, N) || bad_m(s.u_kappa_min, E, N) ||
      bad_m(s.u_alpha, N, N) || bad_v(s.mu_alpha, N) || bad_v(s.lambda_alpha, N) || bad_v(s.mu_theta, N) ||
      bad_v(s.u_theta, N) || bad_m(s.alpha, N, N) || bad_m(s.beta, E, N))
    throw ValidationError(kModule, "policy solution is missing dual variables");
}

// Cone multipliers acting on the random state responses, split into the
// chance-constraint part (scaled by z) and the variance part.
struct StateMultipliers {
  MatrixXd limit_pressure, limit_flow;
  MatrixXd var_pressure, var_flow;
};

StateMultipliers state_multipliers(const PolicySolution& s) {
  const double z = s.safety;
  return {z * (s.u_pi_max + s.u_pi_min), z * s.u_phi_min, s.u_pi, s.u_phi};
}

}  // namespace

double RevenueReport::total_supplier() const { return sum_total(supplier); }
double RevenueReport::total_active() const { return sum_total(active); }
double RevenueReport::total_consumer() const { return sum_total(consumer); }

double RevenueReport::scale() const {
  double s = 1.0;
  for (const auto* v : {&supplier, &active, &consumer})
    for (const RevenueSplit& r : *v)
      s += std::abs(r.nominal) + std::abs(r.recourse) + std::abs(r.limits) + std::abs(r.variance);
  return s;
}

RevenueReport revenues(const PolicySolution& s, const LinearizedModel& lin, const GasNetwork& net,
                       const UncertaintyModel& unc) {
  const Index N = net.num_nodes();
  const Index E = net.num_edges();
  require_duals(s, N, E);
  const MatrixXd& F = unc.factor;
  const MatrixXd& g2 = lin.pressure_from_injection;
  const MatrixXd& f2 = lin.flow_from_injection;
  const MatrixXd& f3 = lin.flow_from_regulation;
  const MatrixXd& G = lin.pressure_from_regulation;
  const MatrixXd& A = net.incidence();
  const MatrixXd& B = net.active_incidence();
  const StateMultipliers m = state_multipliers(s);

  // Multipliers pulled back to injection and regulation coordinates.
  const MatrixXd inj_limit = g2.transpose() * m.limit_pressure + f2.transpose() * m.limit_flow;
  const MatrixXd inj_var = g2.transpose() * m.var_pressure + f2.transpose() * m.var_flow;
  const MatrixXd reg_limit = G.transpose() * m.limit_pressure + f3.transpose() * m.limit_flow;
  const MatrixXd reg_var = G.transpose() * m.var_pressure + f3.transpose() * m.var_flow;
  const MatrixXd alphaF = s.alpha * F;
  const MatrixXd betaF = s.beta * F;

  RevenueReport rep;
  rep.supplier_nodes = net.suppliers();
  for (Index n : rep.supplier_nodes) {
    RevenueSplit r;
    r.nominal = s.lambda_c(n) * s.injection(n);
    r.recourse = s.alpha.row(n).dot(s.lambda_r);
    r.limits = inj_limit.row(n).dot(alphaF.row(n));
    r.variance = inj_var.row(n).dot(alphaF.row(n));
    rep.supplier.push_back(r);
  }
  // Fixed injections at non-supplier nodes are paid at the nodal price too.
  for (Index n = 0; n < N; ++n)
    if (!net.is_supplier(n) && s.injection(n) != 0.0) {
      rep.supplier_nodes.push_back(n);
      rep.supplier.push_back({s.lambda_c(n) * s.injection(n), 0.0, 0.0, 0.0});
    }

  rep.active_edges = net.active_edges();
  const VectorXd consumption = B.colwise().sum().transpose();
  for (Index l : rep.active_edges) {
    RevenueSplit r;
    r.nominal = (lin.sens.regulation_sens(l, l) * s.lambda_w(l) - s.lambda_c.dot(B.col(l))) * s.regulation(l);
    r.recourse = -consumption(l) * s.beta.row(l).dot(s.lambda_r);
    r.limits = -reg_limit.row(l).dot(betaF.row(l));
    r.variance = -reg_var.row(l).dot(betaF.row(l));
    rep.active.push_back(r);
  }

  const VectorXd delta = unc.mean;
  for (Index n = 0; n < N; ++n) {
    RevenueSplit r;
    r.nominal = s.lambda_c(n) * delta(n);
    r.recourse = s.lambda_r(n);
    r.limits = inj_limit.row(n).dot(F.col(n));
    r.variance = inj_var.row(n).dot(F.col(n));
    rep.consumer.push_back(r);
  }

  const Index ref = lin.reference;
  rep.flow_rent = (s.lambda_phi_min - s.lambda_w - A.transpose() * s.lambda_c).dot(s.flow);
  VectorXd pressure_price = lin.sens.pressure_sens.transpose() * s.lambda_w + s.lambda_pi_min - s.lambda_pi_max;
  pressure_price(ref) += s.lambda_ref;
  rep.pressure_rent = pressure_price.dot(s.pressure) + s.lambda_pi_max.dot(net.pressure_max()) -
                      s.lambda_pi_min.dot(net.pressure_min());
  rep.reference_rent = -s.lambda_ref * s.pressure(ref);
  rep.variance_rent = s.lambda_phi.dot(s.std_flow) + s.lambda_pi.dot(s.std_pressure);
  rep.linearization_surplus = s.lambda_w.dot(lin.sens.offset);
  return rep;
}

AdequacyCheck check_revenue_adequacy(const RevenueReport& rep, const LinearizedModel& lin, const GasNetwork& net,
                                     double tol) {
  AdequacyCheck c;
  c.gap = rep.adequacy_gap();
  c.identity_residual = rep.identity_residual();
  c.holds = c.gap >= -tol * rep.scale();
  const double fscale = std::max(1.0, lin.anchor.flow.cwiseAbs().maxCoeff());
  c.offset_zero = lin.sens.offset.size() == 0 || lin.sens.offset.cwiseAbs().maxCoeff() <= 1e-12 * fscale;
  c.pressure_floor_zero = (net.pressure_min().array() == 0.0).all();
  c.conditions_met = c.offset_zero && c.pressure_floor_zero;
  return c;
}

CostRecovery check_cost_recovery(const RevenueReport& rep, const PolicySolution& sol, const GasNetwork& net,
                                 double tol) {
  CostRecovery cr;
  const VectorXd c1 = net.cost_linear();
  cr.all_nonnegative = true;
  for (size_t i = 0; i < rep.supplier_nodes.size(); ++i) {
    const Index n = rep.supplier_nodes[i];
    AgentProfit a;
    a.supplier = true;
    a.index = n;
    a.revenue = rep.supplier[i].total();
    a.cost = c1(n) * sol.injection(n) + sol.cost_injection(n) + sol.cost_recourse(n);
    a.profit = a.revenue - a.cost;
    a.nonnegative = a.profit >= -tol;
    cr.all_nonnegative = cr.all_nonnegative && a.nonnegative;
    cr.agents.push_back(a);
  }
  for (size_t i = 0; i < rep.active_edges.size(); ++i) {
    AgentProfit a;
    a.supplier = false;
    a.index = rep.active_edges[i];
    a.revenue = a.profit = rep.active[i].total();
    a.nonnegative = a.profit >= -tol;
    cr.all_nonnegative = cr.all_nonnegative && a.nonnegative;
    cr.agents.push_back(a);
  }
  for (Index n : net.suppliers())
    if (net.node(n).injection_min != 0.0)
      cr.violated_conditions.push_back(fmt::format("injection_min > 0 at node {}", net.node(n).id));
  for (Index l : net.compressors())
    if (net.edge(l).kappa_min != 0.0)
      cr.violated_conditions.push_back(
          fmt::format("kappa_min != 0 on compressor {}-{}", net.edge(l).from, net.edge(l).to));
  for (Index l : net.valves())
    if (net.edge(l).kappa_max != 0.0)
      cr.violated_conditions.push_back(fmt::format("kappa_max != 0 on valve {}-{}", net.edge(l).from, net.edge(l).to));
  return cr;
}

double StationarityReport::max() const {
  double m = 0.0;
  for (const auto& b : blocks) m = std::max(m, b.second);
  return m;
}

double StationarityReport::get(const std::string& name) const {
  for (const auto& b : blocks)
    if (b.first == name) return b.second;
  throw ValidationError(kModule, "unknown stationarity block '" + name + "'");
}

StationarityReport check_stationarity(const PolicySolution& s, const LinearizedModel& lin, const GasNetwork& net,
                                      const UncertaintyModel& unc, const PolicyOptions& options) {
  const Index N = net.num_nodes();
  const Index E = net.num_edges();
  require_duals(s, N, E);
  const PolicyStructure st = policy_structure(net, lin, unc.stochastic, options.mask);
  const MatrixXd& F = unc.factor;
  const MatrixXd& A = net.incidence();
  const MatrixXd& B = net.active_incidence();
  const MatrixXd& g2 = lin.pressure_from_injection;
  const MatrixXd& f2 = lin.flow_from_injection;
  const MatrixXd& f3 = lin.flow_from_regulation;
  const MatrixXd& G = lin.pressure_from_regulation;
  const VectorXd c1 = net.cost_linear();
  const VectorXd c2 = net.cost_quadratic();
  const double z = s.safety;
  const StateMultipliers m = state_multipliers(s);
  const MatrixXd Upi = m.limit_pressure + m.var_pressure;
  const MatrixXd Uphi = m.limit_flow + m.var_flow;

  StationarityReport rep;
  double r = 0.0;
  for (Index n : st.suppliers) {
    r = std::max(r, std::abs(c1(n) - s.lambda_c(n) + s.lambda_theta_max(n) - s.lambda_theta_min(n) -
                             s.u_theta(n) * std::sqrt(c2(n))));
  }
  rep.blocks.emplace_back("injection", r);

  r = 0.0;
  for (Index l : net.active_edges())
    r = std::max(r, std::abs(s.lambda_c.dot(B.col(l)) - s.lambda_w(l) * lin.sens.regulation_sens(l, l) +
                             s.lambda_kappa_max(l) - s.lambda_kappa_min(l)));
  rep.blocks.emplace_back("regulation", r);

  VectorXd rp = -lin.sens.pressure_sens.transpose() * s.lambda_w + s.lambda_pi_max - s.lambda_pi_min;
  rp(lin.reference) -= s.lambda_ref;
  rep.blocks.emplace_back("pressure", rp.size() ? rp.cwiseAbs().maxCoeff() : 0.0);

  const VectorXd rf = A.transpose() * s.lambda_c + s.lambda_w - s.lambda_phi_min;
  rep.blocks.emplace_back("flow", rf.size() ? rf.cwiseAbs().maxCoeff() : 0.0);

  r = 0.0;
  const VectorXd psi_p = options.psi_pressure.size() ? options.psi_pressure : VectorXd::Zero(N);
  const VectorXd psi_f = options.psi_flow.size() ? options.psi_flow : VectorXd::Zero(E);
  for (Index n = 0; n < N; ++n)
    if (psi_p(n) > 0.0) r = std::max(r, std::abs(psi_p(n) - s.lambda_pi(n)));
  for (Index l = 0; l < E; ++l)
    if (psi_f(l) > 0.0) r = std::max(r, std::abs(psi_f(l) - s.lambda_phi(l)));
  rep.blocks.emplace_back("std", r);

  r = 0.0;
  for (Index n = 0; n < N; ++n) {
    if (s.has_cost_injection[static_cast<size_t>(n)]) r = std::max(r, std::abs(1.0 - s.mu_theta(n)));
    if (s.has_cost_recourse[static_cast<size_t>(n)]) r = std::max(r, std::abs(1.0 - s.mu_alpha(n)));
  }
  rep.blocks.emplace_back("cost", r);

  // Recourse coordinates: only rows that are decisions and stochastic columns.
  const MatrixXd ralpha = -VectorXd::Ones(N) * s.lambda_r.transpose() -
                          (g2.transpose() * Upi + f2.transpose() * Uphi) * F -
                          z * (s.u_theta_max + s.u_theta_min) * F - c2.cwiseSqrt().asDiagonal() * s.u_alpha * F;
  r = 0.0;
  for (Index n : st.recourse_suppliers)
    for (Index k : st.stochastic) r = std::max(r, std::abs(ralpha(n, k)));
  rep.blocks.emplace_back("alpha", r);

  const VectorXd consumption = B.colwise().sum().transpose();
  const MatrixXd rbeta = consumption * s.lambda_r.transpose() + (G.transpose() * Upi + f3.transpose() * Uphi) * F -
                         z * (s.u_kappa_max + s.u_kappa_min) * F;
  r = 0.0;
  for (Index l : st.regulated_edges)
    for (Index k : st.stochastic) r = std::max(r, std::abs(rbeta(l, k)));
  rep.blocks.emplace_back("beta", r);

  // Dual feasibility.
  r = 0.0;
  auto soc = [&r](double lambda, const auto& u) { r = std::max(r, u.norm() - lambda); };
  for (Index n = 0; n < N; ++n) {
    soc(s.lambda_pi(n), s.u_pi.row(n));
    soc(s.lambda_pi_max(n), s.u_pi_max.row(n));
    soc(s.lambda_pi_min(n), s.u_pi_min.row(n));
    soc(s.lambda_theta_max(n), s.u_theta_max.row(n));
    soc(s.lambda_theta_min(n), s.u_theta_min.row(n));
    if (s.has_cost_injection[static_cast<size_t>(n)])
      r = std::max(r, s.u_theta(n) * s.u_theta(n) - 2.0 * s.mu_theta(n) * s.lambda_theta(n));
    if (s.has_cost_recourse[static_cast<size_t>(n)])
      r = std::max(r, s.u_alpha.row(n).squaredNorm() - 2.0 * s.mu_alpha(n) * s.lambda_alpha(n));
  }
  for (Index l = 0; l < E; ++l) {
    soc(s.lambda_phi(l), s.u_phi.row(l));
    soc(s.lambda_phi_min(l), s.u_phi_min.row(l));
    soc(s.lambda_kappa_max(l), s.u_kappa_max.row(l));
    soc(s.lambda_kappa_min(l), s.u_kappa_min.row(l));
  }
  rep.blocks.emplace_back("dual_feasibility", std::max(r, 0.0));

  // Complementary slackness λ·t + uᵀv over the chance and variance cones.
  const MatrixXd Fpi = pressure_response(lin, s.alpha, s.beta) * F;
  const MatrixXd Fphi = flow_response(lin, s.alpha, s.beta) * F;
  const MatrixXd Falpha = s.alpha * F;
  const MatrixXd Fbeta = s.beta * F;
  r = 0.0;
  auto comp = [&r](double lambda, double t, const auto& u, const auto& v) {
    r = std::max(r, std::abs(lambda * t + u.dot(v)));
  };
  const VectorXd pmax = net.pressure_max(), pmin = net.pressure_min();
  const VectorXd tmax = net.injection_max(), tmin = net.injection_min();
  const VectorXd kmax = net.kappa_max(), kmin = net.kappa_min();
  for (Index n = 0; n < N; ++n) {
    comp(s.lambda_pi_max(n), pmax(n) - s.pressure(n), s.u_pi_max.row(n), z * Fpi.row(n));
    comp(s.lambda_pi_min(n), s.pressure(n) - pmin(n), s.u_pi_min.row(n), z * Fpi.row(n));
    if (psi_p(n) > 0.0) comp(s.lambda_pi(n), s.std_pressure(n), s.u_pi.row(n), Fpi.row(n));
  }
  for (Index n : st.suppliers) {
    comp(s.lambda_theta_max(n), tmax(n) - s.injection(n), s.u_theta_max.row(n), z * Falpha.row(n));
    comp(s.lambda_theta_min(n), s.injection(n) - tmin(n), s.u_theta_min.row(n), z * Falpha.row(n));
  }
  for (Index l = 0; l < E; ++l) {
    if (psi_f(l) > 0.0) comp(s.lambda_phi(l), s.std_flow(l), s.u_phi.row(l), Fphi.row(l));
    if (!net.is_active(l)) continue;
    comp(s.lambda_phi_min(l), s.flow(l), s.u_phi_min.row(l), z * Fphi.row(l));
    comp(s.lambda_kappa_max(l), kmax(l) - s.regulation(l), s.u_kappa_max.row(l), z * Fbeta.row(l));
    comp(s.lambda_kappa_min(l), s.regulation(l) - kmin(l), s.u_kappa_min.row(l), z * Fbeta.row(l));
  }
  rep.blocks.emplace_back("complementarity", r);
  return rep;
}

std::string revenue_csv(const RevenueReport& rep, const GasNetwork& net) {
  std::string out = "agent,id,stream,value\n";
  auto row = [&out](std::string_view agent, const std::string& id, std::string_view stream, double v) {
    out += fmt::format("{},{},{},{:.6f}\n", agent, id, stream, v);
  };
  auto split = [&row](std::string_view agent, const std::string& id, const RevenueSplit& r) {
    row(agent, id, "nominal", r.nominal);
    row(agent, id, "recourse", r.recourse);
    row(agent, id, "limits", r.limits);
    row(agent, id, "variance", r.variance);
  };
  for (size_t i = 0; i < rep.supplier.size(); ++i)
    split("supplier", std::to_string(net.node(rep.supplier_nodes[i]).id), rep.supplier[i]);
  for (size_t i = 0; i < rep.active.size(); ++i) {
    const Edge& e = net.edge(rep.active_edges[i]);
    split(e.kind == EdgeKind::compressor ? "compressor" : "valve", fmt::format("{}-{}", e.from, e.to), rep.active[i]);
  }
  for (size_t i = 0; i < rep.consumer.size(); ++i)
    split("consumer", std::to_string(net.node(static_cast<Index>(i)).id), rep.consumer[i]);
  row("operator", "", "flow_rent", rep.flow_rent);
  row("operator", "", "pressure_rent", rep.pressure_rent);
  row("operator", "", "variance_rent", rep.variance_rent);
  row("operator", "", "reference_rent", rep.reference_rent);
  row("operator", "", "linearization_surplus", rep.linearization_surplus);
  return out;
}

std::string serialize_revenue(const RevenueReport& rep, const GasNetwork& net) {
  using json = nlohmann::json;
  auto split = [](const RevenueSplit& r) {
    return json{{"nominal", r.nominal}, {"recourse", r.recourse}, {"limits", r.limits},
                {"variance", r.variance}, {"total", r.total()}};
  };
  json j;
  json sup = json::array(), act = json::array(), con = json::array();
  for (size_t i = 0; i < rep.supplier.size(); ++i) {
    json e = split(rep.supplier[i]);
    e["node"] = net.node(rep.supplier_nodes[i]).id;
    sup.push_back(e);
  }
  for (size_t i = 0; i < rep.active.size(); ++i) {
    json e = split(rep.active[i]);
    e["from"] = net.edge(rep.active_edges[i]).from;
    e["to"] = net.edge(rep.active_edges[i]).to;
    act.push_back(e);
  }
  for (size_t i = 0; i < rep.consumer.size(); ++i) {
    json e = split(rep.consumer[i]);
    e["node"] = net.node(static_cast<Index>(i)).id;
    con.push_back(e);
  }
  j["suppliers"] = sup;
  j["active_pipelines"] = act;
  j["consumers"] = con;
  j["operator"] = {{"flow_rent", rep.flow_rent},
                   {"pressure_rent", rep.pressure_rent},
                   {"variance_rent", rep.variance_rent},
                   {"reference_rent", rep.reference_rent}};
  j["linearization_surplus"] = rep.linearization_surplus;
  j["adequacy_gap"] = rep.adequacy_gap();
  j["identity_residual"] = rep.identity_residual();
  return j.dump(2);
}

}  // namespace ccgas
