#include "ccgas/policy.hpp"

#include "ccgas/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>

namespace ccgas {

namespace {

const char* kModule = "policy-opt";

bool contains(const std::vector<Index>& v, Index x) { return std::find(v.begin(), v.end(), x) != v.end(); }

// v_j = scale · Σ_k F(j,k)·x[start + k]
std::vector<AffineExpr> factor_times(const MatrixXd& F, Index start, double scale) {
  std::vector<AffineExpr> v(static_cast<size_t>(F.rows()));
  for (Index j = 0; j < F.rows(); ++j)
    for (Index k = 0; k < F.cols(); ++k) v[static_cast<size_t>(j)].add(start + k, scale * F(j, k));
  return v;
}

VectorXd expand(const VectorXd& reduced, const std::vector<Index>& cols, Index n) {
  VectorXd out = VectorXd::Zero(n);
  for (size_t j = 0; j < cols.size(); ++j) out(cols[j]) = reduced(static_cast<Index>(j));
  return out;
}

}  // namespace

std::string_view to_string(PolicyMask m) {
  switch (m) {
    case PolicyMask::injections: return "injections";
    case PolicyMask::injections_compressors: return "injections+compressors";
    case PolicyMask::all_assets: return "all";
  }
  return "all";
}

PolicyMask policy_mask_from_string(std::string_view s) {
  if (s == "injections") return PolicyMask::injections;
  if (s == "injections+compressors" || s == "compressors") return PolicyMask::injections_compressors;
  if (s == "all" || s == "all-assets") return PolicyMask::all_assets;
  throw ParseError(kModule, "unknown policy mask '" + std::string(s) + "'");
}

PolicyStructure policy_structure(const GasNetwork& net, const LinearizedModel& lin,
                                 const std::vector<Index>& stochastic, PolicyMask mask) {
  PolicyStructure s;
  s.suppliers = net.suppliers();
  for (Index k : s.suppliers)
    if (k != lin.reference) s.recourse_suppliers.push_back(k);
  for (Index l : net.active_edges()) {
    const EdgeKind kind = net.edge(l).kind;
    if ((kind == EdgeKind::compressor && mask != PolicyMask::injections) ||
        (kind == EdgeKind::valve && mask == PolicyMask::all_assets))
      s.regulated_edges.push_back(l);
  }
  s.stochastic = stochastic;
  const Index N = net.num_nodes();
  const Index E = net.num_edges();
  s.pressure_random.assign(static_cast<size_t>(N), false);
  s.flow_random.assign(static_cast<size_t>(E), false);
  if (stochastic.empty()) return s;

  const MatrixXd& G = lin.pressure_from_regulation;
  std::vector<Index> cols = s.recourse_suppliers;
  cols.insert(cols.end(), stochastic.begin(), stochastic.end());
  for (Index n = 0; n < N; ++n) {
    bool r = false;
    for (Index m : cols) r = r || lin.pressure_from_injection(n, m) != 0.0;
    for (Index l : s.regulated_edges) r = r || G(n, l) != 0.0;
    s.pressure_random[static_cast<size_t>(n)] = r;
  }
  for (Index l = 0; l < E; ++l) {
    bool r = false;
    for (Index m : cols) r = r || lin.flow_from_injection(l, m) != 0.0;
    for (Index j : s.regulated_edges) r = r || lin.flow_from_regulation(l, j) != 0.0;
    s.flow_random[static_cast<size_t>(l)] = r;
  }
  return s;
}

Index count_chance_constraints(const GasNetwork& net, const PolicyStructure& s) {
  if (s.stochastic.empty()) return 0;
  Index n = 0;
  for (bool r : s.pressure_random) n += r ? 2 : 0;
  for (Index l : net.active_edges()) n += s.flow_random[static_cast<size_t>(l)] ? 1 : 0;
  n += 2 * static_cast<Index>(s.recourse_suppliers.size());
  n += 2 * static_cast<Index>(s.regulated_edges.size());
  return n;
}

PolicyProgram assemble(const GasNetwork& net, const LinearizedModel& lin, const UncertaintyModel& unc,
                       const PolicyOptions& options) {
  const Index N = net.num_nodes();
  const Index E = net.num_edges();
  if (lin.sens.pressure_sens.rows() != E || lin.sens.pressure_sens.cols() != N || unc.mean.size() != N ||
      unc.factor.rows() != N)
    throw DimensionError(kModule, "linearisation or uncertainty model does not match the network");
  for (Index k = 0; k < N; ++k)
    if (net.node(k).cost_quadratic < 0.0)
      throw ValidationError(kModule, "negative quadratic cost at node " + std::to_string(net.node(k).id));

  PolicyProgram P;
  P.structure = policy_structure(net, lin, unc.stochastic, options.mask);
  const PolicyStructure& st = P.structure;
  P.psi_pressure = options.psi_pressure.size() ? options.psi_pressure : VectorXd::Zero(N);
  P.psi_flow = options.psi_flow.size() ? options.psi_flow : VectorXd::Zero(E);
  if (P.psi_pressure.size() != N || P.psi_flow.size() != E)
    throw DimensionError(kModule, "variance penalty vectors do not match the network");
  if ((P.psi_pressure.array() < 0.0).any() || (P.psi_flow.array() < 0.0).any())
    throw ValidationError(kModule, "variance penalties must be non-negative");
  P.safety = unc.safety;
  const double z = unc.safety;

  const Index r = lin.reference;
  const auto& S = st.suppliers;
  const auto& R = st.recourse_suppliers;
  const auto& Eb = st.regulated_edges;
  const auto& K = st.stochastic;
  const auto& act = net.active_edges();
  const Index nK = static_cast<Index>(K.size());
  const MatrixXd& A = net.incidence();
  const MatrixXd& B = net.active_incidence();
  const VectorXd c1 = net.cost_linear();
  const VectorXd c2 = net.cost_quadratic();
  const VectorXd theta_fixed = net.injection_min();
  const VectorXd delta = unc.mean;
  const MatrixXd& g2 = lin.pressure_from_injection;
  const MatrixXd& G = lin.pressure_from_regulation;
  const MatrixXd& f2 = lin.flow_from_injection;
  const MatrixXd& f3 = lin.flow_from_regulation;
  MatrixXd FK(nK, nK);
  for (Index i = 0; i < nK; ++i)
    for (Index j = 0; j < nK; ++j) FK(i, j) = unc.factor(K[static_cast<size_t>(i)], K[static_cast<size_t>(j)]);

  ConicProgram& prog = P.program;
  const Index th = prog.add_variables("theta", static_cast<Index>(S.size()));
  const Index ka = prog.add_variables("kappa", static_cast<Index>(act.size()));
  const Index ph = prog.add_variables("flow", E);
  const Index pi = prog.add_variables("pressure", N);
  const Index al = prog.add_variables("alpha", static_cast<Index>(R.size()) * nK);
  const Index be = prog.add_variables("beta", static_cast<Index>(Eb.size()) * nK);

  std::vector<Index> theta_var(static_cast<size_t>(N), -1), kappa_var(static_cast<size_t>(E), -1);
  for (size_t i = 0; i < S.size(); ++i) theta_var[static_cast<size_t>(S[i])] = th + static_cast<Index>(i);
  for (size_t i = 0; i < act.size(); ++i) kappa_var[static_cast<size_t>(act[i])] = ka + static_cast<Index>(i);
  auto alpha_row = [&](size_t i) { return al + static_cast<Index>(i) * nK; };
  auto beta_row = [&](size_t i) { return be + static_cast<Index>(i) * nK; };

  // Response rows are materialised only where some cone reads them.
  std::vector<Index> yp(static_cast<size_t>(N), -1), yf(static_cast<size_t>(E), -1);
  Index ny = 0;
  for (Index n = 0; n < N; ++n)
    if (st.pressure_random[static_cast<size_t>(n)] && (P.psi_pressure(n) > 0.0 || z > 0.0))
      yp[static_cast<size_t>(n)] = ny++;
  const Index yp_start = prog.add_variables("response_pressure", ny * nK);
  for (Index n = 0; n < N; ++n)
    if (yp[static_cast<size_t>(n)] >= 0) yp[static_cast<size_t>(n)] = yp_start + yp[static_cast<size_t>(n)] * nK;
  ny = 0;
  for (Index l = 0; l < E; ++l)
    if (st.flow_random[static_cast<size_t>(l)] && (P.psi_flow(l) > 0.0 || (z > 0.0 && net.is_active(l))))
      yf[static_cast<size_t>(l)] = ny++;
  const Index yf_start = prog.add_variables("response_flow", ny * nK);
  for (Index l = 0; l < E; ++l)
    if (yf[static_cast<size_t>(l)] >= 0) yf[static_cast<size_t>(l)] = yf_start + yf[static_cast<size_t>(l)] * nK;

  std::vector<Index> sp(static_cast<size_t>(N), -1), sf(static_cast<size_t>(E), -1);
  Index nsp = 0, nsf = 0;
  for (Index n = 0; n < N; ++n)
    if (P.psi_pressure(n) > 0.0) sp[static_cast<size_t>(n)] = nsp++;
  for (Index l = 0; l < E; ++l)
    if (P.psi_flow(l) > 0.0) sf[static_cast<size_t>(l)] = nsf++;
  const Index sp_start = prog.add_variables("std_pressure", nsp);
  const Index sf_start = prog.add_variables("std_flow", nsf);

  std::vector<Index> cth(static_cast<size_t>(N), -1), cal(static_cast<size_t>(N), -1);
  Index ncth = 0, ncal = 0;
  for (Index n : S)
    if (c2(n) > 0.0) cth[static_cast<size_t>(n)] = ncth++;
  if (nK > 0)
    for (Index n : R)
      if (c2(n) > 0.0) cal[static_cast<size_t>(n)] = ncal++;
  const Index cth_start = prog.add_variables("cost_injection", ncth);
  const Index cal_start = prog.add_variables("cost_recourse", ncal);

  // Objective.
  for (Index n = 0; n < N; ++n) {
    const Index v = theta_var[static_cast<size_t>(n)];
    if (v >= 0)
      prog.add_objective(v, c1(n));
    else
      P.objective_constant += c1(n) * theta_fixed(n) + c2(n) * theta_fixed(n) * theta_fixed(n);
  }
  for (Index i = 0; i < ncth; ++i) prog.add_objective(cth_start + i, 1.0);
  for (Index i = 0; i < ncal; ++i) prog.add_objective(cal_start + i, 1.0);
  for (Index n = 0; n < N; ++n)
    if (sp[static_cast<size_t>(n)] >= 0) prog.add_objective(sp_start + sp[static_cast<size_t>(n)], P.psi_pressure(n));
  for (Index l = 0; l < E; ++l)
    if (sf[static_cast<size_t>(l)] >= 0) prog.add_objective(sf_start + sf[static_cast<size_t>(l)], P.psi_flow(l));

  // Nominal conservation Aφ − θ + Bκ + δ = 0.
  P.conservation.assign(static_cast<size_t>(N), -1);
  const bool has_controls = !S.empty() || !act.empty();
  for (Index k = 0; k < N; ++k) {
    if (k == r && !has_controls) continue;
    AffineExpr e;
    for (Index l = 0; l < E; ++l) e.add(ph + l, A(k, l));
    if (theta_var[static_cast<size_t>(k)] >= 0)
      e.add(theta_var[static_cast<size_t>(k)], -1.0);
    else
      e.add_constant(-theta_fixed(k));
    for (Index l : act) e.add(kappa_var[static_cast<size_t>(l)], B(k, l));
    e.add_constant(delta(k));
    P.conservation[static_cast<size_t>(k)] = prog.add_equality("conservation", k, e);
  }

  // Recourse balance 1 − (α − Bβ)ᵀ1 = 0 for every stochastic column.
  P.recourse.assign(static_cast<size_t>(N), -1);
  const VectorXd consumption = B.colwise().sum().transpose();
  if (nK > 0 && R.empty() && Eb.empty()) P.recourse_impossible = true;
  if (!P.recourse_impossible) {
    for (Index j = 0; j < nK; ++j) {
      AffineExpr e(1.0);
      for (size_t i = 0; i < R.size(); ++i) e.add(alpha_row(i) + j, -1.0);
      for (size_t i = 0; i < Eb.size(); ++i) e.add(beta_row(i) + j, consumption(Eb[i]));
      P.recourse[static_cast<size_t>(K[static_cast<size_t>(j)])] = prog.add_equality("recourse", K[static_cast<size_t>(j)], e);
    }
  }

  // Linearised Weymouth φ − γ1 − γ2π − γ3κ = 0 and the reference pin.
  P.weymouth.assign(static_cast<size_t>(E), -1);
  for (Index l = 0; l < E; ++l) {
    AffineExpr e;
    e.add(ph + l, 1.0);
    for (Index k = 0; k < N; ++k) e.add(pi + k, -lin.sens.pressure_sens(l, k));
    if (kappa_var[static_cast<size_t>(l)] >= 0)
      e.add(kappa_var[static_cast<size_t>(l)], -lin.sens.regulation_sens(l, l));
    e.add_constant(-lin.sens.offset(l));
    P.weymouth[static_cast<size_t>(l)] = prog.add_equality("weymouth", l, e);
  }
  P.reference = prog.add_equality("reference", r, AffineExpr(lin.anchor.pressure(r)).add(pi + r, -1.0));

  // Response definitions y = row of γ̆2(α − γ̂3β − I) or γ̀2(α − I) − γ̀3β.
  for (Index n = 0; n < N; ++n) {
    const Index y = yp[static_cast<size_t>(n)];
    if (y < 0) continue;
    for (Index j = 0; j < nK; ++j) {
      AffineExpr e;
      e.add(y + j, 1.0);
      for (size_t i = 0; i < R.size(); ++i) e.add(alpha_row(i) + j, -g2(n, R[i]));
      for (size_t i = 0; i < Eb.size(); ++i) e.add(beta_row(i) + j, G(n, Eb[i]));
      e.add_constant(g2(n, K[static_cast<size_t>(j)]));
      prog.add_equality("response_pressure", n, e);
    }
  }
  for (Index l = 0; l < E; ++l) {
    const Index y = yf[static_cast<size_t>(l)];
    if (y < 0) continue;
    for (Index j = 0; j < nK; ++j) {
      AffineExpr e;
      e.add(y + j, 1.0);
      for (size_t i = 0; i < R.size(); ++i) e.add(alpha_row(i) + j, -f2(l, R[i]));
      for (size_t i = 0; i < Eb.size(); ++i) e.add(beta_row(i) + j, f3(l, Eb[i]));
      e.add_constant(f2(l, K[static_cast<size_t>(j)]));
      prog.add_equality("response_flow", l, e);
    }
  }

  // Variance cones (only where penalised).
  P.variance_pressure.assign(static_cast<size_t>(N), -1);
  P.variance_flow.assign(static_cast<size_t>(E), -1);
  for (Index n = 0; n < N; ++n) {
    if (sp[static_cast<size_t>(n)] < 0) continue;
    const AffineExpr t = AffineExpr().add(sp_start + sp[static_cast<size_t>(n)], 1.0);
    const Index y = yp[static_cast<size_t>(n)];
    P.variance_pressure[static_cast<size_t>(n)] =
        y >= 0 ? prog.add_soc("variance_pressure", n, t, factor_times(FK, y, 1.0))
               : prog.add_nonneg("variance_pressure", n, t);
  }
  for (Index l = 0; l < E; ++l) {
    if (sf[static_cast<size_t>(l)] < 0) continue;
    const AffineExpr t = AffineExpr().add(sf_start + sf[static_cast<size_t>(l)], 1.0);
    const Index y = yf[static_cast<size_t>(l)];
    P.variance_flow[static_cast<size_t>(l)] =
        y >= 0 ? prog.add_soc("variance_flow", l, t, factor_times(FK, y, 1.0)) : prog.add_nonneg("variance_flow", l, t);
  }

  // Pressure and active-flow chance constraints.
  P.pressure_max.assign(static_cast<size_t>(N), -1);
  P.pressure_min.assign(static_cast<size_t>(N), -1);
  P.flow_min.assign(static_cast<size_t>(E), -1);
  for (Index n = 0; n < N; ++n) {
    const Node& nd = net.node(n);
    const Index y = yp[static_cast<size_t>(n)];
    const bool cone = y >= 0 && z > 0.0;
    const AffineExpr hi = AffineExpr(nd.pressure_max).add(pi + n, -1.0);
    const AffineExpr lo = AffineExpr(-nd.pressure_min).add(pi + n, 1.0);
    P.pressure_max[static_cast<size_t>(n)] =
        cone ? prog.add_soc("pressure_max", n, hi, factor_times(FK, y, z)) : prog.add_nonneg("pressure_max", n, hi);
    P.pressure_min[static_cast<size_t>(n)] =
        cone ? prog.add_soc("pressure_min", n, lo, factor_times(FK, y, z)) : prog.add_nonneg("pressure_min", n, lo);
  }
  for (Index l : act) {
    const Index y = yf[static_cast<size_t>(l)];
    const AffineExpr t = AffineExpr().add(ph + l, 1.0);
    P.flow_min[static_cast<size_t>(l)] =
        y >= 0 && z > 0.0 ? prog.add_soc("flow_min", l, t, factor_times(FK, y, z)) : prog.add_nonneg("flow_min", l, t);
  }

  // Rotated cost cones c2θ² ≤ c^θ and c2‖Fαᵀ‖² ≤ c^α.
  P.cost_injection.assign(static_cast<size_t>(N), -1);
  P.cost_recourse.assign(static_cast<size_t>(N), -1);
  for (Index n : S) {
    if (cth[static_cast<size_t>(n)] < 0) continue;
    P.cost_injection[static_cast<size_t>(n)] = prog.add_rotated(
        "cost_injection", n, AffineExpr().add(cth_start + cth[static_cast<size_t>(n)], 1.0), AffineExpr(1.0),
        {AffineExpr().add(theta_var[static_cast<size_t>(n)], std::sqrt(c2(n)))});
  }
  for (size_t i = 0; i < R.size(); ++i) {
    const Index n = R[i];
    if (cal[static_cast<size_t>(n)] < 0) continue;
    P.cost_recourse[static_cast<size_t>(n)] =
        prog.add_rotated("cost_recourse", n, AffineExpr().add(cal_start + cal[static_cast<size_t>(n)], 1.0),
                         AffineExpr(1.0), factor_times(FK, alpha_row(i), std::sqrt(c2(n))));
  }

  // Injection and regulation limits under recourse.
  P.injection_max.assign(static_cast<size_t>(N), -1);
  P.injection_min.assign(static_cast<size_t>(N), -1);
  for (Index n : S) {
    const Node& nd = net.node(n);
    const Index v = theta_var[static_cast<size_t>(n)];
    const AffineExpr hi = AffineExpr(nd.injection_max).add(v, -1.0);
    const AffineExpr lo = AffineExpr(-nd.injection_min).add(v, 1.0);
    const auto it = std::find(R.begin(), R.end(), n);
    const bool cone = it != R.end() && nK > 0 && z > 0.0;
    const Index row = cone ? alpha_row(static_cast<size_t>(it - R.begin())) : -1;
    P.injection_max[static_cast<size_t>(n)] =
        cone ? prog.add_soc("injection_max", n, hi, factor_times(FK, row, z)) : prog.add_nonneg("injection_max", n, hi);
    P.injection_min[static_cast<size_t>(n)] =
        cone ? prog.add_soc("injection_min", n, lo, factor_times(FK, row, z)) : prog.add_nonneg("injection_min", n, lo);
  }
  P.regulation_max.assign(static_cast<size_t>(E), -1);
  P.regulation_min.assign(static_cast<size_t>(E), -1);
  for (Index l : act) {
    const Edge& e = net.edge(l);
    const Index v = kappa_var[static_cast<size_t>(l)];
    const AffineExpr hi = AffineExpr(e.kappa_max).add(v, -1.0);
    const AffineExpr lo = AffineExpr(-e.kappa_min).add(v, 1.0);
    const auto it = std::find(Eb.begin(), Eb.end(), l);
    const bool cone = it != Eb.end() && nK > 0 && z > 0.0;
    const Index row = cone ? beta_row(static_cast<size_t>(it - Eb.begin())) : -1;
    P.regulation_max[static_cast<size_t>(l)] =
        cone ? prog.add_soc("regulation_max", l, hi, factor_times(FK, row, z)) : prog.add_nonneg("regulation_max", l, hi);
    P.regulation_min[static_cast<size_t>(l)] =
        cone ? prog.add_soc("regulation_min", l, lo, factor_times(FK, row, z)) : prog.add_nonneg("regulation_min", l, lo);
  }
  return P;
}

PolicySolution solve(const PolicyProgram& P, const GasNetwork& net, const LinearizedModel& lin,
                     const UncertaintyModel& unc, const SolverSettings& settings) {
  const Index N = net.num_nodes();
  const Index E = net.num_edges();
  const PolicyStructure& st = P.structure;
  const auto& K = st.stochastic;
  const Index nK = static_cast<Index>(K.size());
  const ConicProgram& prog = P.program;

  PolicySolution s;
  s.safety = P.safety;
  if (P.recourse_impossible) {
    s.status = SolveStatus::infeasible;
    s.message = "no supplier or regulated pipeline can provide recourse";
    return s;
  }
  const ConicSolution cs = prog.solve(settings);
  s.status = cs.status;
  s.inaccurate = cs.inaccurate;
  s.iterations = cs.iterations;
  s.relative_gap = cs.relative_gap;
  s.primal_residual = cs.primal_residual;
  s.dual_residual = cs.dual_residual;
  s.message = cs.message;
  s.objective = cs.primal_objective + P.objective_constant;
  if (cs.x.size() != prog.num_variables()) return s;

  auto x = [&](const std::string& name) {
    const auto rg = prog.variables(name);
    return VectorXd(cs.x.segment(rg.start, rg.size));
  };
  const VectorXd th = x("theta"), ka = x("kappa"), al = x("alpha"), be = x("beta");
  s.injection = net.injection_min();
  for (size_t i = 0; i < st.suppliers.size(); ++i) s.injection(st.suppliers[i]) = th(static_cast<Index>(i));
  s.regulation = VectorXd::Zero(E);
  for (size_t i = 0; i < net.active_edges().size(); ++i) s.regulation(net.active_edges()[i]) = ka(static_cast<Index>(i));
  s.flow = x("flow");
  s.pressure = x("pressure");
  s.alpha = MatrixXd::Zero(N, N);
  for (size_t i = 0; i < st.recourse_suppliers.size(); ++i)
    for (Index j = 0; j < nK; ++j) s.alpha(st.recourse_suppliers[i], K[static_cast<size_t>(j)]) = al(static_cast<Index>(i) * nK + j);
  // Columns of deterministic nodes never act; give them a canonical unit weight
  // so the recourse balance holds for every column.
  if (!st.recourse_suppliers.empty())
    for (Index k = 0; k < N; ++k)
      if (!contains(K, k)) s.alpha(st.recourse_suppliers.front(), k) = 1.0;
  s.beta = MatrixXd::Zero(E, N);
  for (size_t i = 0; i < st.regulated_edges.size(); ++i)
    for (Index j = 0; j < nK; ++j) s.beta(st.regulated_edges[i], K[static_cast<size_t>(j)]) = be(static_cast<Index>(i) * nK + j);

  const VectorXd c2 = net.cost_quadratic();
  const MatrixXd& F = unc.factor;
  s.cost_injection = c2.cwiseProduct(s.injection.cwiseAbs2());
  s.cost_recourse = VectorXd::Zero(N);
  for (Index n = 0; n < N; ++n) s.cost_recourse(n) = c2(n) * (F * s.alpha.row(n).transpose()).squaredNorm();
  const StateStddev sd = state_stddev(s.alpha, s.beta, lin, unc);
  s.std_pressure = sd.pressure;
  s.std_flow = sd.flow;
  {
    const VectorXd cth = x("cost_injection"), cal = x("cost_recourse");
    const VectorXd sp = x("std_pressure"), sf = x("std_flow");
    Index i = 0;
    for (Index n = 0; n < N; ++n)
      if (P.cost_injection[static_cast<size_t>(n)] >= 0) s.cost_injection(n) = cth(i++);
    i = 0;
    for (Index n = 0; n < N; ++n)
      if (P.cost_recourse[static_cast<size_t>(n)] >= 0) s.cost_recourse(n) = cal(i++);
    i = 0;
    for (Index n = 0; n < N; ++n)
      if (P.variance_pressure[static_cast<size_t>(n)] >= 0) s.std_pressure(n) = sp(i++);
    i = 0;
    for (Index l = 0; l < E; ++l)
      if (P.variance_flow[static_cast<size_t>(l)] >= 0) s.std_flow(l) = sf(i++);
  }

  // Duals.
  auto eq = [&](Index id) { return id >= 0 ? prog.equality_dual(cs, id) : 0.0; };
  s.lambda_c = VectorXd::Zero(N);
  s.lambda_r = VectorXd::Zero(N);
  s.lambda_w = VectorXd::Zero(E);
  for (Index k = 0; k < N; ++k) {
    s.lambda_c(k) = eq(P.conservation[static_cast<size_t>(k)]);
    s.lambda_r(k) = eq(P.recourse[static_cast<size_t>(k)]);
  }
  for (Index l = 0; l < E; ++l) s.lambda_w(l) = eq(P.weymouth[static_cast<size_t>(l)]);
  s.lambda_ref = eq(P.reference);

  // Cone dual (λ, u) with u expanded to the full node index set.
  auto cone = [&](Index id, double& lambda, auto row) {
    if (id < 0) return;
    const BlockInfo& b = prog.block(id);
    if (b.kind == BlockKind::nonneg) {
      lambda = prog.nonneg_dual(cs, id);
      return;
    }
    const auto [lam, u] = prog.soc_dual(cs, id);
    lambda = lam;
    row = expand(u, K, N).transpose();
  };
  s.lambda_pi = VectorXd::Zero(N);
  s.lambda_pi_max = VectorXd::Zero(N);
  s.lambda_pi_min = VectorXd::Zero(N);
  s.u_pi = s.u_pi_max = s.u_pi_min = MatrixXd::Zero(N, N);
  s.lambda_phi = VectorXd::Zero(E);
  s.lambda_phi_min = VectorXd::Zero(E);
  s.u_phi = s.u_phi_min = MatrixXd::Zero(E, N);
  for (Index n = 0; n < N; ++n) {
    cone(P.variance_pressure[static_cast<size_t>(n)], s.lambda_pi(n), s.u_pi.row(n));
    cone(P.pressure_max[static_cast<size_t>(n)], s.lambda_pi_max(n), s.u_pi_max.row(n));
    cone(P.pressure_min[static_cast<size_t>(n)], s.lambda_pi_min(n), s.u_pi_min.row(n));
  }
  for (Index l = 0; l < E; ++l) {
    cone(P.variance_flow[static_cast<size_t>(l)], s.lambda_phi(l), s.u_phi.row(l));
    cone(P.flow_min[static_cast<size_t>(l)], s.lambda_phi_min(l), s.u_phi_min.row(l));
  }
  s.lambda_theta_max = s.lambda_theta_min = VectorXd::Zero(N);
  s.u_theta_max = s.u_theta_min = MatrixXd::Zero(N, N);
  for (Index n = 0; n < N; ++n) {
    cone(P.injection_max[static_cast<size_t>(n)], s.lambda_theta_max(n), s.u_theta_max.row(n));
    cone(P.injection_min[static_cast<size_t>(n)], s.lambda_theta_min(n), s.u_theta_min.row(n));
  }
  s.lambda_kappa_max = s.lambda_kappa_min = VectorXd::Zero(E);
  s.u_kappa_max = s.u_kappa_min = MatrixXd::Zero(E, N);
  for (Index l = 0; l < E; ++l) {
    cone(P.regulation_max[static_cast<size_t>(l)], s.lambda_kappa_max(l), s.u_kappa_max.row(l));
    cone(P.regulation_min[static_cast<size_t>(l)], s.lambda_kappa_min(l), s.u_kappa_min.row(l));
  }

  s.mu_theta = s.lambda_theta = s.u_theta = VectorXd::Zero(N);
  s.mu_alpha = s.lambda_alpha = VectorXd::Zero(N);
  s.u_alpha = MatrixXd::Zero(N, N);
  s.has_cost_injection.assign(static_cast<size_t>(N), false);
  s.has_cost_recourse.assign(static_cast<size_t>(N), false);
  for (Index n = 0; n < N; ++n) {
    if (const Index id = P.cost_injection[static_cast<size_t>(n)]; id >= 0) {
      const auto d = prog.rotated_dual(cs, id);
      s.mu_theta(n) = d.p;
      s.lambda_theta(n) = 2.0 * d.q;
      s.u_theta(n) = d.u(0);
      s.has_cost_injection[static_cast<size_t>(n)] = true;
    }
    if (const Index id = P.cost_recourse[static_cast<size_t>(n)]; id >= 0) {
      const auto d = prog.rotated_dual(cs, id);
      s.mu_alpha(n) = d.p;
      s.lambda_alpha(n) = 2.0 * d.q;
      s.u_alpha.row(n) = expand(d.u, K, N).transpose();
      s.has_cost_recourse[static_cast<size_t>(n)] = true;
    }
  }
  return s;
}

UncertaintyModel budgeted_uncertainty(const GasNetwork& net, const LinearizedModel& lin, double epsilon,
                                      Distribution distribution, PolicyMask mask, double safety_override) {
  const UncertaintyModel base = build_uncertainty(net, epsilon, 1, distribution);
  const PolicyStructure st = policy_structure(net, lin, base.stochastic, mask);
  UncertaintyModel unc = with_constraint_count(base, count_chance_constraints(net, st));
  if (safety_override >= 0.0) unc = with_safety(unc, safety_override);
  return unc;
}

PolicySolution optimize_policies(const GasNetwork& net, const LinearizedModel& lin, const UncertaintyModel& unc,
                                 const PolicyOptions& options, const SolverSettings& settings) {
  return solve(assemble(net, lin, unc, options), net, lin, unc, settings);
}

double expected_cost(const VectorXd& injection, const MatrixXd& alpha, const MatrixXd& covariance,
                     const VectorXd& c1, const VectorXd& c2) {
  const Index N = injection.size();
  if (alpha.rows() != N || alpha.cols() != N || covariance.rows() != N || c1.size() != N || c2.size() != N)
    throw DimensionError(kModule, "expected_cost: dimension mismatch");
  return c1.dot(injection) + injection.dot(c2.cwiseProduct(injection)) +
         (alpha.transpose() * c2.asDiagonal() * alpha * covariance).trace();
}

double expected_cost(const PolicySolution& sol, const UncertaintyModel& unc, const VectorXd& c1, const VectorXd& c2) {
  return expected_cost(sol.injection, sol.alpha, unc.covariance, c1, c2);
}

StateStddev state_stddev(const MatrixXd& alpha, const MatrixXd& beta, const LinearizedModel& lin,
                         const UncertaintyModel& unc) {
  const MatrixXd& F = unc.factor;
  StateStddev sd;
  sd.pressure = (pressure_response(lin, alpha, beta) * F).rowwise().norm();
  sd.flow = (flow_response(lin, alpha, beta) * F).rowwise().norm();
  return sd;
}

StateStddev state_stddev(const PolicySolution& sol, const LinearizedModel& lin, const UncertaintyModel& unc) {
  return state_stddev(sol.alpha, sol.beta, lin, unc);
}

std::string serialize_policy(const PolicySolution& s) {
  using json = nlohmann::json;
  auto vec = [](const VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
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
  j["status"] = std::string(to_string(s.status));
  j["inaccurate"] = s.inaccurate;
  j["iterations"] = s.iterations;
  j["objective"] = s.objective;
  j["relative_gap"] = s.relative_gap;
  j["safety"] = s.safety;
  j["injection"] = vec(s.injection);
  j["regulation"] = vec(s.regulation);
  j["flow"] = vec(s.flow);
  j["pressure"] = vec(s.pressure);
  j["alpha"] = mat(s.alpha);
  j["beta"] = mat(s.beta);
  j["cost_injection"] = vec(s.cost_injection);
  j["cost_recourse"] = vec(s.cost_recourse);
  j["std_pressure"] = vec(s.std_pressure);
  j["std_flow"] = vec(s.std_flow);
  json d;
  d["conservation"] = vec(s.lambda_c);
  d["recourse"] = vec(s.lambda_r);
  d["weymouth"] = vec(s.lambda_w);
  d["reference"] = s.lambda_ref;
  d["variance_pressure"] = vec(s.lambda_pi);
  d["pressure_max"] = vec(s.lambda_pi_max);
  d["pressure_min"] = vec(s.lambda_pi_min);
  d["variance_flow"] = vec(s.lambda_phi);
  d["flow_min"] = vec(s.lambda_phi_min);
  d["injection_max"] = vec(s.lambda_theta_max);
  d["injection_min"] = vec(s.lambda_theta_min);
  d["regulation_max"] = vec(s.lambda_kappa_max);
  d["regulation_min"] = vec(s.lambda_kappa_min);
  d["cost_injection_mu"] = vec(s.mu_theta);
  d["cost_recourse_mu"] = vec(s.mu_alpha);
  j["duals"] = d;
  return j.dump(2);
}

}  // namespace ccgas
