#include "ccgas/steady_state.hpp"

#include "ccgas/conic.hpp"
#include "ccgas/error.hpp"
#include "ccgas/linearization.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace ccgas {

namespace {

const char* kModule = "steady-state";

double inf_norm(const VectorXd& v) { return v.size() ? v.lpNorm<Eigen::Infinity>() : 0.0; }

MatrixXd drop_row(const MatrixXd& M, Index r) {
  MatrixXd out(M.rows() - 1, M.cols());
  for (Index i = 0, ii = 0; i < M.rows(); ++i)
    if (i != r) out.row(ii++) = M.row(i);
  return out;
}

VectorXd drop_entry(const VectorXd& v, Index r) {
  VectorXd out(v.size() - 1);
  for (Index i = 0, ii = 0; i < v.size(); ++i)
    if (i != r) out(ii++) = v(i);
  return out;
}

// Scaled residual of the steady-state equations for (φ, π).
double equation_residual(const GasNetwork& net, const VectorXd& flow, const VectorXd& pressure,
                         const VectorXd& regulation, const VectorXd& net_injection) {
  const MatrixXd& A = net.incidence();
  const VectorXd w = net.friction();
  const VectorXd cons = A * flow - net_injection;
  const VectorXd drop = w.cwiseProduct(A.transpose() * pressure);
  const VectorXd weym = flow.cwiseProduct(flow.cwiseAbs()) - drop - w.cwiseProduct(regulation);
  const double flow_scale = std::max({1.0, inf_norm(flow), inf_norm(net_injection)});
  const double drop_scale = std::max({1.0, inf_norm(flow.cwiseAbs2()), inf_norm(drop)});
  return std::max(inf_norm(cons) / flow_scale, inf_norm(weym) / drop_scale);
}

}  // namespace

FlowSolution simulate_flow(const GasNetwork& net, const VectorXd& injection, const VectorXd& regulation,
                           double reference_pressure) {
  return simulate_flow(net, injection, regulation, reference_pressure, net.extraction_mean());
}

FlowSolution simulate_flow(const GasNetwork& net, const VectorXd& injection, const VectorXd& regulation,
                           double reference_pressure, const VectorXd& extraction) {
  const Index N = net.num_nodes();
  const Index E = net.num_edges();
  if (injection.size() != N || extraction.size() != N || regulation.size() != E)
    throw DimensionError(kModule, "simulate_flow: input sizes do not match the network");
  for (Index l = 0; l < E; ++l)
    if (!net.is_active(l) && regulation(l) != 0.0)
      throw ValidationError(kModule, "simulate_flow: nonzero regulation on passive edge " + std::to_string(l));

  const MatrixXd& A = net.incidence();
  const VectorXd w = net.friction();
  const Index r = net.reference();
  const VectorXd d = injection - net.active_incidence() * regulation - extraction;
  const double scale = std::max({1.0, inf_norm(injection), inf_norm(extraction)});
  if (std::abs(d.sum()) > 1e-9 * scale * static_cast<double>(N))
    throw ValidationError(kModule, "simulate_flow: global mass balance violated (imbalance " +
                                       std::to_string(d.sum()) + ")");

  const MatrixXd Ar = drop_row(A, r);
  const VectorXd dr = drop_entry(d, r);

  // Least-norm flow satisfying conservation as the starting point.
  const Eigen::LLT<MatrixXd> lap(Ar * Ar.transpose());
  VectorXd phi = Ar.transpose() * lap.solve(dr);
  auto gradient = [&](const VectorXd& f) -> VectorXd {
    return f.cwiseProduct(f.cwiseAbs()).cwiseQuotient(w) - regulation;
  };
  VectorXd nu = lap.solve(Ar * gradient(phi));

  auto pressures = [&](const VectorXd& v) {
    VectorXd pi(N);
    for (Index i = 0, ii = 0; i < N; ++i) pi(i) = (i == r ? 0.0 : v(ii++)) + reference_pressure;
    return pi;
  };
  // Stationarity of the potential: φ|φ|/w − κ = Aᵀπ, i.e. gradient − Ar_ᵀν = 0.
  auto kkt_residual = [&](const VectorXd& f, const VectorXd& v) {
    VectorXd res(E + N - 1);
    res.head(E) = gradient(f) - Ar.transpose() * v;
    res.tail(N - 1) = Ar * f - dr;
    return res;
  };

  const double flow_floor_abs = 1e-12 * std::max(1.0, inf_norm(d));
  FlowSolution out;
  VectorXd res = kkt_residual(phi, nu);
  double best = std::numeric_limits<double>::infinity();
  int it = 0;
  for (; it < 100; ++it) {
    const double scaled = equation_residual(net, phi, pressures(nu), regulation, d);
    best = std::min(best, scaled);
    if (scaled <= 1e-13) break;

    const VectorXd mag = phi.cwiseAbs();
    const double mean = mag.mean();
    const VectorXd h = (2.0 * mag.cwiseMax(std::max(1e-6 * mean, flow_floor_abs))).cwiseQuotient(w);
    const VectorXd hinv = h.cwiseInverse();
    const VectorXd rd = res.head(E);
    const VectorXd rp = res.tail(N - 1);
    const MatrixXd S = Ar * hinv.asDiagonal() * Ar.transpose();
    const Eigen::LLT<MatrixXd> schur(S);
    if (schur.info() != Eigen::Success) break;
    const VectorXd dnu = schur.solve(-rp + Ar * hinv.cwiseProduct(rd));
    const VectorXd dphi = hinv.cwiseProduct(-rd + Ar.transpose() * dnu);

    const double r0 = res.norm();
    double t = 1.0;
    VectorXd trial_res;
    for (; t > 1e-12; t *= 0.5) {
      trial_res = kkt_residual(phi + t * dphi, nu + t * dnu);
      if (trial_res.norm() <= (1.0 - 0.01 * t) * r0) break;
    }
    if (t <= 1e-12) break;
    phi += t * dphi;
    nu += t * dnu;
    res = trial_res;
  }
  out.flow = phi;
  out.pressure = pressures(nu);
  out.iterations = it;
  out.residual = equation_residual(net, phi, out.pressure, regulation, d);
  if (!(out.residual <= 1e-8)) {
    std::string zero;
    const double tiny = 1e-9 * std::max(1.0, inf_norm(phi));
    for (Index l = 0; l < E; ++l)
      if (std::abs(phi(l)) <= tiny) zero += (zero.empty() ? "" : ",") + std::to_string(l);
    throw ConvergenceError(kModule, "Newton solve did not converge (residual " +
                                        std::to_string(out.residual) + "); zero-flow edges {" + zero + "}");
  }
  return out;
}

namespace {

struct Controls {
  VectorXd theta;   // per node
  VectorXd kappa;   // per edge
  double pi_ref = 0.0;
};

struct Evaluated {
  StationaryPoint point;
  double objective = 0.0;
  double violation = 0.0;  // scaled L1 violation of pressure and active-flow limits
  double merit = 0.0;
};

enum class Goal { cost, distance };

struct SlpResult {
  bool converged = false;
  bool feasible = false;
  int iterations = 0;
  Evaluated best;
  Controls controls;
};

// Trust-region successive linearisation. Controls are the supplier injections,
// the active-edge regulation and the reference pressure; every other state
// follows from the Newton solve, so iterates always satisfy the physics.
class Slp {
 public:
  Slp(const GasNetwork& net, VectorXd extraction, Goal goal, VectorXd target_theta,
      VectorXd target_kappa, const SlpOptions& opt)
      : net_(net),
        delta_(std::move(extraction)),
        goal_(goal),
        target_theta_(std::move(target_theta)),
        target_kappa_(std::move(target_kappa)),
        opt_(opt) {
    pscale_ = std::max(1.0, inf_norm(net.pressure_max()));
    fscale_ = std::max({1.0, inf_norm(net.injection_max()), inf_norm(delta_)});
    if (goal_ == Goal::cost) {
      double marginal = 1.0;
      for (Index k = 0; k < net.num_nodes(); ++k) {
        const Node& n = net.node(k);
        marginal = std::max(marginal, std::abs(n.cost_linear) + 2.0 * n.cost_quadratic * std::abs(n.injection_max));
      }
      penalty_ = 1e3 * marginal * fscale_;
    } else {
      penalty_ = 1e3 * fscale_;
    }
  }

  std::optional<Evaluated> evaluate(const Controls& c) const {
    FlowSolution fs;
    try {
      fs = simulate_flow(net_, c.theta, c.kappa, c.pi_ref, delta_);
    } catch (const Error&) {
      return std::nullopt;
    }
    Evaluated ev;
    ev.point.flow = fs.flow;
    ev.point.pressure = fs.pressure;
    ev.point.regulation = c.kappa;
    ev.point.injection = c.theta;
    ev.point.residual_norm = physics_residual(net_, ev.point, delta_);
    ev.objective = objective(c);
    ev.point.objective = cost(c.theta);
    ev.violation = violation(ev.point);
    ev.merit = ev.objective + penalty_ * ev.violation;
    return ev;
  }

  SlpResult run(Controls c) const {
    SlpResult res;
    auto cur = evaluate(c);
    if (!cur) return res;
    double radius = opt_.initial_radius;
    int it = 0;
    bool done = false;
    for (; it < opt_.max_iterations && !done; ++it) {
      if (cur->point.flow.cwiseAbs().maxCoeff() == 0.0) {
        // No flow anywhere: the linearisation is undefined; accept the point.
        done = true;
        break;
      }
      auto step = subproblem(*cur, c, radius);
      if (!step) {
        radius *= opt_.shrink;
        if (radius < 1e-10) break;
        continue;
      }
      const auto& [next, model_merit, on_boundary] = *step;
      const double pred = cur->merit - model_merit;
      if (pred <= 1e-12 * std::max(1.0, std::abs(cur->merit))) {
        done = true;
        break;
      }
      auto trial = evaluate(next);
      const double ared = trial ? cur->merit - trial->merit : -1.0;
      const double ratio = trial ? ared / pred : -1.0;
      if (trial && ratio >= 0.1) {
        const double change = std::abs(trial->objective - cur->objective) / std::max(1.0, std::abs(cur->objective));
        c = next;
        cur = trial;
        if (ratio > 0.75 && on_boundary) radius = std::min(1.0, radius * opt_.expand);
        if (ratio < 0.25) radius *= opt_.shrink;
        if (change < opt_.relative_tolerance && cur->violation <= opt_.feasibility_tolerance &&
            ared <= 1e-6 * std::max(1.0, std::abs(cur->merit)))
          done = true;
      } else {
        radius *= opt_.shrink;
        if (radius < 1e-10) {
          done = true;
          break;
        }
      }
    }
    res.converged = done;
    res.iterations = it;
    res.best = *cur;
    res.controls = c;
    res.feasible = limit_violation(net_, cur->point) <= opt_.feasibility_tolerance &&
                   cur->point.residual_norm <= 1e-8;
    return res;
  }

  double cost(const VectorXd& theta) const {
    return net_.cost_linear().dot(theta) + net_.cost_quadratic().dot(theta.cwiseAbs2());
  }

 private:
  double objective(const Controls& c) const {
    if (goal_ == Goal::cost) return cost(c.theta);
    double dt = 0.0, dk = 0.0;
    for (Index k : net_.suppliers()) dt += std::pow(c.theta(k) - target_theta_(k), 2);
    for (Index l : net_.active_edges()) dk += std::pow(c.kappa(l) - target_kappa_(l), 2);
    return std::sqrt(dt) + std::sqrt(dk);
  }

  double violation(const StationaryPoint& p) const {
    double v = 0.0;
    for (Index k = 0; k < net_.num_nodes(); ++k) {
      const Node& n = net_.node(k);
      v += std::max(0.0, n.pressure_min - p.pressure(k)) / pscale_;
      v += std::max(0.0, p.pressure(k) - n.pressure_max) / pscale_;
    }
    for (Index l : net_.active_edges()) v += std::max(0.0, -p.flow(l)) / fscale_;
    return v;
  }

  // Solves the conic subproblem linearised at `cur`; returns the new controls,
  // the model merit at the step and whether any control hit the trust region.
  std::optional<std::tuple<Controls, double, bool>> subproblem(const Evaluated& cur, const Controls& c,
                                                               double radius) const {
    const Index N = net_.num_nodes();
    const Index E = net_.num_edges();
    const Index r = net_.reference();
    const auto& S = net_.suppliers();
    const auto& act = net_.active_edges();
    const MatrixXd& A = net_.incidence();
    const MatrixXd& B = net_.active_incidence();
    FlowSensitivities sens;
    try {
      sens = sensitivities(cur.point, net_);
    } catch (const Error&) {
      return std::nullopt;
    }

    ConicProgram prog;
    const Index th = prog.add_variables("theta", static_cast<Index>(S.size()));
    const Index ka = prog.add_variables("kappa", static_cast<Index>(act.size()));
    const Index ph = prog.add_variables("flow", E);
    const Index pi = prog.add_variables("pressure", N);
    const Index elo = prog.add_variables("slack_lo", N);
    const Index ehi = prog.add_variables("slack_hi", N);
    const Index ef = prog.add_variables("slack_flow", static_cast<Index>(act.size()));

    std::vector<Index> theta_var(static_cast<size_t>(N), -1), kappa_var(static_cast<size_t>(E), -1);
    for (size_t i = 0; i < S.size(); ++i) theta_var[static_cast<size_t>(S[i])] = th + static_cast<Index>(i);
    for (size_t i = 0; i < act.size(); ++i) kappa_var[static_cast<size_t>(act[i])] = ka + static_cast<Index>(i);

    const bool has_controls = !S.empty() || !act.empty();
    for (Index k = 0; k < N; ++k) {
      if (k == r && !has_controls) continue;
      AffineExpr e;
      for (Index l = 0; l < E; ++l) e.add(ph + l, A(k, l));
      if (theta_var[static_cast<size_t>(k)] >= 0)
        e.add(theta_var[static_cast<size_t>(k)], -1.0);
      else
        e.add_constant(-c.theta(k));
      for (Index l = 0; l < E; ++l) {
        if (B(k, l) == 0.0) continue;
        if (kappa_var[static_cast<size_t>(l)] >= 0) e.add(kappa_var[static_cast<size_t>(l)], B(k, l));
      }
      e.add_constant(delta_(k));
      prog.add_equality("conservation", k, e);
    }
    for (Index l = 0; l < E; ++l) {
      AffineExpr e;
      e.add(ph + l, 1.0);
      for (Index k = 0; k < N; ++k) e.add(pi + k, -sens.pressure_sens(l, k));
      if (kappa_var[static_cast<size_t>(l)] >= 0) e.add(kappa_var[static_cast<size_t>(l)], -sens.regulation_sens(l, l));
      e.add_constant(-sens.offset(l));
      prog.add_equality("weymouth", l, e);
    }
    for (Index k = 0; k < N; ++k) {
      const Node& n = net_.node(k);
      prog.add_nonneg("pressure_lo", k, AffineExpr().add(pi + k, 1.0).add(elo + k, 1.0).add_constant(-n.pressure_min));
      prog.add_nonneg("pressure_hi", k, AffineExpr().add(pi + k, -1.0).add(ehi + k, 1.0).add_constant(n.pressure_max));
      prog.add_nonneg("slack", k, AffineExpr().add(elo + k, 1.0));
      prog.add_nonneg("slack", k, AffineExpr().add(ehi + k, 1.0));
      prog.add_objective(elo + k, penalty_ / pscale_);
      prog.add_objective(ehi + k, penalty_ / pscale_);
    }
    // Reference pressure: hard limits intersected with the trust region.
    {
      const Node& n = net_.node(r);
      const double span = radius * std::max(n.pressure_max - n.pressure_min, 1e-9 * pscale_);
      const double lo = std::max(n.pressure_min, c.pi_ref - span);
      const double hi = std::min(n.pressure_max, c.pi_ref + span);
      prog.add_nonneg("trust", r, AffineExpr().add(pi + r, 1.0).add_constant(-std::min(lo, c.pi_ref)));
      prog.add_nonneg("trust", r, AffineExpr().add(pi + r, -1.0).add_constant(std::max(hi, c.pi_ref)));
    }
    for (size_t i = 0; i < S.size(); ++i) {
      const Node& n = net_.node(S[i]);
      const double span = radius * (n.injection_max - n.injection_min);
      const double cur_t = c.theta(S[i]);
      prog.add_nonneg("trust", S[i], AffineExpr().add(th + static_cast<Index>(i), 1.0).add_constant(-std::max(n.injection_min, cur_t - span)));
      prog.add_nonneg("trust", S[i], AffineExpr().add(th + static_cast<Index>(i), -1.0).add_constant(std::min(n.injection_max, cur_t + span)));
    }
    for (size_t i = 0; i < act.size(); ++i) {
      const Index l = act[i];
      const Edge& e = net_.edge(l);
      const double span = radius * (e.kappa_max - e.kappa_min);
      const double cur_k = c.kappa(l);
      prog.add_nonneg("trust", l, AffineExpr().add(ka + static_cast<Index>(i), 1.0).add_constant(-std::max(e.kappa_min, cur_k - span)));
      prog.add_nonneg("trust", l, AffineExpr().add(ka + static_cast<Index>(i), -1.0).add_constant(std::min(e.kappa_max, cur_k + span)));
      prog.add_nonneg("active_flow", l, AffineExpr().add(ph + l, 1.0).add(ef + static_cast<Index>(i), 1.0));
      prog.add_nonneg("slack", l, AffineExpr().add(ef + static_cast<Index>(i), 1.0));
      prog.add_objective(ef + static_cast<Index>(i), penalty_ / fscale_);
    }

    double constant = 0.0;
    if (goal_ == Goal::cost) {
      for (Index k = 0; k < N; ++k) {
        const Node& n = net_.node(k);
        const Index v = theta_var[static_cast<size_t>(k)];
        if (v < 0) {
          constant += n.cost_linear * c.theta(k) + n.cost_quadratic * c.theta(k) * c.theta(k);
          continue;
        }
        prog.add_objective(v, n.cost_linear);
        if (n.cost_quadratic > 0.0) {
          const Index t = prog.add_variables("cost_" + std::to_string(k), 1);
          prog.add_objective(t, 1.0);
          prog.add_rotated("cost", k, AffineExpr().add(t, 1.0), AffineExpr(1.0),
                           {AffineExpr().add(v, std::sqrt(n.cost_quadratic))});
        }
      }
    } else {
      if (!S.empty()) {
        const Index t = prog.add_variables("dist_theta", 1);
        prog.add_objective(t, 1.0);
        std::vector<AffineExpr> v;
        for (size_t i = 0; i < S.size(); ++i)
          v.push_back(AffineExpr().add(th + static_cast<Index>(i), 1.0).add_constant(-target_theta_(S[i])));
        prog.add_soc("distance", -1, AffineExpr().add(t, 1.0), v);
      }
      if (!act.empty()) {
        const Index t = prog.add_variables("dist_kappa", 1);
        prog.add_objective(t, 1.0);
        std::vector<AffineExpr> v;
        for (size_t i = 0; i < act.size(); ++i)
          v.push_back(AffineExpr().add(ka + static_cast<Index>(i), 1.0).add_constant(-target_kappa_(act[i])));
        prog.add_soc("distance", -1, AffineExpr().add(t, 1.0), v);
      }
    }

    const ConicSolution sol = prog.solve();
    if (sol.status != SolveStatus::optimal) return std::nullopt;

    Controls next = c;
    bool boundary = false;
    for (size_t i = 0; i < S.size(); ++i) {
      const Node& n = net_.node(S[i]);
      const double v = std::clamp(sol.x(th + static_cast<Index>(i)), n.injection_min, n.injection_max);
      if (std::abs(v - c.theta(S[i])) >= 0.99 * radius * (n.injection_max - n.injection_min)) boundary = true;
      next.theta(S[i]) = v;
    }
    for (size_t i = 0; i < act.size(); ++i) {
      const Edge& e = net_.edge(act[i]);
      const double v = std::clamp(sol.x(ka + static_cast<Index>(i)), e.kappa_min, e.kappa_max);
      if (std::abs(v - c.kappa(act[i])) >= 0.99 * radius * (e.kappa_max - e.kappa_min)) boundary = true;
      next.kappa(act[i]) = v;
    }
    {
      const Node& n = net_.node(r);
      next.pi_ref = std::clamp(sol.x(pi + r), n.pressure_min, n.pressure_max);
      if (std::abs(next.pi_ref - c.pi_ref) >= 0.99 * radius * (n.pressure_max - n.pressure_min)) boundary = true;
    }
    // Clamping can break global balance by round-off; restore it on the
    // supplier with the most headroom.
    rebalance(next);
    return std::make_tuple(next, sol.primal_objective + constant, boundary);
  }

 public:
  // Adjusts supplier injections so that 1ᵀ(θ − Bκ − δ) = 0; returns false if
  // the supplier limits cannot absorb the imbalance.
  bool rebalance(Controls& c) const {
    double gap = (c.theta - net_.active_incidence() * c.kappa - delta_).sum();
    if (gap == 0.0) return true;
    const auto& S = net_.suppliers();
    double room = 0.0;
    for (Index k : S) room += gap > 0 ? c.theta(k) - net_.node(k).injection_min : net_.node(k).injection_max - c.theta(k);
    if (room < std::abs(gap) * (1.0 - 1e-12)) return false;
    if (room <= 0.0) return std::abs(gap) <= 1e-12 * fscale_;
    const double frac = std::min(1.0, std::abs(gap) / room);
    for (Index k : S) {
      const Node& n = net_.node(k);
      if (gap > 0)
        c.theta(k) -= frac * (c.theta(k) - n.injection_min);
      else
        c.theta(k) += frac * (n.injection_max - c.theta(k));
    }
    return true;
  }

 private:
  const GasNetwork& net_;
  VectorXd delta_;
  Goal goal_;
  VectorXd target_theta_, target_kappa_;
  SlpOptions opt_;
  double pscale_ = 1.0, fscale_ = 1.0, penalty_ = 1.0;
};

// Deterministic starting controls. Seed 0 scales all suppliers uniformly to
// demand; the others fill suppliers greedily in merit order starting from a
// rotated position, with alternating regulation and reference-pressure guesses.
std::optional<Controls> initial_controls(const GasNetwork& net, const VectorXd& extraction, int seed) {
  const Index N = net.num_nodes();
  const Index E = net.num_edges();
  Controls c;
  c.kappa = VectorXd::Zero(E);
  for (Index l : net.active_edges()) {
    const Edge& e = net.edge(l);
    c.kappa(l) = seed % 2 == 0 ? std::clamp(0.0, e.kappa_min, e.kappa_max) : 0.5 * (e.kappa_min + e.kappa_max);
  }
  const Node& ref = net.node(net.reference());
  c.pi_ref = seed < 3 ? ref.pressure_max : 0.5 * (ref.pressure_min + ref.pressure_max);
  c.theta = net.injection_min();

  double need = (extraction + net.active_incidence() * c.kappa - c.theta).sum();
  const auto& S = net.suppliers();
  double capacity = 0.0;
  for (Index k : S) capacity += net.node(k).injection_max - net.node(k).injection_min;
  const double tol = 1e-12 * std::max(1.0, extraction.cwiseAbs().sum());
  if (need < -tol || need > capacity + tol) return std::nullopt;
  need = std::clamp(need, 0.0, capacity);
  if (S.empty()) return c;

  if (seed == 0) {
    const double t = capacity > 0.0 ? need / capacity : 0.0;
    for (Index k : S) c.theta(k) += t * (net.node(k).injection_max - net.node(k).injection_min);
    return c;
  }
  std::vector<Index> order(S.begin(), S.end());
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
    auto mc = [&](Index k) {
      const Node& n = net.node(k);
      return n.cost_linear + n.cost_quadratic * (n.injection_min + n.injection_max);
    };
    return mc(a) < mc(b);
  });
  const size_t shift = static_cast<size_t>(seed - 1) % order.size();
  std::rotate(order.begin(), order.begin() + static_cast<long>(shift), order.end());
  for (Index k : order) {
    const double add = std::min(need, net.node(k).injection_max - c.theta(k));
    c.theta(k) += add;
    need -= add;
  }
  (void)N;
  return c;
}

}  // namespace

StationaryPoint solve_deterministic(const GasNetwork& net, const SlpOptions& options) {
  return solve_deterministic(net, net.extraction_mean(), options);
}

StationaryPoint solve_deterministic(const GasNetwork& net, const VectorXd& extraction, const SlpOptions& options) {
  if (extraction.size() != net.num_nodes())
    throw DimensionError(kModule, "extraction vector does not match the network");
  {
    double capacity = 0.0, floor = 0.0;
    for (Index k = 0; k < net.num_nodes(); ++k) {
      capacity += net.node(k).injection_max;
      floor += net.node(k).injection_min;
    }
    double kmin = 0.0, kmax = 0.0;  // compressor consumption range
    for (Index l : net.active_edges()) {
      const double use = net.active_incidence().col(l).sum();
      const double lo = use * net.edge(l).kappa_min, hi = use * net.edge(l).kappa_max;
      kmin += std::min(lo, hi);
      kmax += std::max(lo, hi);
    }
    const double demand = extraction.sum();
    if (capacity < demand + kmin - 1e-9 * std::max(1.0, std::abs(demand)))
      throw InfeasibleError(kModule, "total injection capacity " + std::to_string(capacity) +
                                         " is below total demand " + std::to_string(demand));
    if (floor > demand + kmax + 1e-9 * std::max(1.0, std::abs(demand)))
      throw InfeasibleError(kModule, "minimum injections exceed total demand");
  }

  const Slp slp(net, extraction, Goal::cost, VectorXd(), VectorXd(), options);
  std::optional<SlpResult> best;
  int best_seed = -1;
  bool any_converged = false;
  for (int seed = 0; seed < options.num_starts; ++seed) {
    auto start = initial_controls(net, extraction, seed);
    if (!start) continue;
    SlpResult res = slp.run(*start);
    any_converged = any_converged || res.converged;
    if (!res.feasible) continue;
    if (!best || res.best.objective < best->best.objective - 1e-9 * std::max(1.0, std::abs(best->best.objective))) {
      best = std::move(res);
      best_seed = seed;
    }
  }
  (void)best_seed;
  if (!best) {
    if (!any_converged && options.num_starts > 0)
      throw ConvergenceError(kModule, "successive linearisation did not converge from any start");
    throw InfeasibleError(kModule, "no feasible operating point found from any start");
  }
  StationaryPoint pt = best->best.point;
  pt.objective = slp.cost(pt.injection);
  return pt;
}

ProjectionResult project_controls(const GasNetwork& net, const VectorXd& extraction,
                                  const VectorXd& target_injection, const VectorXd& target_regulation,
                                  const std::optional<StationaryPoint>& fallback, const SlpOptions& options) {
  const Index N = net.num_nodes();
  const Index E = net.num_edges();
  if (extraction.size() != N || target_injection.size() != N || target_regulation.size() != E)
    throw DimensionError(kModule, "projection inputs do not match the network");
  const Slp slp(net, extraction, Goal::distance, target_injection, target_regulation, options);
  auto distance = [&](const StationaryPoint& p) {
    return (p.injection - target_injection).norm() + (p.regulation - target_regulation).norm();
  };

  Controls warm;
  warm.theta = target_injection.cwiseMax(net.injection_min()).cwiseMin(net.injection_max());
  warm.kappa = target_regulation.cwiseMax(net.kappa_min()).cwiseMin(net.kappa_max());
  const Node& ref = net.node(net.reference());
  warm.pi_ref = fallback ? fallback->pressure(net.reference()) : ref.pressure_max;
  warm.pi_ref = std::clamp(warm.pi_ref, ref.pressure_min, ref.pressure_max);
  const bool clamped = (warm.theta - target_injection).cwiseAbs().maxCoeff() > 0.0 ||
                       (E > 0 && (warm.kappa - target_regulation).cwiseAbs().maxCoeff() > 0.0);
  const bool balanced = slp.rebalance(warm);

  ProjectionResult out;
  if (balanced) {
    if (auto ev = slp.evaluate(warm);
        ev && !clamped && distance(ev->point) <= 1e-12 * std::max(1.0, target_injection.norm()) &&
        limit_violation(net, ev->point) <= options.feasibility_tolerance) {
      out.point = ev->point;
      out.distance = 0.0;
      out.converged = true;
      return out;
    }
    SlpResult res = slp.run(warm);
    out.iterations = res.iterations;
    if (res.converged && res.feasible) {
      out.point = res.best.point;
      out.distance = distance(out.point);
      out.converged = true;
      return out;
    }
  }
  if (fallback) {
    Controls c;
    c.theta = fallback->injection;
    c.kappa = fallback->regulation;
    c.pi_ref = fallback->pressure(net.reference());
    if (slp.rebalance(c)) {
      SlpResult res = slp.run(c);
      out.iterations += res.iterations;
      out.used_fallback = true;
      if (res.converged && res.feasible) {
        out.point = res.best.point;
        out.distance = distance(out.point);
        out.converged = true;
        return out;
      }
      out.point = res.best.point;
      out.distance = distance(out.point);
    }
  }
  out.converged = false;
  return out;
}

}  // namespace ccgas
