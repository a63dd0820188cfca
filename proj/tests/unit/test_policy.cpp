#include "ccgas/error.hpp"
#include "ccgas/linearization.hpp"
#include "ccgas/policy.hpp"
#include "ccgas/steady_state.hpp"

#include "fixtures.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace ccgas;
using namespace fixtures;

namespace {

struct Case {
  GasNetwork net;
  StationaryPoint point;
  LinearizedModel lin;
};

Case prepare(const GasNetwork& net) {
  StationaryPoint p = solve_deterministic(net);
  LinearizedModel lin = linearize(p, net);
  return {net, p, lin};
}

}  // namespace

TEST_CASE("policy: structure and block counts on a single pipe") {
  const Case c = prepare(single_pipe(1.0, 1.0, 1.0, 0.0, 0.1));
  const PolicyStructure st = policy_structure(c.net, c.lin, {1}, PolicyMask::all_assets);
  CHECK(st.suppliers == std::vector<Index>{0});
  CHECK(st.recourse_suppliers.empty());
  CHECK(st.regulated_edges.empty());
  // Pressure at the consumer responds, the pinned reference does not; no active edges.
  CHECK(st.pressure_random == std::vector<bool>{false, true});
  CHECK(count_chance_constraints(c.net, st) == 2);

  // With the reference as the only supplier nothing can balance the error.
  const UncertaintyModel unc = build_uncertainty(c.net, 0.05, 2);
  const PolicySolution s = optimize_policies(c.net, c.lin, unc);
  CHECK(s.status == SolveStatus::infeasible);
}

TEST_CASE("policy: hand count of blocks with one recourse supplier") {
  // Node 1 is the reference without supply; node 2 supplies; node 3 is uncertain.
  const GasNetwork net = make({node(1, 0, 100), node(2, 0, 100, 0, 10, 1.0, 0.1),
                               node(3, 0, 100, 0, 0, 0, 0, 1.0, 0.1)},
                              {pipe(1, 2, 1.0), pipe(2, 3, 1.0)}, 1);
  const Case c = prepare(net);
  const UncertaintyModel unc = budgeted_uncertainty(net, c.lin, 0.05, Distribution::gaussian, PolicyMask::all_assets);
  PolicyOptions opt;
  opt.psi_pressure = VectorXd::Constant(3, 0.1);
  const PolicyProgram P = assemble(net, c.lin, unc, opt);
  const ConicProgram& prog = P.program;
  // pressure rows 2,3 random (2 each), injection limits of node 2 (2).
  CHECK(unc.num_constraints == 6);
  CHECK(prog.count(BlockKind::equality, "conservation") == 3);
  CHECK(prog.count(BlockKind::equality, "recourse") == 1);
  CHECK(prog.count(BlockKind::equality, "weymouth") == 2);
  CHECK(prog.count(BlockKind::equality, "reference") == 1);
  CHECK(prog.count(BlockKind::soc, "pressure_max") == 2);
  CHECK(prog.count(BlockKind::nonneg, "pressure_max") == 1);
  CHECK(prog.count(BlockKind::soc, "variance_pressure") == 2);
  CHECK(prog.count(BlockKind::nonneg, "variance_pressure") == 1);
  CHECK(prog.count(BlockKind::soc, "injection_max") == 1);
  CHECK(prog.count(BlockKind::soc, "injection_min") == 1);
  CHECK(prog.count(BlockKind::rotated, "cost_injection") == 1);
  CHECK(prog.count(BlockKind::rotated, "cost_recourse") == 1);
  CHECK(prog.count(BlockKind::soc, "pressure_min") == 2);
  CHECK(prog.count(BlockKind::soc) == 8);

  const PolicySolution s = solve(P, net, c.lin, unc);
  REQUIRE(s.optimal());
  // Only one recourse supplier: it absorbs the full error.
  CHECK(s.alpha(1, 2) == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(s.alpha.row(0).cwiseAbs().maxCoeff() == 0.0);
  CHECK(s.pressure(0) == doctest::Approx(c.point.pressure(0)).epsilon(1e-8));
}

TEST_CASE("policy: deterministic consistency with the steady-state optimum") {
  GasNetwork net = small_mesh();
  const Case c = prepare(net);
  const UncertaintyModel unc = build_uncertainty(c.net, 0.05, 0);
  // Σ = 0 input: the same network with no stochastic nodes.
  UncertaintyModel det = unc;
  det.covariance.setZero();
  det.factor.setZero();
  det.stochastic.clear();
  const PolicySolution s = optimize_policies(c.net, c.lin, det);
  REQUIRE(s.optimal());
  CHECK(s.objective == doctest::Approx(c.point.objective).epsilon(1e-7));
  CHECK((s.injection - c.point.injection).lpNorm<Eigen::Infinity>() <= 1e-6);
  CHECK((s.pressure - c.point.pressure).lpNorm<Eigen::Infinity>() <= 1e-6);
  CHECK((s.flow - c.point.flow).lpNorm<Eigen::Infinity>() <= 1e-6);
}

TEST_CASE("policy: LP toy optimum equals the hand dispatch") {
  // Two suppliers, c2 = 0, ample pressure: cheap supplier takes everything it can.
  const GasNetwork net = make({node(1, 0, 1000, 0, 1.5, 1.0), node(2, 0, 1000, 0, 0, 0, 0, 2.0),
                               node(3, 0, 1000, 0, 5, 4.0)},
                              {pipe(1, 2, 1.0), pipe(3, 2, 1.0)}, 1);
  const Case c = prepare(net);
  UncertaintyModel unc = build_uncertainty(net, 0.05, 0);
  const PolicySolution s = optimize_policies(net, c.lin, unc);
  REQUIRE(s.optimal());
  CHECK(s.objective == doctest::Approx(1.5 + 4.0 * 0.5).epsilon(1e-8));
  CHECK(s.relative_gap <= 1e-8);
}

TEST_CASE("policy: infeasible toy yields an infeasibility status") {
  const GasNetwork net = make({node(1, 0, 100), node(2, 0, 100, 0, 10, 1.0), node(3, 0, 100, 0, 0, 0, 0, 3.0)},
                              {pipe(1, 2, 1.0), pipe(2, 3, 1.0)}, 1);
  const Case c = prepare(net);
  NetworkData d;
  d.name = "short";
  for (Index k = 0; k < 3; ++k) d.nodes.push_back(net.node(k));
  d.nodes[1].injection_max = 2.0;
  for (Index l = 0; l < 2; ++l) d.edges.push_back(net.edge(l));
  d.reference_node = 1;
  const GasNetwork shortnet(std::move(d));
  const PolicySolution s = optimize_policies(shortnet, c.lin, build_uncertainty(shortnet, 0.05, 0));
  CHECK(s.status == SolveStatus::infeasible);
}

TEST_CASE("policy: objective is non-decreasing in the safety parameter") {
  const Case c = prepare(small_mesh());
  const UncertaintyModel base = budgeted_uncertainty(c.net, c.lin, 0.05, Distribution::gaussian, PolicyMask::all_assets);
  double prev = -INFINITY;
  for (double z : {0.0, 0.5, 1.0, 2.0, 3.0}) {
    const PolicySolution s = optimize_policies(c.net, c.lin, with_safety(base, z));
    REQUIRE(s.optimal());
    CHECK(s.objective >= prev - 1e-7 * std::abs(prev));
    prev = s.objective;
  }
}

TEST_CASE("policy: cone tightness and closed forms at the optimum") {
  const Case c = prepare(small_mesh());
  const UncertaintyModel unc =
      budgeted_uncertainty(c.net, c.lin, 0.05, Distribution::gaussian, PolicyMask::all_assets);
  PolicyOptions opt;
  opt.psi_pressure = VectorXd::Constant(6, 0.01);
  opt.psi_flow = VectorXd::Constant(7, 0.01);
  const PolicySolution s = optimize_policies(c.net, c.lin, unc, opt);
  REQUIRE(s.optimal());
  const VectorXd c1 = c.net.cost_linear(), c2 = c.net.cost_quadratic();
  const double closed = expected_cost(s, unc, c1, c2);
  CHECK(closed == doctest::Approx(c1.dot(s.injection) + s.cost_injection.sum() + s.cost_recourse.sum()).epsilon(1e-6));
  const StateStddev sd = state_stddev(s, c.lin, unc);
  CHECK((sd.pressure - s.std_pressure).lpNorm<Eigen::Infinity>() <= 1e-6);
  CHECK((sd.flow - s.std_flow).lpNorm<Eigen::Infinity>() <= 1e-6);
  // λ^π = ψ^π, λ^φ = ψ^φ.
  CHECK((s.lambda_pi - opt.psi_pressure).lpNorm<Eigen::Infinity>() <= 1e-6);
  CHECK((s.lambda_phi - opt.psi_flow).lpNorm<Eigen::Infinity>() <= 1e-6);
  // Dual feasibility.
  for (Index n = 0; n < 6; ++n) {
    CHECK(s.u_pi_max.row(n).norm() <= s.lambda_pi_max(n) + 1e-8);
    CHECK(s.u_pi_min.row(n).norm() <= s.lambda_pi_min(n) + 1e-8);
    CHECK(s.u_theta_max.row(n).norm() <= s.lambda_theta_max(n) + 1e-8);
    CHECK(s.u_alpha.row(n).squaredNorm() <= 2.0 * s.mu_alpha(n) * s.lambda_alpha(n) + 1e-8);
  }
}

TEST_CASE("policy: sampled admissibility of the recourse") {
  const Case c = prepare(small_mesh());
  const UncertaintyModel unc =
      budgeted_uncertainty(c.net, c.lin, 0.05, Distribution::gaussian, PolicyMask::all_assets);
  const PolicySolution s = optimize_policies(c.net, c.lin, unc);
  REQUIRE(s.optimal());
  const MatrixXd& A = c.net.incidence();
  const MatrixXd& B = c.net.active_incidence();
  const Index r = c.net.reference();
  for (int k = 0; k < 100; ++k) {
    const VectorXd xi = sample_error(unc, 11, static_cast<std::uint64_t>(k));
    const StateResponse st = respond(c.lin, s.pressure, s.flow, s.alpha, s.beta, xi);
    const VectorXd theta = s.injection + s.alpha * xi;
    const VectorXd kappa = s.regulation + s.beta * xi;
    const VectorXd balance = A * st.flow - theta + B * kappa + unc.mean + xi;
    CHECK(balance.lpNorm<Eigen::Infinity>() <= 1e-9);
    const VectorXd weymouth = st.flow - c.lin.sens.offset - c.lin.sens.pressure_sens * st.pressure -
                              c.lin.sens.regulation_sens * kappa;
    CHECK(weymouth.lpNorm<Eigen::Infinity>() <= 1e-9);
    CHECK(st.pressure(r) == doctest::Approx(s.pressure(r)));
  }
}

TEST_CASE("state_stddev and expected_cost closed forms") {
  SUBCASE("single pipe without recourse") {
    const Case c = prepare(single_pipe(1.0, 1.0, 1.0, 0.0, 0.3));
    const UncertaintyModel unc = build_uncertainty(c.net, 0.05, 1);
    const StateStddev sd = state_stddev(MatrixXd::Zero(2, 2), MatrixXd::Zero(1, 2), c.lin, unc);
    CHECK(sd.pressure(1) == doctest::Approx(std::abs(c.lin.pressure_from_injection(1, 1)) * 0.3));
    CHECK(sd.pressure(0) == 0.0);
    CHECK(sd.flow(0) == doctest::Approx(0.3));
  }
  SUBCASE("full recourse cancels the response") {
    const Case c = prepare(small_mesh());
    const UncertaintyModel unc = build_uncertainty(c.net, 0.05, 1);
    const StateStddev sd = state_stddev(MatrixXd::Identity(6, 6), MatrixXd::Zero(7, 6), c.lin, unc);
    CHECK(sd.pressure.cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(sd.flow.cwiseAbs().maxCoeff() <= 1e-12);
  }
  SUBCASE("trace identity") {
    const Index N = 4;
    CHECK(expected_cost(VectorXd::Zero(N), MatrixXd::Identity(N, N), MatrixXd::Identity(N, N), VectorXd::Zero(N),
                        VectorXd::Ones(N)) == doctest::Approx(4.0));
  }
  SUBCASE("Monte Carlo mean of the realised cost") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> g;
    const Index N = 3;
    VectorXd theta(N), c1(N), c2(N);
    MatrixXd alpha(N, N), L(N, N);
    for (Index i = 0; i < N; ++i) {
      theta(i) = 1.0 + std::abs(g(rng));
      c1(i) = std::abs(g(rng));
      c2(i) = std::abs(g(rng));
      for (Index j = 0; j < N; ++j) {
        alpha(i, j) = g(rng);
        L(i, j) = i >= j ? g(rng) : 0.0;
      }
    }
    const MatrixXd cov = L * L.transpose();
    const UncertaintyModel unc = build_uncertainty(VectorXd::Zero(N), cov, 0.05, 1);
    double mean = 0.0;
    const int S = 200000;
    for (int k = 0; k < S; ++k) {
      const VectorXd t = theta + alpha * sample_error(unc, 5, static_cast<std::uint64_t>(k));
      mean += (c1.dot(t) + t.dot(c2.cwiseProduct(t))) / S;
    }
    CHECK(mean == doctest::Approx(expected_cost(theta, alpha, cov, c1, c2)).epsilon(5e-3));
  }
}

TEST_CASE("policy: variance penalty lowers pressure variance") {
  const Case c = prepare(small_mesh());
  const UncertaintyModel unc =
      budgeted_uncertainty(c.net, c.lin, 0.05, Distribution::gaussian, PolicyMask::all_assets);
  double prev = INFINITY;
  // Exchange argument: the penalised total Σ s^π cannot increase with ψ.
  for (double psi : {1e-3, 1e-2, 1e-1, 1.0}) {
    PolicyOptions opt;
    opt.psi_pressure = VectorXd::Constant(6, psi);
    const PolicySolution s = optimize_policies(c.net, c.lin, unc, opt);
    REQUIRE(s.optimal());
    const double total = state_stddev(s, c.lin, unc).pressure.sum();
    CHECK(total <= prev + 1e-6);
    prev = total;
  }
}

TEST_CASE("policy: masks and argument errors") {
  const Case c = prepare(small_mesh());
  const std::vector<Index> K{1, 3, 4};
  CHECK(policy_structure(c.net, c.lin, K, PolicyMask::injections).regulated_edges.empty());
  CHECK(policy_structure(c.net, c.lin, K, PolicyMask::injections_compressors).regulated_edges == std::vector<Index>{1});
  CHECK(policy_structure(c.net, c.lin, K, PolicyMask::all_assets).regulated_edges == std::vector<Index>{1, 5});
  CHECK(policy_mask_from_string(to_string(PolicyMask::injections_compressors)) == PolicyMask::injections_compressors);
  CHECK_THROWS_AS(policy_mask_from_string("bogus"), ParseError);
  const UncertaintyModel unc = build_uncertainty(c.net, 0.05, 1);
  PolicyOptions bad;
  bad.psi_pressure = VectorXd::Constant(2, 1.0);
  CHECK_THROWS_AS(assemble(c.net, c.lin, unc, bad), DimensionError);
  bad.psi_pressure = VectorXd::Constant(6, -1.0);
  CHECK_THROWS_AS(assemble(c.net, c.lin, unc, bad), ValidationError);
}
