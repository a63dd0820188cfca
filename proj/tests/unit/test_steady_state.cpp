#include "ccgas/error.hpp"
#include "ccgas/steady_state.hpp"

#include "fixtures.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace ccgas;
using namespace fixtures;

namespace {

// Line 1-2-3: cheap supplier at 1, expensive supplier at 3, demand 4 at node 2.
// All pressures in [50, 60] caps the 1→2 drop at 10, so θ1 ≤ √10.
GasNetwork line_two_suppliers(double cap1 = 10.0) {
  return make({node(1, 50, 60, 0, cap1, 1.0), node(2, 50, 60, 0, 0, 0, 0, 4.0), node(3, 50, 60, 0, 10, 3.0)},
              {pipe(1, 2, 1.0), pipe(3, 2, 1.0)}, 1);
}

double cycle_mismatch(double a, double w12, double w13, double w23) {
  auto q = [](double f) { return f * std::abs(f); };
  return q(a) / w12 + q(a - 1.0) / w23 - q(3.0 - a) / w13;
}

}  // namespace

TEST_CASE("simulate_flow: single pipe pressure drop") {
  const GasNetwork net = single_pipe(1.0, 1.0);
  FlowSolution s = simulate_flow(net, Eigen::Vector2d(1, 0), VectorXd::Zero(1), 50.0);
  CHECK(s.flow(0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(s.pressure(0) - s.pressure(1) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(s.pressure(0) == doctest::Approx(50.0));

  const GasNetwork net4 = single_pipe(1.0, 4.0);
  s = simulate_flow(net4, Eigen::Vector2d(4, 0), VectorXd::Zero(1), 50.0);
  CHECK(s.pressure(0) - s.pressure(1) == doctest::Approx(16.0).epsilon(1e-12));
}

TEST_CASE("simulate_flow: triangle cycle flow matches a dense sweep") {
  const double w12 = 1.0, w13 = 2.0, w23 = 0.5;
  const GasNetwork net = triangle(w12, w13, w23);
  const FlowSolution s = simulate_flow(net, Eigen::Vector3d(3, 0, 0), VectorXd::Zero(3), 80.0);

  // Oracle: sweep the single cycle degree of freedom, then bisect the bracket.
  double lo = -5.0, prev = cycle_mismatch(lo, w12, w13, w23);
  double bracket_lo = NAN, bracket_hi = NAN;
  for (double a = -5.0 + 1e-3; a <= 8.0; a += 1e-3) {
    const double g = cycle_mismatch(a, w12, w13, w23);
    if ((g > 0) != (prev > 0)) {
      bracket_lo = lo;
      bracket_hi = a;
      break;
    }
    lo = a;
    prev = g;
  }
  REQUIRE(std::isfinite(bracket_lo));
  for (int i = 0; i < 100; ++i) {
    const double m = 0.5 * (bracket_lo + bracket_hi);
    if ((cycle_mismatch(m, w12, w13, w23) > 0) == (cycle_mismatch(bracket_lo, w12, w13, w23) > 0))
      bracket_lo = m;
    else
      bracket_hi = m;
  }
  const double a = 0.5 * (bracket_lo + bracket_hi);
  CHECK(std::abs(s.flow(0) - a) <= 1e-6);
  CHECK(std::abs(s.flow(1) - (3.0 - a)) <= 1e-6);
  CHECK(std::abs(s.flow(2) - (a - 1.0)) <= 1e-6);
}

TEST_CASE("simulate_flow: residual bound on random meshed networks") {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> U(0.2, 3.0);
  for (int trial = 0; trial < 25; ++trial) {
    const int N = 4 + trial % 6;
    std::vector<Node> nodes;
    std::vector<Edge> edges;
    double demand = 0.0;
    for (int k = 1; k <= N; ++k) {
      const double d = k == 1 ? 0.0 : U(rng);
      demand += d;
      nodes.push_back(node(k, 0, 1e4, 0, k == 1 ? 1e3 : 0, 1.0, 0, d));
    }
    for (int k = 2; k <= N; ++k) {
      std::uniform_int_distribution<int> parent(1, k - 1);
      edges.push_back(pipe(parent(rng), k, U(rng)));
    }
    // Chords close cycles.
    for (int k = 3; k <= N; k += 2) {
      bool exists = false;
      for (const Edge& e : edges)
        exists = exists || (e.from == k && e.to == k - 2) || (e.from == k - 2 && e.to == k);
      if (!exists) edges.push_back(pipe(k, k - 2, U(rng)));
    }
    const GasNetwork net = make(nodes, edges, 1);
    VectorXd theta = VectorXd::Zero(N);
    theta(0) = demand;
    const FlowSolution s = simulate_flow(net, theta, VectorXd::Zero(net.num_edges()), 1e3);
    StationaryPoint p{s.flow, s.pressure, VectorXd::Zero(net.num_edges()), theta};
    CHECK(physics_residual(net, p, net.extraction_mean()) <= 1e-8);
    CHECK(s.pressure(0) == doctest::Approx(1e3));
  }
}

TEST_CASE("simulate_flow: regulation shifts the pressure drop") {
  const GasNetwork net = make({node(1, 0, 100, 0, 10), node(2, 0, 100, 0, 0, 0, 0, 2.0), node(3, 0, 100)},
                              {pipe(1, 3, 1.0), compressor(3, 2, 0.5, 0, 30, 0.01)}, 1);
  VectorXd kappa = VectorXd::Zero(2);
  kappa(1) = 10.0;
  const VectorXd theta = Eigen::Vector3d(2.0 + 0.1, 0, 0);
  const FlowSolution s = simulate_flow(net, theta, kappa, 90.0);
  // Compressor consumes b·κ = 0.1 at its sending node 3.
  CHECK(s.flow(0) == doctest::Approx(2.1).epsilon(1e-12));
  CHECK(s.flow(1) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(s.pressure(2) - s.pressure(1) + 10.0 == doctest::Approx(4.0 / 0.5).epsilon(1e-12));
}

TEST_CASE("simulate_flow: errors") {
  const GasNetwork net = single_pipe();
  CHECK_THROWS_AS(simulate_flow(net, Eigen::Vector2d(2, 0), VectorXd::Zero(1), 50.0), ValidationError);
  CHECK_THROWS_AS(simulate_flow(net, Eigen::Vector3d(1, 0, 0), VectorXd::Zero(1), 50.0), DimensionError);
}

TEST_CASE("solve_deterministic: trivial instances") {
  SUBCASE("no demand") {
    const GasNetwork net = make({node(1, 0, 100, 0, 10, 1.0), node(2, 0, 100)}, {pipe(1, 2, 1.0)});
    const StationaryPoint p = solve_deterministic(net);
    CHECK(p.injection.cwiseAbs().maxCoeff() == 0.0);
    CHECK(p.flow.cwiseAbs().maxCoeff() == 0.0);
    CHECK(p.objective == 0.0);
  }
  SUBCASE("forced dispatch") {
    const StationaryPoint p = solve_deterministic(single_pipe(1.0, 1.0, 1.0, 0.0));
    CHECK(p.objective == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(p.residual_norm <= 1e-8);
  }
  SUBCASE("capacity below demand") {
    CHECK_THROWS_AS(solve_deterministic(single_pipe(1.0, 20.0)), InfeasibleError);
  }
}

TEST_CASE("solve_deterministic: pressure-limited dispatch matches closed form") {
  const StationaryPoint p = solve_deterministic(line_two_suppliers());
  const double a = std::sqrt(10.0);
  CHECK(p.injection(0) == doctest::Approx(a).epsilon(1e-6));
  CHECK(p.objective == doctest::Approx(a + 3.0 * (4.0 - a)).epsilon(1e-6));
  CHECK(limit_violation(line_two_suppliers(), p) <= 1e-6);
}

TEST_CASE("solve_deterministic: objective agrees with a control-grid oracle and is monotone in capacity") {
  double previous = INFINITY;
  for (double cap : {1.0, 2.0, 3.0, 10.0}) {
    const GasNetwork net = line_two_suppliers(cap);
    const StationaryPoint p = solve_deterministic(net);
    // Grid oracle over θ1 and the reference pressure; θ3 closes the balance.
    double grid = INFINITY;
    for (int i = 0; i <= 400; ++i) {
      const double t1 = cap * i / 400.0;
      for (int j = 0; j <= 100; ++j) {
        const double pref = 50.0 + 10.0 * j / 100.0;
        const VectorXd theta = Eigen::Vector3d(t1, 0, 4.0 - t1);
        if (theta(2) > 10.0) continue;
        const FlowSolution s = simulate_flow(net, theta, VectorXd::Zero(2), pref);
        if ((s.pressure.array() < 50.0 - 1e-9).any() || (s.pressure.array() > 60.0 + 1e-9).any()) continue;
        grid = std::min(grid, t1 + 3.0 * theta(2));
      }
    }
    CHECK(p.objective <= grid + 1e-6);
    CHECK(p.objective >= grid - 2.0 * cap / 400.0);
    CHECK(p.objective <= previous + 1e-9);
    previous = p.objective;
  }
}

TEST_CASE("solve_deterministic: fixed point of the simulator on a meshed network") {
  const GasNetwork net = small_mesh();
  const StationaryPoint p = solve_deterministic(net);
  CHECK(p.residual_norm <= 1e-8);
  CHECK(limit_violation(net, p) <= 1e-6);
  for (Index l : net.active_edges()) CHECK(p.flow(l) >= -1e-9);
  const FlowSolution s = simulate_flow(net, p.injection, p.regulation, p.pressure(net.reference()));
  CHECK((s.flow - p.flow).lpNorm<Eigen::Infinity>() <= 1e-7);
  CHECK((s.pressure - p.pressure).lpNorm<Eigen::Infinity>() <= 1e-7);
}

TEST_CASE("project_controls: feasible target is returned unchanged") {
  const GasNetwork net = line_two_suppliers();
  const VectorXd theta = Eigen::Vector3d(2.0, 0, 2.0);
  const ProjectionResult r =
      project_controls(net, net.extraction_mean(), theta, VectorXd::Zero(2), std::nullopt);
  CHECK(r.converged);
  CHECK(r.distance == 0.0);
  CHECK(r.point.injection(0) == 2.0);
}

TEST_CASE("project_controls: infeasible target moves to the pressure-limited dispatch") {
  const GasNetwork net = line_two_suppliers();
  const VectorXd theta = Eigen::Vector3d(4.0, 0, 0.0);
  const ProjectionResult r =
      project_controls(net, net.extraction_mean(), theta, VectorXd::Zero(2), solve_deterministic(net));
  REQUIRE(r.converged);
  const double a = std::sqrt(10.0);
  CHECK(r.point.injection(0) == doctest::Approx(a).epsilon(1e-6));
  CHECK(r.distance == doctest::Approx(std::sqrt(2.0) * (4.0 - a)).epsilon(1e-6));
}
