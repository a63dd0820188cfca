#include "ccgas/conic.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace ccgas;

namespace {

AffineExpr var(Index i, double c = 1.0) { return AffineExpr().add(i, c); }

}  // namespace

TEST_CASE("conic: small LP matches vertex enumeration") {
  // min -x0 - x1 s.t. x0 + 2x1 <= 4, 3x0 + x1 <= 6, x >= 0
  ConicProgram p;
  const Index x = p.add_variables("x", 2);
  p.add_objective(x, -1.0);
  p.add_objective(x + 1, -1.0);
  p.add_nonneg("c1", -1, AffineExpr(4.0).add(x, -1.0).add(x + 1, -2.0));
  p.add_nonneg("c2", -1, AffineExpr(6.0).add(x, -3.0).add(x + 1, -1.0));
  p.add_nonneg("x0", 0, var(x));
  p.add_nonneg("x1", 1, var(x + 1));
  const ConicSolution s = p.solve();
  REQUIRE(s.status == SolveStatus::optimal);
  CHECK(s.x(0) == doctest::Approx(1.6).epsilon(1e-7));
  CHECK(s.x(1) == doctest::Approx(1.2).epsilon(1e-7));
  CHECK(s.primal_objective == doctest::Approx(-2.8).epsilon(1e-8));
  CHECK(s.relative_gap <= 1e-8);
}

TEST_CASE("conic: distance from a point to a line") {
  // min t s.t. ||(x0 - 3, x1 + 4)|| <= t, x0 + x1 = 10
  ConicProgram p;
  const Index x = p.add_variables("x", 2);
  const Index t = p.add_variables("t", 1);
  p.add_objective(t, 1.0);
  p.add_equality("line", -1, AffineExpr(-10.0).add(x, 1.0).add(x + 1, 1.0));
  p.add_soc("dist", -1, var(t), {AffineExpr(-3.0).add(x, 1.0), AffineExpr(4.0).add(x + 1, 1.0)});
  const ConicSolution s = p.solve();
  REQUIRE(s.status == SolveStatus::optimal);
  CHECK(s.x(t) == doctest::Approx(11.0 / std::sqrt(2.0)).epsilon(1e-8));
  const auto [lam, u] = p.soc_dual(s, 1);
  CHECK(lam == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(u.norm() <= lam + 1e-9);
}

TEST_CASE("conic: rotated cone and its duals") {
  // min t s.t. ||x||^2 <= t * 1, x0 + x1 = 2  -> x = (1,1), t = 2
  ConicProgram p;
  const Index x = p.add_variables("x", 2);
  const Index t = p.add_variables("t", 1);
  p.add_objective(t, 1.0);
  const Index eq = p.add_equality("sum", -1, AffineExpr(-2.0).add(x, 1.0).add(x + 1, 1.0));
  const Index rc = p.add_rotated("sq", -1, var(t), AffineExpr(1.0), {var(x), var(x + 1)});
  SolverSettings st;
  st.reltol = 1e-13;
  st.feastol = 1e-13;
  const ConicSolution s = p.solve(st);
  REQUIRE(s.status == SolveStatus::optimal);
  CHECK(s.x(t) == doctest::Approx(2.0).epsilon(1e-8));
  CHECK(s.x(x) == doctest::Approx(1.0).epsilon(1e-7));
  const auto d = p.rotated_dual(s, rc);
  CHECK(d.p == doctest::Approx(1.0).epsilon(1e-8));  // stationarity in t
  // stationarity in x: y - u = 0 componentwise; y = d obj / d rhs = 2
  CHECK(p.equality_dual(s, eq) == doctest::Approx(-2.0).epsilon(1e-7));
  CHECK(d.u(0) == doctest::Approx(-2.0).epsilon(1e-7));
  CHECK(d.u.squaredNorm() <= 4.0 * d.p * d.q + 1e-7);
}

TEST_CASE("conic: infeasibility and unboundedness certificates") {
  {
    ConicProgram p;
    const Index x = p.add_variables("x", 1);
    p.add_objective(x, 1.0);
    p.add_nonneg("lo", -1, AffineExpr(-1.0).add(x, 1.0));
    p.add_nonneg("hi", -1, AffineExpr(0.0).add(x, -1.0));
    CHECK(p.solve().status == SolveStatus::infeasible);
  }
  {
    ConicProgram p;
    const Index x = p.add_variables("x", 1);
    p.add_objective(x, -1.0);
    p.add_nonneg("lo", -1, var(x));
    CHECK(p.solve().status == SolveStatus::unbounded);
  }
}

TEST_CASE("conic: random feasible SOCPs satisfy KKT conditions") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 20; ++trial) {
    // min cᵀx s.t. ||B_k x + d_k|| <= 10 + e_kᵀx, Fx = f with x0 feasible by construction.
    const Index n = 6, K = 4, d = 3;
    ConicProgram p;
    const Index x = p.add_variables("x", n);
    for (Index j = 0; j < n; ++j) p.add_objective(x + j, g(rng));
    // bounded box to avoid unboundedness
    std::vector<AffineExpr> v;
    for (Index j = 0; j < n; ++j) v.push_back(var(x + j));
    p.add_soc("ball", -1, AffineExpr(5.0), v);
    for (Index k = 0; k < K; ++k) {
      std::vector<AffineExpr> rows;
      for (Index r = 0; r < d; ++r) {
        AffineExpr e(g(rng));
        for (Index j = 0; j < n; ++j) e.add(x + j, g(rng));
        rows.push_back(e);
      }
      AffineExpr t(10.0);
      for (Index j = 0; j < n; ++j) t.add(x + j, 0.3 * g(rng));
      p.add_soc("c", k, t, rows);
    }
    AffineExpr eq(0.0);
    for (Index j = 0; j < n; ++j) eq.add(x + j, g(rng));
    p.add_equality("eq", -1, eq);
    const ConicSolution s = p.solve();
    REQUIRE(s.status == SolveStatus::optimal);
    const StandardForm sf = p.standard_form();
    const VectorXd stat = sf.A.transpose() * s.y + sf.G.transpose() * s.z + sf.c;
    CHECK(stat.lpNorm<Eigen::Infinity>() <= 1e-8);
    CHECK(std::abs(s.s.dot(s.z)) <= 1e-7);
    CHECK(s.relative_gap <= 1e-8);
  }
}
