#include "ccgas/error.hpp"
#include "ccgas/linearization.hpp"
#include "ccgas/pricing.hpp"
#include "ccgas/steady_state.hpp"

#include "fixtures.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace ccgas;
using namespace fixtures;

namespace {

struct Priced {
  GasNetwork net;
  LinearizedModel lin;
  UncertaintyModel unc;
  PolicyOptions opt;
  PolicySolution sol;
};

Priced price(const GasNetwork& net, double psi_pi = 0.0, double psi_phi = 0.0, double safety = -1.0) {
  const StationaryPoint p = solve_deterministic(net);
  LinearizedModel lin = linearize(p, net);
  UncertaintyModel unc = budgeted_uncertainty(net, lin, 0.05, Distribution::gaussian, PolicyMask::all_assets, safety);
  PolicyOptions opt;
  opt.psi_pressure = VectorXd::Constant(net.num_nodes(), psi_pi);
  opt.psi_flow = VectorXd::Constant(net.num_edges(), psi_phi);
  PolicySolution sol = optimize_policies(net, lin, unc, opt);
  return {net, lin, unc, opt, sol};
}

// Two suppliers behind a compressor, all floors at zero and θ_min = κ_min = 0.
GasNetwork corollary_toy() {
  return make({node(1, 0, 60, 0, 10, 1.0, 0.05), node(2, 0, 60, 0, 0, 0, 0, 2.0, 0.2),
               node(3, 0, 60, 0, 6, 2.0, 0.1), node(4, 0, 60, 0, 0, 0, 0, 1.5, 0.15)},
              {pipe(1, 2, 1.0), compressor(2, 4, 1.0, 0, 30, 0.01), pipe(3, 4, 1.0), pipe(3, 2, 0.5)}, 1);
}

}  // namespace

TEST_CASE("pricing: decomposition identity and stationarity across configurations") {
  for (double psi : {0.0, 0.05}) {
    for (double z : {-1.0, 0.0}) {
      CAPTURE(psi);
      CAPTURE(z);
      const Priced p = price(small_mesh(), psi, psi, z);
      REQUIRE(p.sol.optimal());
      CHECK(p.sol.relative_gap <= 1e-8);
      const RevenueReport rep = revenues(p.sol, p.lin, p.net, p.unc);
      CHECK(std::abs(rep.identity_residual()) <= 1e-6 * rep.scale());
      CHECK(rep.variance_rent >= 0.0);
      const StationarityReport st = check_stationarity(p.sol, p.lin, p.net, p.unc, p.opt);
      for (const auto& [name, value] : st.blocks) {
        CAPTURE(name);
        CHECK(value <= 1e-6);
      }
    }
  }
}

TEST_CASE("pricing: deterministic degeneration") {
  const GasNetwork net = small_mesh();
  const StationaryPoint pt = solve_deterministic(net);
  const LinearizedModel lin = linearize(pt, net);
  UncertaintyModel unc = build_uncertainty(net, 0.05, 0);
  unc.covariance.setZero();
  unc.factor.setZero();
  unc.stochastic.clear();
  const PolicySolution sol = optimize_policies(net, lin, unc);
  REQUIRE(sol.optimal());
  const RevenueReport rep = revenues(sol, lin, net, unc);
  for (size_t i = 0; i < rep.supplier.size(); ++i) {
    const Index n = rep.supplier_nodes[i];
    CHECK(rep.supplier[i].recourse == 0.0);
    CHECK(rep.supplier[i].limits == 0.0);
    CHECK(rep.supplier[i].variance == 0.0);
    CHECK(rep.supplier[i].nominal == doctest::Approx(sol.lambda_c(n) * sol.injection(n)));
  }
  for (const RevenueSplit& r : rep.active) CHECK(r.recourse == 0.0);
  // Classic surplus: λ^c·θ minus the quadratic generation cost.
  const CostRecovery cr = check_cost_recovery(rep, sol, net);
  const VectorXd c1 = net.cost_linear(), c2 = net.cost_quadratic();
  for (const AgentProfit& a : cr.agents)
    if (a.supplier) {
      const double th = sol.injection(a.index);
      CHECK(a.profit == doctest::Approx(sol.lambda_c(a.index) * th - c1(a.index) * th - c2(a.index) * th * th)
                            .epsilon(1e-7));
    }
  CHECK(std::abs(rep.identity_residual()) <= 1e-6 * rep.scale());
}

TEST_CASE("pricing: consumer charge expands term by term on a two-supplier line") {
  // Reference at node 1 (no supply), supplier at 2, uncertain consumer at 3,
  // second supplier at 4 so the recourse split is non-trivial.
  const GasNetwork net = make({node(1, 0, 100), node(2, 0, 100, 0, 10, 1.0, 0.2),
                               node(3, 10, 100, 0, 0, 0, 0, 2.0, 0.3), node(4, 0, 100, 0, 10, 1.5, 0.1)},
                              {pipe(1, 2, 1.0), pipe(2, 3, 1.0), pipe(4, 3, 1.0)}, 1);
  const Priced p = price(net, 0.1, 0.0);
  REQUIRE(p.sol.optimal());
  const RevenueReport rep = revenues(p.sol, p.lin, p.net, p.unc);
  // Hand expansion at the consumer node: only node 3 carries variance and
  // F is diagonal there, so every cone term reduces to σ·Σ_m γ̆2[m,3]·z·u[m,3].
  const Index k = 2;
  const double sigma = 0.3;
  const double z = p.sol.safety;
  double limits = 0.0, variance = 0.0;
  for (Index m = 0; m < 4; ++m) {
    limits += p.lin.pressure_from_injection(m, k) * z * (p.sol.u_pi_max(m, k) + p.sol.u_pi_min(m, k)) * sigma;
    variance += p.lin.pressure_from_injection(m, k) * p.sol.u_pi(m, k) * sigma;
  }
  CHECK(rep.consumer[k].nominal == doctest::Approx(p.sol.lambda_c(k) * 2.0));
  CHECK(rep.consumer[k].recourse == doctest::Approx(p.sol.lambda_r(k)));
  CHECK(rep.consumer[k].limits == doctest::Approx(limits).epsilon(1e-9));
  CHECK(rep.consumer[k].variance == doctest::Approx(variance).epsilon(1e-9));
  CHECK(std::abs(rep.identity_residual()) <= 1e-6 * rep.scale());
}

TEST_CASE("pricing: corollary hypotheses give adequacy and cost recovery") {
  const GasNetwork net = corollary_toy();
  const StationaryPoint p = solve_deterministic(net);
  // Anchor the linearisation so that the Weymouth offset vanishes.
  LinearizedModel lin = linearize(p, net);
  lin.sens.offset.setZero();
  const UncertaintyModel unc = budgeted_uncertainty(net, lin, 0.05, Distribution::gaussian, PolicyMask::all_assets);
  PolicyOptions opt;
  opt.psi_pressure = VectorXd::Constant(4, 0.01);
  const PolicySolution sol = optimize_policies(net, lin, unc, opt);
  REQUIRE(sol.optimal());
  const RevenueReport rep = revenues(sol, lin, net, unc);
  const AdequacyCheck ad = check_revenue_adequacy(rep, lin, net);
  CHECK(ad.conditions_met);
  CHECK(ad.gap >= -1e-8);
  CHECK(std::abs(ad.identity_residual) <= 1e-6 * rep.scale());
  const CostRecovery cr = check_cost_recovery(rep, sol, net);
  CHECK(cr.conditions_met());
  for (const AgentProfit& a : cr.agents) CHECK(a.profit >= -1e-8);
}

TEST_CASE("pricing: forced-on expensive supplier is flagged") {
  GasNetwork net = make({node(1, 0, 100, 0, 10, 1.0, 0.01), node(2, 0, 100, 0, 0, 0, 0, 3.0, 0.1),
                         node(3, 0, 100, 2.0, 5, 10.0, 0.01)},
                        {pipe(1, 2, 2.0), pipe(3, 2, 2.0)}, 1);
  const Priced p = price(net);
  REQUIRE(p.sol.optimal());
  const RevenueReport rep = revenues(p.sol, p.lin, p.net, p.unc);
  const CostRecovery cr = check_cost_recovery(rep, p.sol, p.net);
  REQUIRE(cr.violated_conditions.size() == 1);
  CHECK(cr.violated_conditions[0] == "injection_min > 0 at node 3");
  CHECK_FALSE(cr.all_nonnegative);
  bool found = false;
  for (const AgentProfit& a : cr.agents)
    if (a.supplier && a.index == 2) {
      found = true;
      CHECK(a.profit < 0.0);
    }
  CHECK(found);
}

TEST_CASE("pricing: audit residual grows linearly with injected dual noise") {
  const Priced p = price(small_mesh(), 0.01, 0.01);
  REQUIRE(p.sol.optimal());
  const double base = check_stationarity(p.sol, p.lin, p.net, p.unc, p.opt).max();
  CHECK(base <= 1e-6);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g;
  VectorXd noise(p.net.num_nodes());
  for (Index i = 0; i < noise.size(); ++i) noise(i) = g(rng);
  double prev = 0.0;
  for (double eps : {1e-4, 1e-3, 1e-2}) {
    PolicySolution bad = p.sol;
    bad.lambda_c += eps * noise;
    const double r = check_stationarity(bad, p.lin, p.net, p.unc, p.opt).max();
    CHECK(r > 10.0 * base);
    if (prev > 0.0) CHECK(r / prev == doctest::Approx(10.0).epsilon(0.05));
    prev = r;
  }
}

TEST_CASE("pricing: missing duals are an error") {
  const Priced p = price(small_mesh());
  PolicySolution bad = p.sol;
  bad.u_pi_max.resize(0, 0);
  CHECK_THROWS_AS(revenues(bad, p.lin, p.net, p.unc), ValidationError);
  bad = p.sol;
  bad.status = SolveStatus::iteration_limit;
  CHECK_THROWS_AS(revenues(bad, p.lin, p.net, p.unc), ValidationError);
}

TEST_CASE("pricing: csv has four streams per agent") {
  const Priced p = price(small_mesh());
  const RevenueReport rep = revenues(p.sol, p.lin, p.net, p.unc);
  const std::string csv = revenue_csv(rep, p.net);
  const auto lines = std::count(csv.begin(), csv.end(), '\n');
  CHECK(lines == 1 + 4 * static_cast<long>(rep.supplier.size() + rep.active.size() + rep.consumer.size()) + 5);
  CHECK(csv.rfind("agent,id,stream,value\n", 0) == 0);
}
