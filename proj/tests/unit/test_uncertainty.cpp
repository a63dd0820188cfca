#include "ccgas/error.hpp"
#include "ccgas/uncertainty.hpp"

#include "fixtures.hpp"

#include <doctest.h>

#include <boost/math/distributions/normal.hpp>

#include <cmath>

using namespace ccgas;
using namespace fixtures;

TEST_CASE("uncertainty: safety parameters") {
  const boost::math::normal_distribution<double> phi;
  for (double p : {0.001, 0.05, 0.3, 0.9}) CHECK(normal_quantile(p) == doctest::Approx(quantile(phi, p)).epsilon(1e-12));
  CHECK(safety_parameter(0.05, Distribution::gaussian) == doctest::Approx(1.6448536269514722));
  CHECK(safety_parameter(0.05, Distribution::distribution_free) == doctest::Approx(std::sqrt(19.0)));
  CHECK_THROWS_AS(safety_parameter(0.0, Distribution::gaussian), ValidationError);
  CHECK(distribution_from_string(to_string(Distribution::distribution_free)) == Distribution::distribution_free);
  CHECK_THROWS_AS(distribution_from_string("cauchy"), ParseError);
}

TEST_CASE("uncertainty: Bonferroni split") {
  const GasNetwork net = small_mesh();
  const UncertaintyModel u = build_uncertainty(net, 0.1, 20);
  CHECK(u.epsilon_hat == doctest::Approx(0.005));
  CHECK(u.safety == doctest::Approx(normal_quantile(0.995)));
  CHECK(u.stochastic == std::vector<Index>{1, 3, 4});
  const UncertaintyModel v = with_constraint_count(u, 10);
  CHECK(v.epsilon_hat == doctest::Approx(0.01));
  CHECK(with_safety(u, 0.0).safety == 0.0);
  CHECK_THROWS_AS(build_uncertainty(net, 1.0, 3), ValidationError);
  CHECK_THROWS_AS(with_safety(u, -1.0), ValidationError);
}

TEST_CASE("uncertainty: symmetric factor of singular covariances") {
  MatrixXd S(3, 3);
  S << 0, 0, 0, 0, 4, 1, 0, 1, 2;
  const MatrixXd F = symmetric_factor(S);
  CHECK((F - F.transpose()).norm() <= 1e-14);
  CHECK((F * F.transpose() - S).norm() <= 1e-12);
  CHECK(F.row(0).norm() == 0.0);
  MatrixXd bad = S;
  bad(1, 1) = -1.0;
  CHECK_THROWS_AS(symmetric_factor(bad), ValidationError);
  MatrixXd indefinite(2, 2);
  indefinite << 1, 2, 2, 1;
  CHECK_THROWS_AS(symmetric_factor(indefinite), ValidationError);
}

TEST_CASE("uncertainty: samples are reproducible and have the right moments") {
  NetworkData d = small_mesh().data();
  d.correlation = MatrixXd::Identity(6, 6);
  (*d.correlation)(1, 3) = (*d.correlation)(3, 1) = 0.6;
  const GasNetwork net(std::move(d));
  const UncertaintyModel u = build_uncertainty(net, 0.05, 10);
  const Index S = 40000;
  const MatrixXd X = sample_errors(u, S, 11);
  CHECK(X == sample_errors(u, S, 11));
  CHECK(X != sample_errors(u, S, 12));
  // Index-addressed: sample 17 does not depend on how many were drawn.
  CHECK(X.col(17) == sample_error(u, 11, 17));
  CHECK(X.row(0).cwiseAbs().maxCoeff() == 0.0);
  const VectorXd mean = X.rowwise().mean();
  const MatrixXd C = (X.colwise() - mean) * (X.colwise() - mean).transpose() / static_cast<double>(S - 1);
  const MatrixXd& Sig = u.covariance;
  for (Index i = 0; i < 6; ++i) {
    CHECK(std::abs(mean(i)) <= 4.0 * std::sqrt(Sig(i, i) / static_cast<double>(S)) + 1e-15);
    for (Index j = 0; j < 6; ++j) {
      const double se = std::sqrt((Sig(i, i) * Sig(j, j) + Sig(i, j) * Sig(i, j)) / static_cast<double>(S));
      CHECK(std::abs(C(i, j) - Sig(i, j)) <= 4.0 * se + 1e-15);
    }
  }
  CHECK_THROWS_AS(sample_errors(u, 0, 1), ValidationError);
}
