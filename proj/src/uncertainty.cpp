#include "ccgas/uncertainty.hpp"

#include "ccgas/error.hpp"

#include <boost/math/distributions/normal.hpp>

#include <Eigen/Eigenvalues>

#include <cmath>
#include <numbers>
#include <random>

namespace ccgas {

namespace {

const char* kModule = "uncertainty";

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double unit_open(std::uint64_t bits) {
  // (0, 1): 53 random bits offset by half an ulp.
  return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

}  // namespace

std::string_view to_string(Distribution d) {
  return d == Distribution::gaussian ? "gaussian" : "distribution-free";
}

Distribution distribution_from_string(std::string_view s) {
  if (s == "gaussian") return Distribution::gaussian;
  if (s == "distribution-free" || s == "distribution_free") return Distribution::distribution_free;
  throw ParseError(kModule, "unknown distribution '" + std::string(s) + "'");
}

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw ValidationError(kModule, "quantile level must lie in (0,1)");
  return boost::math::quantile(boost::math::normal(), p);
}

double safety_parameter(double epsilon_hat, Distribution d) {
  if (!(epsilon_hat > 0.0 && epsilon_hat < 1.0))
    throw ValidationError(kModule, "per-constraint budget must lie in (0,1)");
  if (d == Distribution::gaussian) return normal_quantile(1.0 - epsilon_hat);
  return std::sqrt((1.0 - epsilon_hat) / epsilon_hat);
}

MatrixXd symmetric_factor(const MatrixXd& cov) {
  if (cov.rows() != cov.cols()) throw DimensionError(kModule, "covariance must be square");
  const Index n = cov.rows();
  if (n == 0) return cov;
  if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, cov.cwiseAbs().maxCoeff()))
    throw ValidationError(kModule, "covariance is not symmetric");
  const MatrixXd off = cov - MatrixXd(cov.diagonal().asDiagonal());
  if (off.cwiseAbs().maxCoeff() == 0.0) {
    if ((cov.diagonal().array() < 0.0).any()) throw ValidationError(kModule, "covariance has negative variance");
    return cov.diagonal().cwiseSqrt().asDiagonal();
  }
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(cov);
  VectorXd vals = eig.eigenvalues();
  const double scale = std::max(vals.cwiseAbs().maxCoeff(), 1e-300);
  if (vals.minCoeff() < -1e-10 * scale)
    throw ValidationError(kModule, "covariance is not positive semidefinite (eigenvalue " +
                                       std::to_string(vals.minCoeff()) + ")");
  vals = vals.cwiseMax(0.0);
  MatrixXd F = eig.eigenvectors() * vals.cwiseSqrt().asDiagonal() * eig.eigenvectors().transpose();
  F = 0.5 * (F + F.transpose());
  // Zero-variance nodes get exactly zero rows and columns.
  for (Index k = 0; k < n; ++k)
    if (cov(k, k) == 0.0) {
      F.row(k).setZero();
      F.col(k).setZero();
    }
  return F;
}

UncertaintyModel build_uncertainty(const VectorXd& mean, const MatrixXd& cov, double epsilon,
                                   Index num_constraints, Distribution d) {
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw ValidationError(kModule, "epsilon must lie in (0,1)");
  if (cov.rows() != mean.size() || cov.cols() != mean.size())
    throw DimensionError(kModule, "covariance does not match the extraction vector");
  if (num_constraints < 0) throw ValidationError(kModule, "negative constraint count");
  UncertaintyModel u;
  u.mean = mean;
  u.covariance = cov;
  u.factor = symmetric_factor(cov);
  for (Index k = 0; k < cov.rows(); ++k)
    if (cov(k, k) > 0.0) u.stochastic.push_back(k);
  u.epsilon = epsilon;
  u.distribution = d;
  return with_constraint_count(u, num_constraints);
}

UncertaintyModel build_uncertainty(const GasNetwork& net, double epsilon, Index num_constraints, Distribution d) {
  return build_uncertainty(net.extraction_mean(), net.covariance(), epsilon, num_constraints, d);
}

UncertaintyModel with_constraint_count(const UncertaintyModel& unc, Index num_constraints) {
  UncertaintyModel u = unc;
  u.num_constraints = num_constraints;
  u.epsilon_hat = num_constraints > 0 ? u.epsilon / static_cast<double>(num_constraints) : u.epsilon;
  u.safety = safety_parameter(u.epsilon_hat, u.distribution);
  return u;
}

UncertaintyModel with_safety(const UncertaintyModel& unc, double z) {
  if (!(z >= 0.0)) throw ValidationError(kModule, "safety parameter must be non-negative");
  UncertaintyModel u = unc;
  u.safety = z;
  return u;
}

VectorXd sample_error(const UncertaintyModel& unc, std::uint64_t seed, std::uint64_t index) {
  const Index n = unc.mean.size();
  std::mt19937_64 gen(splitmix64(seed ^ splitmix64(index + 0x632be59bd9b4e019ULL)));
  VectorXd eta(n);
  for (Index k = 0; k < n; k += 2) {
    const double u1 = unit_open(gen());
    const double u2 = unit_open(gen());
    const double r = std::sqrt(-2.0 * std::log(u1));
    eta(k) = r * std::cos(2.0 * std::numbers::pi * u2);
    if (k + 1 < n) eta(k + 1) = r * std::sin(2.0 * std::numbers::pi * u2);
  }
  return unc.factor * eta;
}

MatrixXd sample_errors(const UncertaintyModel& unc, Index count, std::uint64_t seed) {
  if (count < 1) throw ValidationError(kModule, "sample count must be positive");
  MatrixXd out(unc.mean.size(), count);
  for (Index s = 0; s < count; ++s) out.col(s) = sample_error(unc, seed, static_cast<std::uint64_t>(s));
  return out;
}

}  // namespace ccgas
