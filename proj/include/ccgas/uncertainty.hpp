#pragma once

#include "ccgas/network.hpp"

#include <cstdint>
#include <string_view>
#include <vector>

namespace ccgas {

enum class Distribution { gaussian, distribution_free };

std::string_view to_string(Distribution d);
Distribution distribution_from_string(std::string_view s);

/// Forecast-error model ξ ~ (0, Σ) around the mean extraction, with a uniform
/// Bonferroni split of the joint violation budget.
struct UncertaintyModel {
  VectorXd mean;           // nominal extraction δ
  MatrixXd covariance;     // Σ
  MatrixXd factor;         // F, symmetric with F·Fᵀ = Σ
  std::vector<Index> stochastic;  // nodes with positive variance
  double epsilon = 0.05;          // joint budget
  Index num_constraints = 0;      // constraints sharing the budget
  double epsilon_hat = 0.05;      // per-constraint budget ε / num_constraints
  double safety = 0.0;            // z(ε̂)
  Distribution distribution = Distribution::gaussian;
};

/// Standard normal quantile Φ⁻¹(p).
double normal_quantile(double p);

/// z(ε̂): Φ⁻¹(1 − ε̂) for Gaussian errors, √((1 − ε̂)/ε̂) for the
/// distribution-free bound.
double safety_parameter(double epsilon_hat, Distribution d);

/// Symmetric positive semidefinite square root of a covariance matrix.
/// Eigenvalues down to −1e−10·‖Σ‖ are clipped to zero; more negative ones
/// raise ValidationError.
MatrixXd symmetric_factor(const MatrixXd& covariance);

UncertaintyModel build_uncertainty(const VectorXd& mean, const MatrixXd& covariance, double epsilon,
                                   Index num_constraints, Distribution d = Distribution::gaussian);
UncertaintyModel build_uncertainty(const GasNetwork& net, double epsilon, Index num_constraints,
                                   Distribution d = Distribution::gaussian);

/// Copy of `unc` with the budget split over a different constraint count.
UncertaintyModel with_constraint_count(const UncertaintyModel& unc, Index num_constraints);
/// Copy of `unc` with a fixed safety parameter (e.g. 0 for deterministic policies).
UncertaintyModel with_safety(const UncertaintyModel& unc, double z);

/// Error realisation number `index` for `seed`: ξ = F·η with η standard
/// normal. Each index is generated independently of the others.
VectorXd sample_error(const UncertaintyModel& unc, std::uint64_t seed, std::uint64_t index);

/// S realisations as the columns of an N×S matrix.
MatrixXd sample_errors(const UncertaintyModel& unc, Index count, std::uint64_t seed);

}  // namespace ccgas
