#pragma once

#include "gmmproj/types.hpp"

namespace gmmproj {

// Exact mean and covariance of a mixture distribution.
struct AggregatedMoments {
  Vector mean;
  Matrix cov;

  Index dim() const { return mean.size(); }
};

// Sample mean and unbiased (1/(N-1)) covariance. Requires N >= 2.
Gaussian empirical_moments(const Matrix& samples);

// Mean = sum w_k mu_k; covariance = sum w_k [Sigma_k + (mu_k - mean)(mu_k - mean)^T].
// Summation is compensated when D > 500.
AggregatedMoments aggregate_mixture(const MixtureModel& m);

// Dimension above which aggregation switches to compensated summation.
inline constexpr Index kCompensatedSumDim = 500;

}  // namespace gmmproj
