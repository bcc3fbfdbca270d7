#pragma once

#include "gmmproj/moments.hpp"
#include "gmmproj/types.hpp"

#include <optional>
#include <span>
#include <vector>

namespace gmmproj {

// Per-class aggregated moments combined under importance weights into the
// uncertainty-aware covariance:
//   mean_bar  = sum tau_i mu_i
//   centering = mean_bar mean_bar^T
//   sigma_bar = sum tau_i Sigma_i
//   sigma_mu  = sum tau_i mu_i mu_i^T
//   sigma_ua  = sigma_mu + sigma_bar - centering
class WeightedMomentSet {
 public:
  WeightedMomentSet(const std::vector<AggregatedMoments>& classes, ImportanceWeights tau);

  Index dim() const { return mean_bar_.size(); }
  const ImportanceWeights& tau() const { return tau_; }
  const Vector& mean_bar() const { return mean_bar_; }
  const Matrix& centering() const { return centering_; }
  const Matrix& sigma_bar() const { return sigma_bar_; }
  const Matrix& sigma_mu() const { return sigma_mu_; }
  const Matrix& sigma_ua() const { return sigma_ua_; }

 private:
  ImportanceWeights tau_;
  Vector mean_bar_;
  Matrix centering_, sigma_bar_, sigma_mu_, sigma_ua_;
};

WeightedMomentSet build_weighted_moments(const std::vector<AggregatedMoments>& moments,
                                         const ImportanceWeights& tau);

// Leading d eigenvectors of a symmetric matrix, sign-normalized. Emits a
// warning when near-equal eigenvalues straddle the d-cut.
ProjectionMatrix principal_projection(const Matrix& sym, Index d);

ProjectionMatrix projection_from_ua(const WeightedMomentSet& wms, Index d);

// Y ~ N(P^T mu, P^T Sigma P). No centering is applied.
Gaussian project_gaussian(const Gaussian& g, const ProjectionMatrix& p);

// Component-wise projection; weights are copied unchanged.
MixtureModel project_mixture(const MixtureModel& m, const ProjectionMatrix& p);

// Rows mapped to P^T (x - center); center defaults to zero.
Matrix project_samples(const Matrix& samples, const ProjectionMatrix& p,
                       const std::optional<Vector>& center = std::nullopt);

// Translates every component mean by -shift (display-time centering).
MixtureModel translate_mixture(const MixtureModel& m, const Vector& shift);

}  // namespace gmmproj
