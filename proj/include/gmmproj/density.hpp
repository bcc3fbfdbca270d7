#pragma once

#include "gmmproj/types.hpp"

#include <vector>

namespace gmmproj {

// Cached Cholesky factor and normalizer of one Gaussian.
class GaussianFactor {
 public:
  explicit GaussianFactor(const Gaussian& g);

  Index dim() const { return mean_.size(); }
  double log_pdf(const Eigen::Ref<const Vector>& x) const;
  // Log density of every row of `points` (N x D).
  Vector log_pdf_rows(const Matrix& points) const;
  const Matrix& cholesky_lower() const { return lower_; }
  double log_normalizer() const { return log_norm_; }

 private:
  Vector mean_;
  Matrix lower_;
  double log_norm_;
};

// Log-space mixture density with all component factors cached.
class MixtureDensity {
 public:
  explicit MixtureDensity(const MixtureModel& m);

  Index dim() const { return dim_; }
  std::size_t size() const { return factors_.size(); }
  double log_pdf(const Eigen::Ref<const Vector>& x) const;
  double pdf(const Eigen::Ref<const Vector>& x) const;
  // N x K matrix of log(w_k) + log N(x_n | k); zero-weight columns are -inf.
  Matrix weighted_component_log_pdf(const Matrix& points) const;
  // Log-sum-exp over components for every row.
  Vector log_pdf_rows(const Matrix& points) const;

 private:
  Index dim_;
  std::vector<GaussianFactor> factors_;
  std::vector<double> log_weights_;
};

double gaussian_log_pdf(const Gaussian& g, const Vector& x);
double gaussian_pdf(const Gaussian& g, const Vector& x);
double mixture_log_pdf(const MixtureModel& m, const Vector& x);
double mixture_pdf(const MixtureModel& m, const Vector& x);

// Row-wise log-sum-exp of an N x K matrix.
Vector log_sum_exp_rows(const Matrix& logs);

}  // namespace gmmproj
