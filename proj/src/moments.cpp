#include "gmmproj/moments.hpp"

#include "gmmproj/error.hpp"
#include "gmmproj/linalg.hpp"

namespace gmmproj {

namespace {

// Adds w * (cov + delta * dj) into a running sum with an error-free
// (TwoSum) carry.
__attribute__((target_clones("avx2", "default")))
void compensated_add(double* __restrict sum, double* __restrict carry, const double* __restrict cov,
                     const double* __restrict delta, double dj, double w, Index n) {
  for (Index i = 0; i < n; ++i) {
    const double t = w * (cov[i] + delta[i] * dj);
    const double next = sum[i] + t;
    const double back = next - sum[i];
    carry[i] += (sum[i] - (next - back)) + (t - back);
    sum[i] = next;
  }
}

}  // namespace

Gaussian empirical_moments(const Matrix& samples) {
  const Index n = samples.rows();
  if (n < 2) {
    throw ValidationError("insufficient_samples",
                          "empirical_moments: need at least 2 samples, got " + std::to_string(n));
  }
  require(samples.allFinite(), "non_finite", "empirical_moments: samples contain non-finite values");
  const Vector mean = samples.colwise().mean().transpose();
  const Matrix centered = samples.rowwise() - mean.transpose();
  Matrix cov = Matrix::Zero(samples.cols(), samples.cols());
  cov.selfadjointView<Eigen::Lower>().rankUpdate(centered.transpose(), 1.0 / static_cast<double>(n - 1));
  cov.triangularView<Eigen::StrictlyUpper>() = cov.transpose();
  return Gaussian::trusted(mean, std::move(cov));
}

AggregatedMoments aggregate_mixture(const MixtureModel& m) {
  const Index d = m.dim();
  Vector mean = Vector::Zero(d);
  for (const auto& c : m.components()) mean += c.weight * c.gaussian.mean();

  Matrix cov(d, d);
  if (d > kCompensatedSumDim) {
    // Lower triangle in panels of columns; each panel's running sums stay in cache
    // while every component streams through it.
    constexpr Index kPanel = 16;
    std::vector<Vector> deltas;
    for (const auto& c : m.components()) deltas.push_back(c.gaussian.mean() - mean);
    Matrix sum(d, kPanel), carry(d, kPanel);
    for (Index j0 = 0; j0 < d; j0 += kPanel) {
      const Index width = std::min(kPanel, d - j0);
      sum.setZero();
      carry.setZero();
      for (std::size_t k = 0; k < m.size(); ++k) {
        const auto& c = m.components()[k];
        for (Index jj = 0; jj < width; ++jj) {
          const Index j = j0 + jj;
          compensated_add(sum.col(jj).data(), carry.col(jj).data(), c.gaussian.cov().col(j).data() + j,
                          deltas[k].data() + j, deltas[k](j), c.weight, d - j);
        }
      }
      for (Index jj = 0; jj < width; ++jj) {
        const Index len = d - j0 - jj;
        cov.col(j0 + jj).tail(len) = sum.col(jj).head(len) + carry.col(jj).head(len);
      }
    }
    mirror_lower(cov);
    return {std::move(mean), std::move(cov)};
  }
  cov = Matrix::Zero(d, d);
  for (const auto& c : m.components()) {
    const Vector delta = c.gaussian.mean() - mean;
    cov += c.weight * c.gaussian.cov();
    cov.noalias() += c.weight * delta * delta.transpose();
  }
  cov = (0.5 * (cov + cov.transpose())).eval();
  return {std::move(mean), std::move(cov)};
}

}  // namespace gmmproj
