#include "gmmproj/projection.hpp"

#include "gmmproj/diagnostics.hpp"
#include "gmmproj/error.hpp"
#include "gmmproj/linalg.hpp"

#include <cmath>
#include <sstream>

namespace gmmproj {

namespace {

constexpr double kTieTolerance = 1e-9;

void check_projection_input(Index got, const ProjectionMatrix& p, const char* what) {
  require(got == p.input_dim(), "dimension_mismatch",
          std::string(what) + ": input has dimension " + std::to_string(got) +
              ", projection expects " + std::to_string(p.input_dim()));
}

}  // namespace

WeightedMomentSet::WeightedMomentSet(const std::vector<AggregatedMoments>& classes, ImportanceWeights tau)
    : tau_(std::move(tau)) {
  require(!classes.empty(), "empty_input", "build_weighted_moments: no classes");
  require(classes.size() == tau_.size(), "length_mismatch",
          "build_weighted_moments: " + std::to_string(classes.size()) + " classes but " +
              std::to_string(tau_.size()) + " weights");
  const Index d = classes.front().dim();
  for (const auto& c : classes) {
    require(c.dim() == d && c.cov.rows() == d && c.cov.cols() == d, "dimension_mismatch",
            "build_weighted_moments: classes have different dimensions");
  }
  const auto n = static_cast<Index>(classes.size());

  Matrix means(d, n);
  for (Index i = 0; i < n; ++i) means.col(i) = classes[static_cast<std::size_t>(i)].mean;
  const Vector& tau_v = tau_.values();
  mean_bar_ = means * tau_v;

  // Lower triangles first, one column at a time so each class covariance
  // is streamed once, then mirrored.
  sigma_mu_.resize(d, d);
  sigma_mu_.triangularView<Eigen::Lower>() = (means * tau_v.asDiagonal()) * means.transpose();
  centering_.resize(d, d);
  sigma_bar_.resize(d, d);
  sigma_ua_.resize(d, d);
  for (Index j = 0; j < d; ++j) {
    const Index len = d - j;
    auto bar = sigma_bar_.col(j).tail(len);
    bar.setZero();
    for (Index i = 0; i < n; ++i) bar += tau_v(i) * classes[static_cast<std::size_t>(i)].cov.col(j).tail(len);
    centering_.col(j).tail(len) = mean_bar_.tail(len) * mean_bar_(j);
    sigma_ua_.col(j).tail(len) = sigma_mu_.col(j).tail(len) + bar - centering_.col(j).tail(len);
  }
  for (Matrix* m : {&sigma_mu_, &centering_, &sigma_bar_, &sigma_ua_}) mirror_lower(*m);
}

WeightedMomentSet build_weighted_moments(const std::vector<AggregatedMoments>& moments,
                                         const ImportanceWeights& tau) {
  return WeightedMomentSet(moments, tau);
}

ProjectionMatrix principal_projection(const Matrix& sym, Index d) {
  const Index n = sym.rows();
  require(d >= 1 && d <= n, "invalid_dimension",
          "projection: target dimension " + std::to_string(d) + " outside [1, " +
              std::to_string(n) + "]");
  // One extra eigenvalue reveals ties across the cut.
  const Index want = d < n ? d + 1 : d;
  SymmetricEigenpairs eig = top_eigenpairs(sym, want);
  if (want > d) {
    const double last = eig.values(d - 1);
    const double next = eig.values(d);
    const double scale = std::max({std::abs(last), std::abs(next), 1e-300});
    if (std::abs(last - next) <= kTieTolerance * scale) {
      std::ostringstream msg;
      msg << "eigenvalues " << last << " and " << next
          << " are numerically tied across the projection cut at d=" << d
          << "; the chosen subspace is not unique";
      warn(msg.str());
    }
  }
  Matrix basis = eig.vectors.leftCols(d);
  normalize_column_signs(basis);
  return ProjectionMatrix(std::move(basis), eig.values.head(d));
}

ProjectionMatrix projection_from_ua(const WeightedMomentSet& wms, Index d) {
  return principal_projection(wms.sigma_ua(), d);
}

Gaussian project_gaussian(const Gaussian& g, const ProjectionMatrix& p) {
  check_projection_input(g.dim(), p, "project_gaussian");
  const Matrix& basis = p.basis();
  Vector mean = basis.transpose() * g.mean();
  // (Sigma P)^T one covariance column at a time; Sigma is symmetric.
  const Matrix& sigma = g.cov();
  Matrix tmp(basis.cols(), sigma.cols());
  for (Index j = 0; j < sigma.cols(); ++j) tmp.col(j).noalias() = basis.transpose() * sigma.col(j);
  Matrix cov = tmp * basis;
  cov = (0.5 * (cov + cov.transpose())).eval();
  return Gaussian::trusted(std::move(mean), std::move(cov));
}

MixtureModel project_mixture(const MixtureModel& m, const ProjectionMatrix& p) {
  check_projection_input(m.dim(), p, "project_mixture");
  std::vector<Component> out;
  out.reserve(m.size());
  for (const auto& c : m.components()) out.push_back({c.weight, project_gaussian(c.gaussian, p)});
  return MixtureModel(std::move(out));
}

Matrix project_samples(const Matrix& samples, const ProjectionMatrix& p,
                       const std::optional<Vector>& center) {
  check_projection_input(samples.cols(), p, "project_samples");
  if (!center) return samples * p.basis();
  require(center->size() == samples.cols(), "dimension_mismatch",
          "project_samples: center has wrong length");
  return (samples.rowwise() - center->transpose()) * p.basis();
}

MixtureModel translate_mixture(const MixtureModel& m, const Vector& shift) {
  require(shift.size() == m.dim(), "dimension_mismatch", "translate_mixture: shift has wrong length");
  std::vector<Component> out;
  out.reserve(m.size());
  for (const auto& c : m.components()) {
    out.push_back({c.weight, Gaussian::trusted(c.gaussian.mean() - shift, c.gaussian.cov())});
  }
  return MixtureModel(std::move(out));
}

}  // namespace gmmproj
