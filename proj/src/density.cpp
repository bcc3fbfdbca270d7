#include "gmmproj/density.hpp"

#include "gmmproj/error.hpp"
#include "gmmproj/linalg.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace gmmproj {

namespace {

constexpr Index kRowBlock = 1024;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void check_point(Index expected, Index got) {
  require(expected == got, "dimension_mismatch",
          "point has length " + std::to_string(got) + ", model dimension is " +
              std::to_string(expected));
}

}  // namespace

GaussianFactor::GaussianFactor(const Gaussian& g)
    : mean_(g.mean()), lower_(regularized_cholesky(g.cov())) {
  const double d = static_cast<double>(mean_.size());
  log_norm_ = -0.5 * d * std::log(2.0 * std::numbers::pi) -
              lower_.diagonal().array().log().sum();
}

double GaussianFactor::log_pdf(const Eigen::Ref<const Vector>& x) const {
  check_point(dim(), x.size());
  const Vector z = lower_.triangularView<Eigen::Lower>().solve(x - mean_);
  return log_norm_ - 0.5 * z.squaredNorm();
}

Vector GaussianFactor::log_pdf_rows(const Matrix& points) const {
  check_point(dim(), points.cols());
  const Index n = points.rows();
  Vector out(n);
  const Index blocks = (n + kRowBlock - 1) / kRowBlock;
#pragma omp parallel for schedule(static)
  for (Index b = 0; b < blocks; ++b) {
    const Index start = b * kRowBlock;
    const Index len = std::min(kRowBlock, n - start);
    Matrix diff = (points.middleRows(start, len).rowwise() - mean_.transpose()).transpose();
    lower_.triangularView<Eigen::Lower>().solveInPlace(diff);
    out.segment(start, len) =
        (log_norm_ - 0.5 * diff.colwise().squaredNorm().array()).matrix().transpose();
  }
  return out;
}

MixtureDensity::MixtureDensity(const MixtureModel& m) : dim_(m.dim()) {
  factors_.reserve(m.size());
  log_weights_.reserve(m.size());
  for (const auto& c : m.components()) {
    factors_.emplace_back(c.gaussian);
    log_weights_.push_back(c.weight > 0.0 ? std::log(c.weight) : kNegInf);
  }
}

double MixtureDensity::log_pdf(const Eigen::Ref<const Vector>& x) const {
  check_point(dim_, x.size());
  double best = kNegInf;
  std::vector<double> terms(factors_.size(), kNegInf);
  for (std::size_t k = 0; k < factors_.size(); ++k) {
    if (log_weights_[k] == kNegInf) continue;
    terms[k] = log_weights_[k] + factors_[k].log_pdf(x);
    best = std::max(best, terms[k]);
  }
  if (best == kNegInf) return kNegInf;
  double acc = 0.0;
  for (double t : terms) {
    if (t != kNegInf) acc += std::exp(t - best);
  }
  return best + std::log(acc);
}

double MixtureDensity::pdf(const Eigen::Ref<const Vector>& x) const { return std::exp(log_pdf(x)); }

Matrix MixtureDensity::weighted_component_log_pdf(const Matrix& points) const {
  check_point(dim_, points.cols());
  Matrix out(points.rows(), static_cast<Index>(factors_.size()));
  for (std::size_t k = 0; k < factors_.size(); ++k) {
    const auto col = static_cast<Index>(k);
    if (log_weights_[k] == kNegInf) {
      out.col(col).setConstant(kNegInf);
    } else {
      out.col(col) = factors_[k].log_pdf_rows(points).array() + log_weights_[k];
    }
  }
  return out;
}

Vector MixtureDensity::log_pdf_rows(const Matrix& points) const {
  return log_sum_exp_rows(weighted_component_log_pdf(points));
}

Vector log_sum_exp_rows(const Matrix& logs) {
  Vector out(logs.rows());
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < logs.rows(); ++i) {
    const double best = logs.row(i).maxCoeff();
    if (best == kNegInf || !std::isfinite(best)) {
      out(i) = best;
      continue;
    }
    double acc = 0.0;
    for (Index k = 0; k < logs.cols(); ++k) {
      const double t = logs(i, k);
      if (t != kNegInf) acc += std::exp(t - best);
    }
    out(i) = best + std::log(acc);
  }
  return out;
}

double gaussian_log_pdf(const Gaussian& g, const Vector& x) { return GaussianFactor(g).log_pdf(x); }

double gaussian_pdf(const Gaussian& g, const Vector& x) { return std::exp(gaussian_log_pdf(g, x)); }

double mixture_log_pdf(const MixtureModel& m, const Vector& x) { return MixtureDensity(m).log_pdf(x); }

double mixture_pdf(const MixtureModel& m, const Vector& x) { return std::exp(mixture_log_pdf(m, x)); }

}  // namespace gmmproj
