#include "gmmproj/types.hpp"

#include "gmmproj/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace gmmproj {

namespace {

// Above this size the exact spectrum is replaced by a shifted Cholesky test.
constexpr Index kExactSpectrumLimit = 200;

bool all_finite(const Matrix& m) { return m.allFinite(); }

}  // namespace

void validate_covariance(const Matrix& cov, const std::string& what) {
  require(cov.rows() == cov.cols(), "dimension_mismatch", what + ": covariance is not square");
  require(all_finite(cov), "non_finite", what + ": covariance has non-finite entries");
  if (cov.size() == 0) return;

  const double scale = std::max(cov.cwiseAbs().maxCoeff(), 1e-300);
  const double asym = (cov - cov.transpose()).cwiseAbs().maxCoeff();
  require(asym <= kSymmetryTolerance * scale, "asymmetric_covariance",
          what + ": covariance is not symmetric");

  if (cov.rows() <= kExactSpectrumLimit) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(cov, Eigen::EigenvaluesOnly);
    const double lo = es.eigenvalues().minCoeff();
    const double hi = es.eigenvalues().maxCoeff();
    require(lo >= -kPsdTolerance * std::max(1.0, hi), "indefinite_covariance",
            what + ": covariance is not positive semidefinite");
    return;
  }
  // Gershgorin bound stands in for the largest eigenvalue.
  const double hi = cov.cwiseAbs().rowwise().sum().maxCoeff();
  Matrix shifted = cov;
  shifted.diagonal().array() += kPsdTolerance * std::max(1.0, hi);
  Eigen::LLT<Matrix> llt(shifted);
  require(llt.info() == Eigen::Success, "indefinite_covariance",
          what + ": covariance is not positive semidefinite");
}

Gaussian::Gaussian(Vector mean, Matrix cov) : mean_(std::move(mean)), cov_(std::move(cov)) {
  require(mean_.size() > 0, "empty_model", "Gaussian: dimension must be positive");
  require(cov_.rows() == mean_.size() && cov_.cols() == mean_.size(), "dimension_mismatch",
          "Gaussian: mean has length " + std::to_string(mean_.size()) +
              " but covariance is " + std::to_string(cov_.rows()) + "x" +
              std::to_string(cov_.cols()));
  require(mean_.allFinite(), "non_finite", "Gaussian: mean has non-finite entries");
  validate_covariance(cov_, "Gaussian");
}

Gaussian Gaussian::trusted(Vector mean, Matrix cov) {
  Gaussian g;
  g.mean_ = std::move(mean);
  g.cov_ = std::move(cov);
  return g;
}

MixtureModel::MixtureModel(std::vector<Component> components)
    : components_(std::move(components)) {
  require(!components_.empty(), "empty_model", "MixtureModel: needs at least one component");
  const Index d = components_.front().gaussian.dim();
  double sum = 0.0;
  for (const auto& c : components_) {
    require(c.gaussian.dim() == d, "dimension_mismatch",
            "MixtureModel: components have different dimensions");
    require(std::isfinite(c.weight) && c.weight >= 0.0, "invalid_weight",
            "MixtureModel: weights must be finite and non-negative");
    sum += c.weight;
  }
  const double drift = std::abs(sum - 1.0);
  require(drift <= kWeightRenormalizeLimit, "invalid_weight",
          "MixtureModel: weights sum to " + std::to_string(sum));
  if (drift > kWeightSumTolerance * 1e-3) {
    for (auto& c : components_) c.weight /= sum;
  }
}

MixtureModel MixtureModel::single(Gaussian g) {
  return MixtureModel({Component{1.0, std::move(g)}});
}

Vector MixtureModel::weights() const {
  Vector w(static_cast<Index>(components_.size()));
  for (std::size_t k = 0; k < components_.size(); ++k) w(static_cast<Index>(k)) = components_[k].weight;
  return w;
}

void normalize_column_signs(Matrix& basis) {
  for (Index c = 0; c < basis.cols(); ++c) {
    Index arg = 0;
    double best = -1.0;
    for (Index r = 0; r < basis.rows(); ++r) {
      const double a = std::abs(basis(r, c));
      if (a > best) {
        best = a;
        arg = r;
      }
    }
    if (basis.rows() > 0 && basis(arg, c) < 0.0) basis.col(c) = -basis.col(c);
  }
}

ProjectionMatrix::ProjectionMatrix(Matrix basis, Vector eigenvalues)
    : basis_(std::move(basis)), eigenvalues_(std::move(eigenvalues)) {
  const Index d = basis_.cols();
  require(d >= 1 && d <= basis_.rows(), "invalid_dimension",
          "ProjectionMatrix: need 1 <= d <= D");
  require(eigenvalues_.size() == d, "dimension_mismatch",
          "ProjectionMatrix: eigenvalue count differs from column count");
  require(basis_.allFinite() && eigenvalues_.allFinite(), "non_finite",
          "ProjectionMatrix: non-finite entries");
  const Matrix gram = basis_.transpose() * basis_;
  const double err = (gram - Matrix::Identity(d, d)).cwiseAbs().maxCoeff();
  require(err <= kOrthonormalTolerance, "not_orthonormal",
          "ProjectionMatrix: columns are not orthonormal");
  for (Index i = 1; i < d; ++i) {
    require(eigenvalues_(i) <= eigenvalues_(i - 1), "unsorted_eigenvalues",
            "ProjectionMatrix: eigenvalues must be descending");
  }
}

ProjectionMatrix ProjectionMatrix::identity(Index dim) {
  return ProjectionMatrix(Matrix::Identity(dim, dim), Vector::Zero(dim));
}

LabeledDataset::LabeledDataset(Matrix samples, std::vector<int> labels,
                               std::vector<std::string> label_names)
    : samples_(std::move(samples)), labels_(std::move(labels)),
      label_names_(std::move(label_names)) {
  require(static_cast<Index>(labels_.size()) == samples_.rows(), "dimension_mismatch",
          "LabeledDataset: label count differs from sample count");
  require(samples_.allFinite(), "non_finite", "LabeledDataset: samples contain non-finite values");
  const int classes = static_cast<int>(label_names_.size());
  std::vector<std::size_t> counts(label_names_.size(), 0);
  for (int l : labels_) {
    require(l >= 0 && l < classes, "invalid_label",
            "LabeledDataset: label " + std::to_string(l) + " has no name");
    ++counts[static_cast<std::size_t>(l)];
  }
  for (std::size_t c = 0; c < counts.size(); ++c) {
    require(counts[c] > 0, "empty_class", "LabeledDataset: class '" + label_names_[c] + "' has no samples");
  }
}

std::vector<std::size_t> LabeledDataset::class_counts() const {
  std::vector<std::size_t> counts(label_names_.size(), 0);
  for (int l : labels_) ++counts[static_cast<std::size_t>(l)];
  return counts;
}

Matrix LabeledDataset::class_samples(int label) const {
  std::vector<Index> rows;
  for (Index i = 0; i < size(); ++i) {
    if (labels_[static_cast<std::size_t>(i)] == label) rows.push_back(i);
  }
  Matrix out(static_cast<Index>(rows.size()), dim());
  for (std::size_t r = 0; r < rows.size(); ++r) out.row(static_cast<Index>(r)) = samples_.row(rows[r]);
  return out;
}

ImportanceWeights::ImportanceWeights(Vector tau) : tau_(std::move(tau)) {
  require(tau_.size() >= 1, "invalid_weights", "ImportanceWeights: empty");
  require(tau_.allFinite() && (tau_.array() >= 0.0).all(), "invalid_weights",
          "ImportanceWeights: entries must be finite and non-negative");
  require(std::abs(tau_.sum() - 1.0) <= kWeightSumTolerance, "invalid_weights",
          "ImportanceWeights: entries must sum to 1");
}

ImportanceWeights ImportanceWeights::equal(std::size_t classes) {
  require(classes >= 1, "invalid_weights", "ImportanceWeights: need at least one class");
  return ImportanceWeights(Vector::Constant(static_cast<Index>(classes), 1.0 / static_cast<double>(classes)));
}

ImportanceWeights ImportanceWeights::from_counts(const std::vector<std::size_t>& counts) {
  Vector raw(static_cast<Index>(counts.size()));
  for (std::size_t i = 0; i < counts.size(); ++i) raw(static_cast<Index>(i)) = static_cast<double>(counts[i]);
  return normalized(raw);
}

ImportanceWeights ImportanceWeights::normalized(const Vector& raw) {
  require(raw.size() >= 1, "invalid_weights", "ImportanceWeights: empty");
  require(raw.allFinite() && (raw.array() >= 0.0).all(), "invalid_weights",
          "ImportanceWeights: entries must be finite and non-negative");
  const double sum = raw.sum();
  require(sum > 0.0, "invalid_weights", "ImportanceWeights: entries sum to zero");
  return ImportanceWeights(raw / sum);
}

Bounds Bounds::united(const Bounds& o) const {
  return {std::min(xmin, o.xmin), std::max(xmax, o.xmax), std::min(ymin, o.ymin),
          std::max(ymax, o.ymax)};
}

DensityGrid::DensityGrid(double x0, double y0, double dx, double dy, Matrix values)
    : x0_(x0), y0_(y0), dx_(dx), dy_(dy), values_(std::move(values)) {
  require(std::isfinite(x0) && std::isfinite(y0), "non_finite", "DensityGrid: origin must be finite");
  require(std::isfinite(dx) && std::isfinite(dy) && dx > 0.0 && dy > 0.0, "invalid_grid",
          "DensityGrid: spacing must be positive");
  require(values_.rows() >= 1 && values_.cols() >= 1, "invalid_grid", "DensityGrid: empty raster");
  require(values_.allFinite() && (values_.array() >= 0.0).all(), "invalid_grid",
          "DensityGrid: values must be finite and non-negative");
}

DensityGrid DensityGrid::over(const Bounds& b, Matrix values) {
  require(b.xmax > b.xmin && b.ymax > b.ymin, "degenerate_bounds", "DensityGrid: bounds have zero extent");
  const double dx = (b.xmax - b.xmin) / static_cast<double>(values.rows());
  const double dy = (b.ymax - b.ymin) / static_cast<double>(values.cols());
  return DensityGrid(b.xmin, b.ymin, dx, dy, std::move(values));
}

Bounds DensityGrid::bounds() const {
  return {x0_, x0_ + dx_ * static_cast<double>(nx()), y0_, y0_ + dy_ * static_cast<double>(ny())};
}

bool DensityGrid::same_geometry(const DensityGrid& o) const {
  return nx() == o.nx() && ny() == o.ny() && x0_ == o.x0_ && y0_ == o.y0_ && dx_ == o.dx_ &&
         dy_ == o.dy_;
}

DensityGrid DensityGrid::normalized() const {
  const double m = mass();
  if (!(m > 0.0) || !std::isfinite(m)) {
    throw NumericalError("zero_mass", "DensityGrid: cannot normalize a grid with zero mass");
  }
  return DensityGrid(x0_, y0_, dx_, dy_, values_ / m);
}

}  // namespace gmmproj
