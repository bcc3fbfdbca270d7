#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <string>
#include <vector>

namespace gmmproj {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline constexpr double kSymmetryTolerance = 1e-10;
inline constexpr double kPsdTolerance = 1e-9;
inline constexpr double kWeightSumTolerance = 1e-9;
inline constexpr double kWeightRenormalizeLimit = 1e-6;
inline constexpr double kOrthonormalTolerance = 1e-10;

// Checks symmetry (relative to the largest entry) and positive
// semidefiniteness: smallest eigenvalue >= -1e-9 * max(1, largest).
// Throws ValidationError naming `what`.
void validate_covariance(const Matrix& cov, const std::string& what);

// Multivariate normal: mean + symmetric PSD covariance.
class Gaussian {
 public:
  Gaussian(Vector mean, Matrix cov);

  // Skips the PSD check; for values that are symmetric PSD by construction
  // (projections, aggregates, fitted covariances).
  static Gaussian trusted(Vector mean, Matrix cov);

  Index dim() const { return mean_.size(); }
  const Vector& mean() const { return mean_; }
  const Matrix& cov() const { return cov_; }

 private:
  Gaussian() = default;
  Vector mean_;
  Matrix cov_;
};

struct Component {
  double weight = 0.0;
  Gaussian gaussian;
};

// Convex combination of Gaussians sharing one dimension.
class MixtureModel {
 public:
  // Weights drifting from 1 by at most 1e-6 are renormalized; larger drift
  // is a validation error.
  explicit MixtureModel(std::vector<Component> components);

  static MixtureModel single(Gaussian g);

  Index dim() const { return components_.front().gaussian.dim(); }
  std::size_t size() const { return components_.size(); }
  const std::vector<Component>& components() const { return components_; }
  const Component& operator[](std::size_t k) const { return components_[k]; }
  Vector weights() const;

 private:
  std::vector<Component> components_;
};

// D x d column-orthonormal basis with its eigenvalues (descending).
class ProjectionMatrix {
 public:
  ProjectionMatrix(Matrix basis, Vector eigenvalues);

  Index input_dim() const { return basis_.rows(); }
  Index output_dim() const { return basis_.cols(); }
  const Matrix& basis() const { return basis_; }
  const Vector& eigenvalues() const { return eigenvalues_; }

  static ProjectionMatrix identity(Index dim);

 private:
  Matrix basis_;
  Vector eigenvalues_;
};

// Flips column signs so the largest-magnitude entry of each column is
// positive (ties resolved towards the lowest row index).
void normalize_column_signs(Matrix& basis);

class LabeledDataset {
 public:
  LabeledDataset(Matrix samples, std::vector<int> labels,
                 std::vector<std::string> label_names);

  Index size() const { return samples_.rows(); }
  Index dim() const { return samples_.cols(); }
  std::size_t num_classes() const { return label_names_.size(); }
  const Matrix& samples() const { return samples_; }
  const std::vector<int>& labels() const { return labels_; }
  const std::vector<std::string>& label_names() const { return label_names_; }

  std::vector<std::size_t> class_counts() const;
  Matrix class_samples(int label) const;

 private:
  Matrix samples_;
  std::vector<int> labels_;
  std::vector<std::string> label_names_;
};

// Per-class importance weights, non-negative and summing to one.
class ImportanceWeights {
 public:
  explicit ImportanceWeights(Vector tau);

  static ImportanceWeights equal(std::size_t classes);
  static ImportanceWeights from_counts(const std::vector<std::size_t>& counts);
  // Divides a non-negative, not-all-zero vector by its sum.
  static ImportanceWeights normalized(const Vector& raw);

  std::size_t size() const { return static_cast<std::size_t>(tau_.size()); }
  const Vector& values() const { return tau_; }
  double operator[](std::size_t i) const { return tau_(static_cast<Index>(i)); }

 private:
  Vector tau_;
};

struct Bounds {
  double xmin = 0.0;
  double xmax = 0.0;
  double ymin = 0.0;
  double ymax = 0.0;

  Bounds united(const Bounds& other) const;
};

struct Resolution {
  Index nx = 512;
  Index ny = 512;
};

// Uniform 2D raster. Cell (i, j) covers
// [x0 + i*dx, x0 + (i+1)*dx] x [y0 + j*dy, y0 + (j+1)*dy];
// values(i, j) is the density at its center.
class DensityGrid {
 public:
  DensityGrid(double x0, double y0, double dx, double dy, Matrix values);
  static DensityGrid over(const Bounds& bounds, Matrix values);

  double x0() const { return x0_; }
  double y0() const { return y0_; }
  double dx() const { return dx_; }
  double dy() const { return dy_; }
  Index nx() const { return values_.rows(); }
  Index ny() const { return values_.cols(); }
  const Matrix& values() const { return values_; }

  double center_x(Index i) const { return x0_ + (static_cast<double>(i) + 0.5) * dx_; }
  double center_y(Index j) const { return y0_ + (static_cast<double>(j) + 0.5) * dy_; }
  double cell_area() const { return dx_ * dy_; }
  double mass() const { return values_.sum() * cell_area(); }
  Bounds bounds() const;

  bool same_geometry(const DensityGrid& other) const;
  // Rescales values to unit mass. Throws NumericalError on zero mass.
  DensityGrid normalized() const;

 private:
  double x0_, y0_, dx_, dy_;
  Matrix values_;
};

}  // namespace gmmproj
