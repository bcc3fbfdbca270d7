#pragma once

#include "gmmproj/diagnostics.hpp"
#include "gmmproj/rng.hpp"
#include "gmmproj/types.hpp"

#include <unistd.h>

#include <filesystem>
#include <string>
#include <vector>

namespace gmmproj::testing {

inline Vector vec2(double x, double y) {
  Vector v(2);
  v << x, y;
  return v;
}

inline Matrix random_matrix(Index rows, Index cols, Rng& rng) {
  Matrix m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
  return m;
}

inline Vector random_vector(Index n, Rng& rng, double scale = 1.0) {
  Vector v(n);
  for (Index i = 0; i < n; ++i) v(i) = scale * rng.normal();
  return v;
}

// Well-conditioned SPD matrix: A A^T / D + floor * I.
inline Matrix random_spd(Index d, Rng& rng, double floor = 0.1) {
  const Matrix a = random_matrix(d, d, rng);
  Matrix s = a * a.transpose() / static_cast<double>(d);
  s.diagonal().array() += floor;
  return 0.5 * (s + s.transpose());
}

inline Gaussian random_gaussian(Index d, Rng& rng, double mean_scale = 2.0) {
  return Gaussian(random_vector(d, rng, mean_scale), random_spd(d, rng));
}

inline MixtureModel random_mixture(Index d, int k, Rng& rng, double mean_scale = 3.0) {
  std::vector<Component> comps;
  double total = 0.0;
  std::vector<double> w(static_cast<std::size_t>(k));
  for (auto& x : w) total += (x = 0.2 + rng.uniform());
  for (int i = 0; i < k; ++i) {
    comps.push_back({w[static_cast<std::size_t>(i)] / total, random_gaussian(d, rng, mean_scale)});
  }
  return MixtureModel(std::move(comps));
}

// Random column-orthonormal D x d basis from a QR factorization.
inline ProjectionMatrix random_projection(Index dim, Index d, Rng& rng) {
  const Matrix q = Eigen::HouseholderQR<Matrix>(random_matrix(dim, dim, rng)).householderQ();
  Matrix basis = q.leftCols(d);
  normalize_column_signs(basis);
  Vector ev = Vector::LinSpaced(d, static_cast<double>(d), 1.0);
  return ProjectionMatrix(basis, ev);
}

inline Gaussian isotropic(Index d, double var = 1.0) {
  return Gaussian(Vector::Zero(d), var * Matrix::Identity(d, d));
}

inline double max_rel_diff(const Matrix& a, const Matrix& b) {
  return (a - b).cwiseAbs().maxCoeff() / std::max(1e-300, b.cwiseAbs().maxCoeff());
}

// Collects warnings for the lifetime of the object.
class WarningCapture {
 public:
  WarningCapture()
      : previous_(set_warning_sink([this](std::string_view m) { messages.emplace_back(m); })) {}
  ~WarningCapture() { set_warning_sink(previous_); }
  std::vector<std::string> messages;

 private:
  WarningSink previous_;
};

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("gmmproj_" + tag + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace gmmproj::testing
