#include "gmmproj/linalg.hpp"

#include "gmmproj/error.hpp"

#include <cblas.h>
#include <lapacke.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace gmmproj {

double diagonal_loading(const Matrix& cov, double eps) {
  return eps * cov.trace() / static_cast<double>(cov.rows());
}

Matrix regularized_cholesky(const Matrix& cov, double eps) {
  const double load = diagonal_loading(cov, eps);
  if (!(load > 0.0) || !std::isfinite(load)) {
    throw SingularModelError("covariance has non-positive trace; cannot regularize");
  }
  Matrix loaded = cov;
  loaded.diagonal().array() += load;
  Eigen::LLT<Matrix> llt(loaded);
  if (llt.info() != Eigen::Success) {
    throw SingularModelError("covariance is singular after diagonal regularization");
  }
  return llt.matrixL();
}

void mirror_lower(Matrix& m) {
  const Index n = m.rows();
  constexpr Index block = 64;
  for (Index jb = 0; jb < n; jb += block) {
    for (Index ib = jb; ib < n; ib += block) {
      const Index jend = std::min(jb + block, n);
      const Index iend = std::min(ib + block, n);
      // Contiguous writes down each upper column; the strided reads stay in one tile.
      for (Index i = ib; i < iend; ++i) {
        for (Index j = jb; j < std::min(jend, i); ++j) m(j, i) = m(i, j);
      }
    }
  }
}

namespace {

SymmetricEigenpairs dense_top_eigenpairs(const Matrix& sym, Index count) {
  const Index n = sym.rows();
  Matrix work = sym;
  const auto ln = static_cast<lapack_int>(n);
  const lapack_int il = static_cast<lapack_int>(n - count + 1);
  const lapack_int iu = ln;
  lapack_int found = 0;
  std::vector<double> w(static_cast<std::size_t>(n));
  Matrix z(n, count);
  std::vector<lapack_int> support(2 * static_cast<std::size_t>(count));
  const lapack_int info = LAPACKE_dsyevr(LAPACK_COL_MAJOR, 'V', 'I', 'L', ln, work.data(), ln, 0.0,
                                         0.0, il, iu, 0.0, &found, w.data(), z.data(), ln,
                                         support.data());
  if (info != 0 || found != static_cast<lapack_int>(count)) {
    throw NumericalError("eigensolver_failure",
                         "symmetric eigensolver did not converge (info=" + std::to_string(info) + ")");
  }
  // dsyevr returns ascending order.
  SymmetricEigenpairs out{Vector(count), Matrix(n, count)};
  for (Index c = 0; c < count; ++c) {
    out.values(c) = w[static_cast<std::size_t>(count - 1 - c)];
    out.vectors.col(c) = z.col(count - 1 - c);
  }
  return out;
}

// out = lower-symmetric(sym) * x
void symmetric_product(const Matrix& sym, const Matrix& x, Matrix& out) {
  const auto n = static_cast<blasint>(sym.rows());
  const auto m = static_cast<blasint>(x.cols());
  out.resize(sym.rows(), x.cols());
  cblas_dsymm(CblasColMajor, CblasLeft, CblasLower, n, m, 1.0, sym.data(), n, x.data(), n, 0.0, out.data(), n);
}

// Orthonormalizes each column of `block` against basis.leftCols(cols) and the
// columns before it (two Gram-Schmidt passes). A column that has collapsed into
// the span is replaced by a draw from `fresh`. Returns false when even fresh
// directions collapse, i.e. the basis already spans the whole space.
template <class Fresh>
bool orthonormalize_block(const Matrix& basis, Index cols, Matrix& block, Fresh&& fresh) {
  for (Index c = 0; c < block.cols(); ++c) {
    bool replaced = false;
    while (true) {
      const double before = block.col(c).norm();
      for (int pass = 0; pass < 2; ++pass) {
        if (cols > 0) block.col(c) -= basis.leftCols(cols) * (basis.leftCols(cols).transpose() * block.col(c));
        if (c > 0) block.col(c) -= block.leftCols(c) * (block.leftCols(c).transpose() * block.col(c));
      }
      const double after = block.col(c).norm();
      if (after > 1e-13 * before && after > 0.0) {
        block.col(c) /= after;
        break;
      }
      if (replaced) return false;
      block.col(c) = fresh();
      replaced = true;
    }
  }
  return true;
}

// Block Krylov iteration with full reorthogonalization and Rayleigh-Ritz
// extraction. The block is one wider than `count`, so an eigenvalue repeated
// within the wanted range is still resolved. Empty when the subspace budget
// runs out before every wanted Ritz pair meets the residual tolerance.
std::optional<SymmetricEigenpairs> krylov_top_eigenpairs(const Matrix& sym, Index count) {
  const Index n = sym.rows();
  const Index b = count + 1;
  const Index budget = std::min<Index>(n, kKrylovSubspaceLimit) / b * b;
  if (budget < 4 * b) return std::nullopt;

  std::mt19937_64 rng(0x5eed);
  std::normal_distribution<double> normal;
  auto random_vector = [&] {
    Vector x(n);
    for (Index i = 0; i < n; ++i) x(i) = normal(rng);
    return x;
  };

  Matrix basis(n, budget), image(n, budget), h(budget, budget);
  Matrix block(n, b);
  for (Index j = 0; j < b; ++j) block.col(j) = random_vector();
  Index cols = 0;
  Index next_check = 4 * b;
  double previous = std::numeric_limits<double>::infinity();
  Index previous_cols = 0;
  if (!orthonormalize_block(basis, cols, block, random_vector)) return std::nullopt;
  Matrix product;
  while (cols + b <= budget) {
    basis.middleCols(cols, b) = block;
    symmetric_product(sym, block, product);
    image.middleCols(cols, b) = product;
    cols += b;
    h.block(0, cols - b, cols, b).noalias() = basis.leftCols(cols).transpose() * product;
    h.block(cols - b, 0, b, cols - b) = h.block(0, cols - b, cols - b, b).transpose();

    if (cols >= next_check || cols + b > budget) {
      next_check = cols + std::max(2 * b, cols / 4);
      const Matrix hs = 0.5 * (h.topLeftCorner(cols, cols) + h.topLeftCorner(cols, cols).transpose());
      Eigen::SelfAdjointEigenSolver<Matrix> small(hs);
      const Vector& theta = small.eigenvalues();
      const Matrix y = small.eigenvectors().rightCols(count).rowwise().reverse();
      const Vector top = theta.tail(count).reverse();
      const double scale = std::max(theta.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
      const Matrix ritz = basis.leftCols(cols) * y;
      const Matrix residual = image.leftCols(cols) * y - ritz * top.asDiagonal();
      const double worst = residual.colwise().norm().maxCoeff() / scale;
      // Below the tolerance, or stalled at the rounding floor just above it.
      if (worst <= kKrylovTolerance || (worst <= 100 * kKrylovTolerance && worst > 0.5 * previous)) {
        return SymmetricEigenpairs{top, ritz};
      }
      // Give up early when the observed rate cannot reach the tolerance in budget.
      if (2 * cols >= budget && std::isfinite(previous) && worst < previous) {
        const double per_column = std::log(previous / worst) / static_cast<double>(cols - previous_cols);
        const double needed = std::log(worst / kKrylovTolerance) / per_column;
        if (static_cast<double>(cols) + needed > static_cast<double>(budget)) return std::nullopt;
      }
      previous = worst;
      previous_cols = cols;
    }

    block = product;
    if (!orthonormalize_block(basis, cols, block, random_vector)) return std::nullopt;
  }
  return std::nullopt;
}

}  // namespace

SymmetricEigenpairs top_eigenpairs(const Matrix& sym, Index count) {
  const Index n = sym.rows();
  require(sym.cols() == n, "dimension_mismatch", "top_eigenpairs: matrix is not square");
  require(count >= 1 && count <= n, "invalid_dimension",
          "top_eigenpairs: requested " + std::to_string(count) + " eigenpairs of a " +
              std::to_string(n) + "x" + std::to_string(n) + " matrix");
  require(sym.allFinite(), "non_finite", "top_eigenpairs: non-finite entries");

  std::optional<SymmetricEigenpairs> found;
  if (n >= kKrylovMinDim) found = krylov_top_eigenpairs(sym, count);
  SymmetricEigenpairs out = found ? std::move(*found) : dense_top_eigenpairs(sym, count);

  // Some optimized BLAS kernels return wrong products on CPUs they were not
  // validated on; refuse such results instead of passing them on.
  const double scale = std::max(sym.norm(), std::numeric_limits<double>::min());
  const Matrix residual = sym.selfadjointView<Eigen::Lower>() * out.vectors - out.vectors * out.values.asDiagonal();
  const double gram = (out.vectors.transpose() * out.vectors - Matrix::Identity(count, count)).cwiseAbs().maxCoeff();
  if (!(gram <= kOrthonormalTolerance) || !(residual.colwise().norm().maxCoeff() <= 1e-9 * scale)) {
    throw NumericalError("eigensolver_failure",
                         "symmetric eigensolver returned inaccurate eigenvectors; the BLAS backend may be faulty "
                         "(for OpenBLAS try OPENBLAS_CORETYPE=Haswell)");
  }
  return out;
}

bool linalg_backend_ok() {
  const Index n = 200;
  Matrix a(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) a(i, j) = 1.0 / (1.0 + static_cast<double>(std::abs(i - j))) + (i == j ? 0.01 * static_cast<double>(i) : 0.0);
  }
  try {
    top_eigenpairs(a, 3);
    return true;
  } catch (const NumericalError&) {
    return false;
  }
}

void ensure_linalg_backend(char** argv) {
  if (linalg_backend_ok() || std::getenv("OPENBLAS_CORETYPE") != nullptr) return;
  const char* core = __builtin_cpu_supports("avx512f") ? "SkylakeX"
                     : __builtin_cpu_supports("avx2") ? "Haswell"
                                                       : "Sandybridge";
  ::setenv("OPENBLAS_CORETYPE", core, 1);
  ::execv("/proc/self/exe", argv);
  // execv only returns on failure; carry on and let the per-call check report.
}

}  // namespace gmmproj
