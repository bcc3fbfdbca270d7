#pragma once

#include "gmmproj/types.hpp"

namespace gmmproj {

// Relative diagonal loading applied before every inversion or Cholesky
// factorization of a model covariance: eps * trace(cov) / D.
inline constexpr double kCovarianceRegularization = 1e-9;

double diagonal_loading(const Matrix& cov, double eps);

// Lower Cholesky factor of cov + eps*trace/D * I. Throws
// SingularModelError if the loaded matrix is still not positive definite.
Matrix regularized_cholesky(const Matrix& cov, double eps = kCovarianceRegularization);

// Copies the strict lower triangle onto the upper one (cache-blocked).
void mirror_lower(Matrix& m);

struct SymmetricEigenpairs {
  Vector values;   // descending
  Matrix vectors;  // columns match `values`
};

inline constexpr Index kKrylovMinDim = 400;
inline constexpr Index kKrylovSubspaceLimit = 160;
inline constexpr double kKrylovTolerance = 1e-13;

// Largest `count` eigenpairs of a symmetric matrix (lower triangle is read).
// From kKrylovMinDim on, a block Krylov solver is tried first (Ritz residuals
// below kKrylovTolerance * |largest Ritz value|); otherwise, or when it does
// not converge within kKrylovSubspaceLimit vectors, LAPACK dsyevr. Results are checked for orthonormality and
// residual; throws NumericalError on non-convergence or a failed check.
SymmetricEigenpairs top_eigenpairs(const Matrix& sym, Index count);

// Runs a small eigenproblem through the LAPACK/BLAS backend and checks it.
bool linalg_backend_ok();

// For executables: when the self-check fails and OPENBLAS_CORETYPE is unset,
// re-executes the program with a conservative OpenBLAS kernel selected.
void ensure_linalg_backend(char** argv);

}  // namespace gmmproj
