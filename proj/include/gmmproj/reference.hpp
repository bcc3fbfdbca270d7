#pragma once

// Straightforward serial implementations of the parallel kernels. They are
// kept for testing (parallel == serial) and benchmarking, not for use on
// hot paths.

#include "gmmproj/metrics.hpp"
#include "gmmproj/types.hpp"

namespace gmmproj::reference {

// Mixture density at every cell center via the generic Cholesky path.
Matrix grid_density(const MixtureModel& m, const Bounds& bounds, Resolution res);

// Unnormalized product-kernel KDE by direct summation.
Matrix kde_values(const Matrix& points, const Bounds& bounds, Resolution res, const Bandwidth& bw);

// Per-row mixture log density, one point at a time.
Vector mixture_log_pdf_rows(const MixtureModel& m, const Matrix& points);

}  // namespace gmmproj::reference
