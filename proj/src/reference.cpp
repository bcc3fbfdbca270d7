#include "gmmproj/reference.hpp"

#include "gmmproj/density.hpp"

#include <cmath>
#include <numbers>

namespace gmmproj::reference {

Matrix grid_density(const MixtureModel& m, const Bounds& b, Resolution res) {
  const MixtureDensity density(m);
  const double dx = (b.xmax - b.xmin) / static_cast<double>(res.nx);
  const double dy = (b.ymax - b.ymin) / static_cast<double>(res.ny);
  Matrix out(res.nx, res.ny);
  Vector point(2);
  for (Index i = 0; i < res.nx; ++i) {
    for (Index j = 0; j < res.ny; ++j) {
      point << b.xmin + (static_cast<double>(i) + 0.5) * dx, b.ymin + (static_cast<double>(j) + 0.5) * dy;
      out(i, j) = density.pdf(point);
    }
  }
  return out;
}

namespace {

// Point-sampled kernel, or the cell average when h is below the cell width.
double kernel_1d(double u, double h, double cell) {
  if (h < cell) {
    const double s = 1.0 / (std::numbers::sqrt2 * h);
    return 0.5 * (std::erf((u + 0.5 * cell) * s) - std::erf((u - 0.5 * cell) * s)) / cell;
  }
  return std::exp(-0.5 * (u / h) * (u / h)) / (std::sqrt(2.0 * std::numbers::pi) * h);
}

}  // namespace

Matrix kde_values(const Matrix& points, const Bounds& b, Resolution res, const Bandwidth& bw) {
  const double dx = (b.xmax - b.xmin) / static_cast<double>(res.nx);
  const double dy = (b.ymax - b.ymin) / static_cast<double>(res.ny);
  Matrix out = Matrix::Zero(res.nx, res.ny);
  for (Index i = 0; i < res.nx; ++i) {
    const double x = b.xmin + (static_cast<double>(i) + 0.5) * dx;
    for (Index j = 0; j < res.ny; ++j) {
      const double y = b.ymin + (static_cast<double>(j) + 0.5) * dy;
      double acc = 0.0;
      for (Index n = 0; n < points.rows(); ++n) {
        acc += kernel_1d(x - points(n, 0), bw.hx, dx) * kernel_1d(y - points(n, 1), bw.hy, dy);
      }
      out(i, j) = acc / static_cast<double>(points.rows());
    }
  }
  return out;
}

Vector mixture_log_pdf_rows(const MixtureModel& m, const Matrix& points) {
  const MixtureDensity density(m);
  Vector out(points.rows());
  for (Index i = 0; i < points.rows(); ++i) out(i) = density.log_pdf(points.row(i).transpose());
  return out;
}

}  // namespace gmmproj::reference
