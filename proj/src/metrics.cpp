#include "gmmproj/metrics.hpp"

#include "gmmproj/contours.hpp"
#include "gmmproj/error.hpp"
#include "gmmproj/fitting.hpp"
#include "gmmproj/moments.hpp"
#include "gmmproj/projection.hpp"
#include "gmmproj/rng.hpp"
#include "gmmproj/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace gmmproj {

namespace {

constexpr Index kKdeChunk = 8192;
constexpr double kKdeBoundsBandwidths = 4.0;

enum Purpose : std::uint64_t { kDirections = 1, kReference = 2, kMixture = 3, kSingle = 4 };

// nodes x points matrix of 1D Gaussian kernel values. Kernels narrower
// than a cell are averaged over the cell instead of sampled at its center,
// so mass is kept at any bandwidth.
Matrix kernel_matrix(const Vector& nodes, const Eigen::Ref<const Vector>& points, double h, double cell) {
  Matrix out(nodes.size(), points.size());
  if (h < cell) {
    const double s = 1.0 / (std::numbers::sqrt2 * h);
    for (Index p = 0; p < points.size(); ++p) {
      out.col(p) = (nodes.array() - points(p)).unaryExpr([s, cell](double u) {
        return 0.5 * (std::erf((u + 0.5 * cell) * s) - std::erf((u - 0.5 * cell) * s)) / cell;
      });
    }
    return out;
  }
  const double norm = 1.0 / (std::sqrt(2.0 * std::numbers::pi) * h);
  for (Index p = 0; p < points.size(); ++p) {
    out.col(p) = ((nodes.array() - points(p)) / h).square().unaryExpr([norm](double z) {
      return norm * std::exp(-0.5 * z);
    });
  }
  return out;
}

void check_points_2d(const Matrix& pts, const char* what) {
  require(pts.cols() == 2, "dimension_mismatch", std::string(what) + ": expected N x 2 samples");
  require(pts.rows() >= 1, "empty_input", std::string(what) + ": empty sample set");
  require(pts.allFinite(), "non_finite", std::string(what) + ": non-finite samples");
}

// Quantile of sorted data at level t with linear interpolation between
// order statistics placed at (i + 0.5) / n.
double interpolated_quantile(const std::vector<double>& sorted, double t) {
  const auto n = static_cast<double>(sorted.size());
  const double pos = t * n - 0.5;
  if (pos <= 0.0) return sorted.front();
  if (pos >= n - 1.0) return sorted.back();
  const auto lo = static_cast<std::size_t>(pos);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

// Exact KDE draw: a random data point plus kernel noise.
Matrix sample_kde(const Matrix& points, const Bandwidth& bw, Index n, std::uint64_t seed) {
  Rng rng(seed);
  Matrix out(n, 2);
  for (Index r = 0; r < n; ++r) {
    const auto i = static_cast<Index>(rng.below(static_cast<std::uint64_t>(points.rows())));
    out(r, 0) = points(i, 0) + bw.hx * rng.normal();
    out(r, 1) = points(i, 1) + bw.hy * rng.normal();
  }
  return out;
}

}  // namespace

Bandwidth scott_bandwidth(const Matrix& points, const Bounds& bounds) {
  check_points_2d(points, "scott_bandwidth");
  const double n = static_cast<double>(points.rows());
  const double factor = std::pow(n, -1.0 / 6.0);
  double sx = 0.0, sy = 0.0;
  if (points.rows() >= 2) {
    const Gaussian emp = empirical_moments(points);
    sx = std::sqrt(emp.cov()(0, 0));
    sy = std::sqrt(emp.cov()(1, 1));
  }
  return {std::max(sx * factor, 1e-6 * (bounds.xmax - bounds.xmin)),
          std::max(sy * factor, 1e-6 * (bounds.ymax - bounds.ymin))};
}

DensityGrid kde_grid(const Matrix& points, const Bounds& bounds, Resolution res,
                     const std::optional<Bandwidth>& bandwidth) {
  check_points_2d(points, "kde_grid");
  require(res.nx >= 1 && res.ny >= 1, "invalid_resolution", "kde_grid: resolution must be positive");
  require(bounds.xmax > bounds.xmin && bounds.ymax > bounds.ymin, "degenerate_bounds",
          "kde_grid: bounds have zero extent");
  const Bandwidth bw = bandwidth ? *bandwidth : scott_bandwidth(points, bounds);
  require(bw.hx > 0.0 && bw.hy > 0.0, "invalid_bandwidth", "kde_grid: bandwidth must be positive");

  const double dx = (bounds.xmax - bounds.xmin) / static_cast<double>(res.nx);
  const double dy = (bounds.ymax - bounds.ymin) / static_cast<double>(res.ny);
  const Vector cx = Vector::LinSpaced(res.nx, 0.0, static_cast<double>(res.nx - 1)).array() * dx +
                    (bounds.xmin + 0.5 * dx);
  const Vector cy = Vector::LinSpaced(res.ny, 0.0, static_cast<double>(res.ny - 1)).array() * dy +
                    (bounds.ymin + 0.5 * dy);

  // Separable kernels: grid = Kx * Ky^T summed over point chunks.
  Matrix values = Matrix::Zero(res.nx, res.ny);
  for (Index start = 0; start < points.rows(); start += kKdeChunk) {
    const Index len = std::min(kKdeChunk, points.rows() - start);
    const Matrix kx = kernel_matrix(cx, points.col(0).segment(start, len), bw.hx, dx);
    const Matrix ky = kernel_matrix(cy, points.col(1).segment(start, len), bw.hy, dy);
    values.noalias() += kx * ky.transpose();
  }
  values /= static_cast<double>(points.rows());
  return DensityGrid::over(bounds, std::move(values)).normalized();
}

double kl_grid(const DensityGrid& p, const DensityGrid& q) {
  require(p.same_geometry(q), "grid_mismatch", "kl_grid: grids differ in origin, spacing or resolution");
  require(std::abs(p.mass() - 1.0) <= 1e-6 && std::abs(q.mass() - 1.0) <= 1e-6, "not_normalized",
          "kl_grid: both grids must be normalized");
  const double floor = kKlFloorRelative * q.values().maxCoeff();
  const auto& pv = p.values();
  const auto& qv = q.values();
  double acc = 0.0;
  for (Index j = 0; j < pv.cols(); ++j) {
    for (Index i = 0; i < pv.rows(); ++i) {
      const double a = pv(i, j);
      // The floor never lifts q above p, so identical grids give exactly zero.
      if (a > 0.0) acc += a * std::log(a / std::max(qv(i, j), std::min(a, floor)));
    }
  }
  return acc * p.cell_area();
}

Matrix circle_directions(int count, std::uint64_t seed) {
  require(count >= 1, "invalid_config", "sliced_w2: need at least one projection");
  // One uniform angle per equal-width stratum of the circle.
  Rng rng(seed);
  Matrix dirs(count, 2);
  for (int i = 0; i < count; ++i) {
    const double angle = 2.0 * std::numbers::pi * (static_cast<double>(i) + rng.uniform()) / count;
    dirs(i, 0) = std::cos(angle);
    dirs(i, 1) = std::sin(angle);
  }
  return dirs;
}

double wasserstein2_squared_1d(std::vector<double> a, std::vector<double> b) {
  require(!a.empty() && !b.empty(), "empty_input", "wasserstein: empty sample set");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  if (a.size() == b.size()) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
    return acc / static_cast<double>(a.size());
  }
  const std::size_t levels = std::max(a.size(), b.size());
  double acc = 0.0;
  for (std::size_t l = 0; l < levels; ++l) {
    const double t = (static_cast<double>(l) + 0.5) / static_cast<double>(levels);
    const double diff = interpolated_quantile(a, t) - interpolated_quantile(b, t);
    acc += diff * diff;
  }
  return acc / static_cast<double>(levels);
}

double sliced_w2(const Matrix& a, const Matrix& b, const Matrix& directions) {
  check_points_2d(a, "sliced_w2");
  check_points_2d(b, "sliced_w2");
  require(directions.cols() == 2 && directions.rows() >= 1, "invalid_config",
          "sliced_w2: directions must be a non-empty count x 2 matrix");
  std::vector<double> squared(static_cast<std::size_t>(directions.rows()));
#pragma omp parallel for schedule(static)
  for (Index k = 0; k < directions.rows(); ++k) {
    const Vector pa = a * directions.row(k).transpose();
    const Vector pb = b * directions.row(k).transpose();
    squared[static_cast<std::size_t>(k)] = wasserstein2_squared_1d(
        std::vector<double>(pa.data(), pa.data() + pa.size()),
        std::vector<double>(pb.data(), pb.data() + pb.size()));
  }
  double acc = 0.0;
  for (double s : squared) acc += s;
  return std::sqrt(acc / static_cast<double>(squared.size()));
}

double sliced_w2(const Matrix& a, const Matrix& b, int n_projections, std::uint64_t seed) {
  return sliced_w2(a, b, circle_directions(n_projections, seed));
}

double weighted_average(const std::vector<double>& values, const ImportanceWeights& tau) {
  require(values.size() == tau.size(), "length_mismatch",
          "weighted_average: " + std::to_string(values.size()) + " values but " +
              std::to_string(tau.size()) + " weights");
  double acc = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) acc += tau[i] * values[i];
  return acc;
}

MetricReport evaluate_strategies(const LabeledDataset& data, const std::vector<MixtureModel>& models,
                                 const ImportanceWeights& tau, const EvaluationConfig& cfg) {
  const std::size_t classes = data.num_classes();
  require(models.size() == classes, "missing_model",
          "evaluate_strategies: " + std::to_string(models.size()) + " models for " +
              std::to_string(classes) + " classes");
  require(tau.size() == classes, "length_mismatch", "evaluate_strategies: tau length differs from class count");
  require(cfg.sample_budget >= 1 && cfg.n_projections >= 1, "invalid_config",
          "evaluate_strategies: sample budget and projection count must be positive");
  for (const auto& m : models) {
    require(m.dim() == data.dim(), "dimension_mismatch", "evaluate_strategies: model dimension differs from data");
  }

  std::vector<AggregatedMoments> moments;
  for (const auto& m : models) moments.push_back(aggregate_mixture(m));
  const ProjectionMatrix p = projection_from_ua(build_weighted_moments(std::move(moments), tau), 2);
  const Matrix directions = circle_directions(cfg.n_projections, derive_stream(cfg.seed, {kDirections}));

  MetricReport report;
  report.tau = tau.values();
  report.config = cfg;
  report.bandwidth_rule = cfg.bandwidth ? "fixed" : "scott";
  for (std::size_t c = 0; c < classes; ++c) {
    const Matrix samples = data.class_samples(static_cast<int>(c));
    const Matrix projected = project_samples(samples, p);
    const MixtureModel wgmm = project_mixture(models[c], p);
    const Gaussian single =
        project_gaussian(regularized_empirical_gaussian(samples, cfg.reg_epsilon), p);
    const MixtureModel uapca = MixtureModel::single(single);

    // Bounding box of the samples padded by the kernel, united with the
    // default extents of both candidate densities.
    const Vector lo = projected.colwise().minCoeff();
    const Vector hi = projected.colwise().maxCoeff();
    const Bounds raw{lo(0), hi(0), lo(1), hi(1)};
    Bounds bounds = default_bounds(wgmm).united(default_bounds(uapca)).united(raw);
    const Bandwidth bw = cfg.bandwidth ? *cfg.bandwidth : scott_bandwidth(projected, bounds);
    bounds = bounds.united({lo(0) - kKdeBoundsBandwidths * bw.hx, hi(0) + kKdeBoundsBandwidths * bw.hx,
                            lo(1) - kKdeBoundsBandwidths * bw.hy, hi(1) + kKdeBoundsBandwidths * bw.hy});

    const DensityGrid reference = kde_grid(projected, bounds, cfg.resolution, bw);
    ClassMetrics row;
    row.class_id = static_cast<int>(c);
    row.name = data.label_names()[c];
    row.kl_wgmm = kl_grid(reference, rasterize(wgmm, bounds, cfg.resolution));
    row.kl_uapca = kl_grid(reference, rasterize(uapca, bounds, cfg.resolution));

    const Matrix ref_draws = sample_kde(projected, bw, cfg.sample_budget, derive_stream(cfg.seed, {c, kReference}));
    row.sw2_wgmm = sliced_w2(ref_draws, sample_mixture(wgmm, cfg.sample_budget, derive_stream(cfg.seed, {c, kMixture})),
                             directions);
    row.sw2_uapca = sliced_w2(ref_draws, sample_gaussian(single, cfg.sample_budget, derive_stream(cfg.seed, {c, kSingle})),
                              directions);
    report.per_class.push_back(std::move(row));
  }

  auto column = [&report](double ClassMetrics::*field) {
    std::vector<double> out;
    for (const auto& r : report.per_class) out.push_back(r.*field);
    return out;
  };
  report.kl_wgmm = weighted_average(column(&ClassMetrics::kl_wgmm), tau);
  report.kl_uapca = weighted_average(column(&ClassMetrics::kl_uapca), tau);
  report.sw2_wgmm = weighted_average(column(&ClassMetrics::sw2_wgmm), tau);
  report.sw2_uapca = weighted_average(column(&ClassMetrics::sw2_uapca), tau);
  return report;
}

}  // namespace gmmproj
