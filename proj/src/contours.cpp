#include "gmmproj/contours.hpp"

#include "gmmproj/error.hpp"
#include "gmmproj/linalg.hpp"
#include "gmmproj/moments.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <numbers>

namespace gmmproj {

namespace {

void require_2d(const MixtureModel& m, const char* what) {
  require(m.dim() == 2, "dimension_mismatch",
          std::string(what) + ": expected a 2D mixture, got dimension " + std::to_string(m.dim()));
}

void require_resolution(Resolution res) {
  require(res.nx >= 1 && res.ny >= 1, "invalid_resolution", "grid resolution must be positive");
}

// Closed-form 2x2 evaluation with the same diagonal loading as the
// Cholesky path.
struct Planar {
  double mx, my;
  double ixx, ixy, iyy;  // inverse covariance
  double log_scale;      // log w - log(2 pi sqrt(det))
};

std::vector<Planar> planar_components(const MixtureModel& m) {
  std::vector<Planar> out;
  for (const auto& c : m.components()) {
    if (c.weight <= 0.0) continue;
    Matrix cov = c.gaussian.cov();
    const double load = diagonal_loading(cov, kCovarianceRegularization);
    if (!(load > 0.0)) throw SingularModelError("rasterize: component covariance has zero trace");
    cov.diagonal().array() += load;
    const double det = cov(0, 0) * cov(1, 1) - cov(0, 1) * cov(1, 0);
    if (!(det > 0.0)) throw SingularModelError("rasterize: component covariance is singular");
    out.push_back({c.gaussian.mean()(0), c.gaussian.mean()(1), cov(1, 1) / det, -cov(0, 1) / det,
                   cov(0, 0) / det,
                   std::log(c.weight) - std::log(2.0 * std::numbers::pi) - 0.5 * std::log(det)});
  }
  return out;
}

}  // namespace

Bounds default_bounds(const MixtureModel& m, double sigmas) {
  require_2d(m, "default_bounds");
  const AggregatedMoments agg = aggregate_mixture(m);
  const double sx = sigmas * std::sqrt(std::max(agg.cov(0, 0), 0.0));
  const double sy = sigmas * std::sqrt(std::max(agg.cov(1, 1), 0.0));
  return {agg.mean(0) - sx, agg.mean(0) + sx, agg.mean(1) - sy, agg.mean(1) + sy};
}

Matrix grid_density(const MixtureModel& m, const Bounds& b, Resolution res) {
  require_2d(m, "rasterize");
  require_resolution(res);
  require(b.xmax > b.xmin && b.ymax > b.ymin && std::isfinite(b.xmax - b.xmin) &&
              std::isfinite(b.ymax - b.ymin),
          "degenerate_bounds", "rasterize: bounds have zero extent");
  const auto comps = planar_components(m);
  const double dx = (b.xmax - b.xmin) / static_cast<double>(res.nx);
  const double dy = (b.ymax - b.ymin) / static_cast<double>(res.ny);
  Matrix values(res.nx, res.ny);
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < res.nx; ++i) {
    const double x = b.xmin + (static_cast<double>(i) + 0.5) * dx;
    for (Index j = 0; j < res.ny; ++j) {
      const double y = b.ymin + (static_cast<double>(j) + 0.5) * dy;
      double acc = 0.0;
      for (const auto& c : comps) {
        const double u = x - c.mx;
        const double v = y - c.my;
        const double q = c.ixx * u * u + 2.0 * c.ixy * u * v + c.iyy * v * v;
        acc += std::exp(c.log_scale - 0.5 * q);
      }
      values(i, j) = acc;
    }
  }
  return values;
}

DensityGrid rasterize(const MixtureModel& m, const std::optional<Bounds>& bounds, Resolution res) {
  const Bounds b = bounds ? *bounds : default_bounds(m);
  return DensityGrid::over(b, grid_density(m, b, res)).normalized();
}

std::vector<LevelThreshold> hdr_thresholds(const DensityGrid& grid, std::span<const double> rhos) {
  require(!rhos.empty(), "invalid_rho", "hdr_thresholds: no probability levels given");
  for (double r : rhos) {
    require(r > 0.0 && r <= 1.0, "invalid_rho",
            "hdr_thresholds: level " + std::to_string(r) + " outside (0, 1]");
  }
  require(std::abs(grid.mass() - 1.0) <= 1e-6, "not_normalized", "hdr_thresholds: grid is not normalized");

  std::vector<double> sorted(grid.values().data(), grid.values().data() + grid.values().size());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  const auto positive_end = std::find_if(sorted.begin(), sorted.end(), [](double v) { return v <= 0.0; });
  const double min_positive = positive_end == sorted.begin() ? 0.0 : *(positive_end - 1);

  std::vector<double> cdf(sorted.size());
  const double area = grid.cell_area();
  double acc = 0.0;
  for (std::size_t v = 0; v < sorted.size(); ++v) {
    acc += sorted[v] * area;
    cdf[v] = acc;
  }

  std::vector<LevelThreshold> out;
  for (double rho : rhos) {
    double threshold = min_positive;
    if (rho < 1.0) {
      const auto it = std::lower_bound(cdf.begin(), cdf.end(), rho);
      if (it != cdf.end()) threshold = sorted[static_cast<std::size_t>(it - cdf.begin())];
    }
    out.push_back({rho, threshold});
  }
  return out;
}

double superlevel_mass(const DensityGrid& grid, double threshold) {
  return (grid.values().array() >= threshold).select(grid.values().array(), 0.0).sum() *
         grid.cell_area();
}

std::vector<Polyline> extract_isolines(const DensityGrid& grid, double threshold) {
  require(threshold >= 0.0 && std::isfinite(threshold), "invalid_threshold",
          "extract_isolines: threshold must be finite and non-negative");
  const Matrix& v = grid.values();
  const Index nx = grid.nx();
  const Index ny = grid.ny();
  if (nx < 2 || ny < 2) return {};

  // Crossing points live on lattice edges. Horizontal edge (i,j)-(i+1,j)
  // and vertical edge (i,j)-(i,j+1) each get a unique id.
  const Index horizontal = (nx - 1) * ny;
  const Index edges = horizontal + nx * (ny - 1);
  auto h_id = [nx](Index i, Index j) { return j * (nx - 1) + i; };
  auto v_id = [nx, horizontal](Index i, Index j) { return horizontal + j * nx + i; };

  auto crossing = [&](Index id) -> Point2 {
    if (id < horizontal) {
      const Index i = id % (nx - 1);
      const Index j = id / (nx - 1);
      const double t = (threshold - v(i, j)) / (v(i + 1, j) - v(i, j));
      return {grid.center_x(i) + t * grid.dx(), grid.center_y(j)};
    }
    const Index local = id - horizontal;
    const Index i = local % nx;
    const Index j = local / nx;
    const double t = (threshold - v(i, j)) / (v(i, j + 1) - v(i, j));
    return {grid.center_x(i), grid.center_y(j) + t * grid.dy()};
  };

  std::vector<std::array<Index, 2>> links(static_cast<std::size_t>(edges), {-1, -1});
  auto connect = [&links](Index a, Index b) {
    for (auto [from, to] : {std::pair{a, b}, std::pair{b, a}}) {
      auto& slot = links[static_cast<std::size_t>(from)];
      (slot[0] < 0 ? slot[0] : slot[1]) = to;
    }
  };

  for (Index j = 0; j + 1 < ny; ++j) {
    for (Index i = 0; i + 1 < nx; ++i) {
      const double c0 = v(i, j), c1 = v(i + 1, j), c2 = v(i + 1, j + 1), c3 = v(i, j + 1);
      const int mask = (c0 >= threshold ? 1 : 0) | (c1 >= threshold ? 2 : 0) |
                       (c2 >= threshold ? 4 : 0) | (c3 >= threshold ? 8 : 0);
      if (mask == 0 || mask == 15) continue;
      const Index bottom = h_id(i, j);
      const Index right = v_id(i + 1, j);
      const Index top = h_id(i, j + 1);
      const Index left = v_id(i, j);
      if (mask == 5 || mask == 10) {
        const bool center_in = 0.25 * (c0 + c1 + c2 + c3) >= threshold;
        if ((mask == 5) == center_in) {
          connect(bottom, right);
          connect(top, left);
        } else {
          connect(left, bottom);
          connect(right, top);
        }
        continue;
      }
      std::array<Index, 2> hit{};
      int count = 0;
      if (((mask >> 0) ^ (mask >> 1)) & 1) hit[count++] = bottom;
      if (((mask >> 1) ^ (mask >> 2)) & 1) hit[count++] = right;
      if (((mask >> 2) ^ (mask >> 3)) & 1) hit[count++] = top;
      if (((mask >> 3) ^ (mask >> 0)) & 1) hit[count++] = left;
      connect(hit[0], hit[1]);
    }
  }

  std::vector<char> visited(static_cast<std::size_t>(edges), 0);
  std::vector<Polyline> out;
  auto walk = [&](Index start) {
    Polyline line;
    Index prev = -1;
    Index cur = start;
    while (cur >= 0 && !visited[static_cast<std::size_t>(cur)]) {
      visited[static_cast<std::size_t>(cur)] = 1;
      line.push_back(crossing(cur));
      const auto& l = links[static_cast<std::size_t>(cur)];
      const Index next = l[0] != prev ? l[0] : l[1];
      prev = cur;
      cur = next;
    }
    if (cur == start) line.push_back(line.front());
    out.push_back(std::move(line));
  };

  // Open chains start at lattice-boundary crossings (one link).
  for (Index e = 0; e < edges; ++e) {
    const auto& l = links[static_cast<std::size_t>(e)];
    if (!visited[static_cast<std::size_t>(e)] && l[0] >= 0 && l[1] < 0) walk(e);
  }
  for (Index e = 0; e < edges; ++e) {
    const auto& l = links[static_cast<std::size_t>(e)];
    if (!visited[static_cast<std::size_t>(e)] && l[0] >= 0) walk(e);
  }
  return out;
}

bool is_closed(const Polyline& line) {
  return line.size() >= 3 && line.front().x == line.back().x && line.front().y == line.back().y;
}

ContourSet contour_set(const MixtureModel& m, std::span<const double> rhos, Resolution res,
                       const std::optional<Bounds>& bounds) {
  const DensityGrid grid = rasterize(m, bounds, res);
  ContourSet out{grid.bounds(), res, {}};
  for (const auto& level : hdr_thresholds(grid, rhos)) {
    out.levels.push_back({level.rho, level.threshold, extract_isolines(grid, level.threshold)});
  }
  return out;
}

}  // namespace gmmproj
