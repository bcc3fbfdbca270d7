#pragma once

#include "gmmproj/types.hpp"

#include <optional>
#include <span>
#include <vector>

namespace gmmproj {

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

// Closed polylines repeat their first vertex at the end.
using Polyline = std::vector<Point2>;

inline constexpr double kDefaultRhos[] = {0.25, 0.50, 0.95};
inline constexpr double kDefaultBoundsSigmas = 4.0;
inline constexpr Index kDefaultResolution = 512;

// Aggregate mean +- `sigmas` aggregate standard deviations per axis.
Bounds default_bounds(const MixtureModel& m, double sigmas = kDefaultBoundsSigmas);

// Mixture density at every cell center, not normalized. Rows are
// evaluated in parallel; see reference::grid_density for the serial path.
Matrix grid_density(const MixtureModel& m, const Bounds& bounds, Resolution res);

// Unit-mass raster of a 2D mixture (default bounds when none given).
DensityGrid rasterize(const MixtureModel& m, const std::optional<Bounds>& bounds = std::nullopt,
                      Resolution res = {});

struct LevelThreshold {
  double rho = 0.0;
  double threshold = 0.0;
};

// Sort cell densities descending, accumulate mass, and report the density
// of the first cell whose cumulative mass reaches each rho.
std::vector<LevelThreshold> hdr_thresholds(const DensityGrid& grid, std::span<const double> rhos);

// Mass of the cells whose density is >= threshold.
double superlevel_mass(const DensityGrid& grid, double threshold);

// Marching squares over the lattice of cell centers with linear edge
// interpolation. Vertices are in data coordinates.
std::vector<Polyline> extract_isolines(const DensityGrid& grid, double threshold);

bool is_closed(const Polyline& line);

struct ContourLevelSet {
  double rho = 0.0;
  double threshold = 0.0;
  std::vector<Polyline> polylines;
};

struct ContourSet {
  Bounds bounds;
  Resolution resolution;
  std::vector<ContourLevelSet> levels;
};

ContourSet contour_set(const MixtureModel& m, std::span<const double> rhos, Resolution res = {},
                       const std::optional<Bounds>& bounds = std::nullopt);

}  // namespace gmmproj
