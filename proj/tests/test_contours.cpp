#include "gmmproj/contours.hpp"
#include "gmmproj/error.hpp"
#include "gmmproj/reference.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace gmmproj;
using namespace gmmproj::testing;

namespace {

const MixtureModel kStandard = MixtureModel::single(isotropic(2));

bool inside(const Polyline& poly, Point2 p) {
  bool in = false;
  for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
    const auto& a = poly[i];
    const auto& b = poly[j];
    if ((a.y > p.y) != (b.y > p.y) && p.x < (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x) in = !in;
  }
  return in;
}

}  // namespace

TEST_CASE("rasterize examples") {
  const Bounds b{-5, 5, -5, 5};
  const Resolution r{512, 512};
  const Matrix raw = grid_density(kStandard, b, r);
  const double area = (10.0 / 512) * (10.0 / 512);
  CHECK(std::abs(raw.sum() * area - 1.0) < 1e-3);

  const DensityGrid g = rasterize(kStandard, b, r);
  CHECK(g.mass() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(rasterize(kStandard, b, r).values() == g.values());

  const DensityGrid one = rasterize(kStandard, b, {1, 1});
  CHECK(one.values()(0, 0) * one.cell_area() == doctest::Approx(1.0).epsilon(1e-12));

  CHECK_THROWS_AS(rasterize(MixtureModel::single(isotropic(3))), ValidationError);
  CHECK_THROWS_AS(rasterize(kStandard, Bounds{0, 0, -1, 1}), ValidationError);
}

TEST_CASE("default bounds are +-4 aggregate sigma") {
  const MixtureModel m = MixtureModel::single(Gaussian(vec2(1, -2), Vector(vec2(4, 9)).asDiagonal()));
  const Bounds b = default_bounds(m);
  CHECK(b.xmin == doctest::Approx(1 - 8));
  CHECK(b.xmax == doctest::Approx(1 + 8));
  CHECK(b.ymin == doctest::Approx(-2 - 12));
  CHECK(b.ymax == doctest::Approx(-2 + 12));
}

TEST_CASE("parallel rasterization matches the serial reference") {
  Rng rng(7);
  const MixtureModel m = random_mixture(2, 4, rng);
  const Bounds b = default_bounds(m);
  const Matrix fast = grid_density(m, b, {97, 131});
  const Matrix slow = reference::grid_density(m, b, {97, 131});
  CHECK(max_rel_diff(fast, slow) < 1e-10);
}

TEST_CASE("hdr thresholds of the standard Gaussian") {
  const DensityGrid g = rasterize(kStandard, std::nullopt, {512, 512});
  const std::vector<double> rhos{0.25, 0.5, 0.95};
  const auto levels = hdr_thresholds(g, rhos);
  for (const auto& l : levels) {
    const double expected = (1.0 - l.rho) / (2.0 * std::numbers::pi);
    CHECK(std::abs(l.threshold / expected - 1.0) < 0.02);
    CHECK(std::abs(superlevel_mass(g, l.threshold) - l.rho) < 0.01);
  }
  CHECK(levels[0].threshold >= levels[1].threshold);
  CHECK(levels[1].threshold >= levels[2].threshold);

  const std::vector<double> full{1.0};
  double min_positive = 1e300;
  for (Index i = 0; i < g.values().size(); ++i) {
    if (g.values().data()[i] > 0) min_positive = std::min(min_positive, g.values().data()[i]);
  }
  CHECK(hdr_thresholds(g, full)[0].threshold == min_positive);

  CHECK(std::vector<double>(std::begin(kDefaultRhos), std::end(kDefaultRhos)) == rhos);
  CHECK_THROWS_AS(hdr_thresholds(g, std::vector<double>{}), ValidationError);
  CHECK_THROWS_AS(hdr_thresholds(g, std::vector<double>{0.0}), ValidationError);
  CHECK_THROWS_AS(hdr_thresholds(g, std::vector<double>{1.5}), ValidationError);
}

TEST_CASE("hdr invariants on random mixtures") {
  Rng rng(11);
  for (int trial = 0; trial < 8; ++trial) {
    const MixtureModel m = random_mixture(2, 1 + static_cast<int>(rng.below(4)), rng);
    const DensityGrid g = rasterize(m, std::nullopt, {128, 128});
    std::vector<double> rhos;
    for (int i = 0; i < 6; ++i) rhos.push_back(0.05 + 0.9 * rng.uniform());
    std::sort(rhos.begin(), rhos.end());
    const auto levels = hdr_thresholds(g, rhos);
    const double cell_mass = g.values().maxCoeff() * g.cell_area();
    for (std::size_t i = 0; i < levels.size(); ++i) {
      const double mass = superlevel_mass(g, levels[i].threshold);
      CHECK(mass >= levels[i].rho - cell_mass - 1e-12);
      CHECK(mass <= levels[i].rho + cell_mass + 1e-12);
      if (i > 0) {
        CHECK(levels[i - 1].threshold >= levels[i].threshold);
        // Superlevel sets nest.
        CHECK(((g.values().array() >= levels[i - 1].threshold) && (g.values().array() < levels[i].threshold)).count() == 0);
      }
    }
  }
}

TEST_CASE("threshold converges under resolution doubling") {
  const std::vector<double> half{0.5};
  const double a = hdr_thresholds(rasterize(kStandard, std::nullopt, {256, 256}), half)[0].threshold;
  const double b = hdr_thresholds(rasterize(kStandard, std::nullopt, {512, 512}), half)[0].threshold;
  CHECK(std::abs(a / b - 1.0) < 0.01);
}

TEST_CASE("extract_isolines examples") {
  const DensityGrid flat = DensityGrid::over({0, 1, 0, 1}, Matrix::Constant(8, 8, 1.0));
  CHECK(extract_isolines(flat, 2.0).empty());
  CHECK_THROWS_AS(extract_isolines(flat, -1.0), ValidationError);

  const DensityGrid g = rasterize(kStandard, std::nullopt, {512, 512});
  const double thr = 0.5 / (2.0 * std::numbers::pi);
  const auto lines = extract_isolines(g, thr);
  REQUIRE(lines.size() == 1);
  CHECK(is_closed(lines[0]));
  const double r = std::sqrt(2.0 * std::log(2.0));
  const double tol = 2.0 * std::max(g.dx(), g.dy());
  for (const auto& p : lines[0]) CHECK(std::abs(std::hypot(p.x, p.y) - r) < tol);

  // Bimodal, modes 10 sigma apart: two disjoint loops at a high level.
  const MixtureModel two({{0.5, Gaussian(vec2(-5, 0), Matrix::Identity(2, 2))},
                          {0.5, Gaussian(vec2(5, 0), Matrix::Identity(2, 2))}});
  const DensityGrid bg = rasterize(two, std::nullopt, {512, 512});
  const auto loops = extract_isolines(bg, hdr_thresholds(bg, std::vector<double>{0.95})[0].threshold);
  REQUIRE(loops.size() == 2);
  CHECK(is_closed(loops[0]));
  CHECK(is_closed(loops[1]));
  CHECK_FALSE(inside(loops[0], loops[1].front()));
  CHECK_FALSE(inside(loops[1], loops[0].front()));
}

TEST_CASE("open polylines only where the level set leaves the grid") {
  // Bounds cut through the distribution so the 0.95 contour is clipped.
  const DensityGrid g = rasterize(kStandard, Bounds{-1, 4, -4, 4}, {200, 200});
  const auto lines = extract_isolines(g, 0.05 / (2.0 * std::numbers::pi));
  REQUIRE_FALSE(lines.empty());
  for (const auto& line : lines) {
    if (is_closed(line)) continue;
    const auto at_edge = [&](Point2 p) {
      return std::abs(p.x - g.center_x(0)) < 1e-9 || std::abs(p.x - g.center_x(g.nx() - 1)) < 1e-9 ||
             std::abs(p.y - g.center_y(0)) < 1e-9 || std::abs(p.y - g.center_y(g.ny() - 1)) < 1e-9;
    };
    CHECK(at_edge(line.front()));
    CHECK(at_edge(line.back()));
  }
}

TEST_CASE("saddle cells are resolved consistently") {
  // Checkerboard 2x2 saddle: both diagonals above the level.
  Matrix v(2, 2);
  v << 1.0, 0.0, 0.0, 1.0;
  const DensityGrid g = DensityGrid::over({0, 2, 0, 2}, v);
  const auto low = extract_isolines(g, 0.4);   // center 0.5 above: joined
  const auto high = extract_isolines(g, 0.6);  // center below: separated
  CHECK(low.size() == 2);
  CHECK(high.size() == 2);
  for (const auto& l : low) CHECK(l.size() == 2);
}

TEST_CASE("contour_set nesting and shapes") {
  const std::vector<double> rhos(std::begin(kDefaultRhos), std::end(kDefaultRhos));
  const ContourSet set = contour_set(kStandard, rhos);
  REQUIRE(set.levels.size() == 3);
  for (const auto& l : set.levels) {
    REQUIRE(l.polylines.size() == 1);
    CHECK(is_closed(l.polylines[0]));
    // Mahalanobis circle from the chi-square(2) quantile.
    const double r = std::sqrt(-2.0 * std::log(1.0 - l.rho));
    const double grid_step = (set.bounds.xmax - set.bounds.xmin) / static_cast<double>(set.resolution.nx);
    for (const auto& p : l.polylines[0]) CHECK(std::abs(std::hypot(p.x, p.y) - r) < 2.0 * grid_step);
    for (const auto& p : l.polylines[0]) {
      CHECK(p.x >= set.bounds.xmin);
      CHECK(p.x <= set.bounds.xmax);
      CHECK(p.y >= set.bounds.ymin);
      CHECK(p.y <= set.bounds.ymax);
    }
  }
  for (int i = 0; i + 1 < 3; ++i) {
    const auto& inner = set.levels[static_cast<std::size_t>(i)].polylines[0];
    const auto& outer = set.levels[static_cast<std::size_t>(i + 1)].polylines[0];
    for (const auto& p : inner) CHECK(inside(outer, p));
  }

  // A 3%-mass mode has no core contour but shows up at 0.95. The default
  // +-4 aggregate sigma box would clip it, so the bounds are explicit.
  const MixtureModel minor({{0.97, Gaussian(vec2(0, 0), Matrix::Identity(2, 2))},
                            {0.03, Gaussian(vec2(8, 0), 0.25 * Matrix::Identity(2, 2))}});
  const ContourSet ms = contour_set(minor, rhos, {256, 256}, Bounds{-5, 11, -5, 5});
  auto near_minor = [](const ContourLevelSet& l) {
    int n = 0;
    for (const auto& line : l.polylines) n += std::abs(line.front().x - 8.0) < 2.0;
    return n;
  };
  CHECK(near_minor(ms.levels[0]) == 0);
  CHECK(near_minor(ms.levels[2]) == 1);
}
