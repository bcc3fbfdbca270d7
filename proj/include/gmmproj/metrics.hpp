#pragma once

#include "gmmproj/types.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace gmmproj {

struct Bandwidth {
  double hx = 0.0;
  double hy = 0.0;
};

// Scott's rule for 2D: h_a = sigma_a * N^(-1/6), floored at
// 1e-6 * (extent of the bounds along that axis).
Bandwidth scott_bandwidth(const Matrix& points, const Bounds& bounds);

// Product-Gaussian KDE evaluated at cell centers (cell averages along an
// axis whose bandwidth is below the cell width), normalized to unit mass.
DensityGrid kde_grid(const Matrix& points, const Bounds& bounds, Resolution res,
                     const std::optional<Bandwidth>& bandwidth = std::nullopt);

inline constexpr double kKlFloorRelative = 1e-12;

// Riemann-sum KL(p || q) over cells with p > 0; q floored at 1e-12 * max(q),
// but never above p in the same cell.
double kl_grid(const DensityGrid& p, const DensityGrid& q);

inline constexpr int kDefaultProjections = 100;
inline constexpr Index kDefaultSlicedSamples = 5000;

// Unit directions, one uniform angle per equal-width stratum of the circle.
Matrix circle_directions(int count, std::uint64_t seed);

// Sliced 2-Wasserstein over the given unit directions (count x 2).
double sliced_w2(const Matrix& a, const Matrix& b, const Matrix& directions);
double sliced_w2(const Matrix& a, const Matrix& b, int n_projections = kDefaultProjections,
                 std::uint64_t seed = 0);

// Squared 1D 2-Wasserstein between empirical laws by quantile matching.
double wasserstein2_squared_1d(std::vector<double> a, std::vector<double> b);

double weighted_average(const std::vector<double>& values, const ImportanceWeights& tau);

struct EvaluationConfig {
  Resolution resolution{256, 256};
  Index sample_budget = kDefaultSlicedSamples;
  int n_projections = kDefaultProjections;
  std::optional<Bandwidth> bandwidth;  // Scott's rule when empty
  double reg_epsilon = 1e-6;           // loading of the single-Gaussian surrogate
  std::uint64_t seed = 0;
};

struct ClassMetrics {
  int class_id = 0;
  std::string name;
  double kl_wgmm = 0.0;
  double kl_uapca = 0.0;
  double sw2_wgmm = 0.0;
  double sw2_uapca = 0.0;
};

struct MetricReport {
  std::vector<ClassMetrics> per_class;
  double kl_wgmm = 0.0;
  double kl_uapca = 0.0;
  double sw2_wgmm = 0.0;
  double sw2_uapca = 0.0;
  Vector tau;
  EvaluationConfig config;
  std::string bandwidth_rule;
  double kl_floor = kKlFloorRelative;
};

// Projects every class with the weighted mixture-based projection and
// compares the projected mixture (wGMM) and the projected single Gaussian
// (UAPCA) against a KDE of the projected samples (reference).
MetricReport evaluate_strategies(const LabeledDataset& data, const std::vector<MixtureModel>& models,
                                 const ImportanceWeights& tau, const EvaluationConfig& cfg = {});

}  // namespace gmmproj
