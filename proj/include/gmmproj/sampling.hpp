#pragma once

#include "gmmproj/rng.hpp"
#include "gmmproj/types.hpp"

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

namespace gmmproj {

// Rows per independently seeded chunk. Outputs do not depend on the number
// of threads because every chunk owns its substream.
inline constexpr Index kSampleChunk = 4096;

// x = mu + L z with L L^T = Sigma + loading; all-zero covariance yields mu.
Matrix sample_gaussian(const Gaussian& g, Index n, std::uint64_t seed);

// Ancestral sampling: categorical component draw, then the component's normal.
Matrix sample_mixture(const MixtureModel& m, Index n, std::uint64_t seed);

// Same as sample_mixture, also returning the drawn component of every row.
Matrix sample_mixture(const MixtureModel& m, Index n, std::uint64_t seed,
                      std::vector<int>& component_out);

namespace dist {
struct Normal { double mean; double stddev; };
struct Uniform { double lo; double hi; };
// Rising ramp on [a, b], flat on [b, c], falling on [c, d].
struct Trapezoid { double a, b, c, d; };
struct Constant { double value; };
}  // namespace dist

using Marginal = std::variant<dist::Normal, dist::Uniform, dist::Trapezoid, dist::Constant>;

void validate_marginal(const Marginal& m);
double marginal_mean(const Marginal& m);
double marginal_cdf(const Marginal& m, double x);
// Inverse-CDF (trapezoid, uniform) or direct (normal) draw.
double sample_marginal(const Marginal& m, Rng& rng);

struct AnalyticClass {
  std::string name;
  std::vector<Marginal> dims;
};

// Independent per-dimension 1D laws for each class.
struct AnalyticSpec {
  std::vector<AnalyticClass> classes;

  void validate() const;
};

inline constexpr Index kDefaultAnalyticSamples = 100000;

LabeledDataset sample_analytic(const AnalyticSpec& spec, Index n_per_class, std::uint64_t seed);

struct SyntheticClass {
  std::string name;
  std::vector<Vector> means;
  std::vector<Matrix> covs;
  std::vector<double> weights;
};

struct SyntheticDataset {
  LabeledDataset data;
  std::vector<MixtureModel> truth;
};

SyntheticDataset make_synthetic_multimodal(const std::vector<SyntheticClass>& classes,
                                           const std::vector<Index>& n_per_class,
                                           std::uint64_t seed);

}  // namespace gmmproj
