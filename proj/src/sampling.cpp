#include "gmmproj/sampling.hpp"

#include "gmmproj/error.hpp"
#include "gmmproj/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace gmmproj {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

Matrix sampling_factor(const Gaussian& g) {
  if (g.cov().trace() == 0.0) return Matrix::Zero(g.dim(), g.dim());
  return regularized_cholesky(g.cov());
}

Index chunk_count(Index n) { return (n + kSampleChunk - 1) / kSampleChunk; }

void fill_normals(Matrix& z, Rng& rng) {
  // Row-major draw order keeps chunk contents independent of layout.
  for (Index r = 0; r < z.rows(); ++r) {
    for (Index c = 0; c < z.cols(); ++c) z(r, c) = rng.normal();
  }
}

}  // namespace

Matrix sample_gaussian(const Gaussian& g, Index n, std::uint64_t seed) {
  require(n >= 1, "invalid_count", "sample_gaussian: n must be positive");
  const Matrix lower = sampling_factor(g);
  const Index d = g.dim();
  Matrix out(n, d);
  const Index chunks = chunk_count(n);
#pragma omp parallel for schedule(static)
  for (Index c = 0; c < chunks; ++c) {
    const Index start = c * kSampleChunk;
    const Index len = std::min(kSampleChunk, n - start);
    Rng rng(derive_stream(seed, {static_cast<std::uint64_t>(c)}));
    Matrix z(len, d);
    fill_normals(z, rng);
    out.middleRows(start, len) = (z * lower.transpose()).rowwise() + g.mean().transpose();
  }
  return out;
}

Matrix sample_mixture(const MixtureModel& m, Index n, std::uint64_t seed,
                      std::vector<int>& component_out) {
  require(n >= 1, "invalid_count", "sample_mixture: n must be positive");
  const std::size_t k_count = m.size();
  std::vector<Matrix> factors;
  factors.reserve(k_count);
  for (const auto& c : m.components()) factors.push_back(sampling_factor(c.gaussian));
  std::vector<double> cumulative(k_count);
  const Vector weights = m.weights();
  std::partial_sum(weights.begin(), weights.end(), cumulative.begin());

  const Index d = m.dim();
  Matrix out(n, d);
  component_out.assign(static_cast<std::size_t>(n), 0);
  const Index chunks = chunk_count(n);
#pragma omp parallel for schedule(static)
  for (Index c = 0; c < chunks; ++c) {
    const Index start = c * kSampleChunk;
    const Index len = std::min(kSampleChunk, n - start);
    Rng rng(derive_stream(seed, {static_cast<std::uint64_t>(c)}));
    Matrix z(len, d);
    std::vector<std::vector<Index>> rows(k_count);
    for (Index r = 0; r < len; ++r) {
      const double u = rng.uniform() * cumulative.back();
      std::size_t k = 0;
      while (k + 1 < k_count && u >= cumulative[k]) ++k;
      // Skip trailing zero-weight components hit by rounding.
      while (k > 0 && m[k].weight == 0.0) --k;
      rows[k].push_back(r);
      component_out[static_cast<std::size_t>(start + r)] = static_cast<int>(k);
      for (Index j = 0; j < d; ++j) z(r, j) = rng.normal();
    }
    for (std::size_t k = 0; k < k_count; ++k) {
      if (rows[k].empty()) continue;
      const auto cnt = static_cast<Index>(rows[k].size());
      Matrix zk(cnt, d);
      for (Index i = 0; i < cnt; ++i) zk.row(i) = z.row(rows[k][static_cast<std::size_t>(i)]);
      const Matrix xk = (zk * factors[k].transpose()).rowwise() + m[k].gaussian.mean().transpose();
      for (Index i = 0; i < cnt; ++i) out.row(start + rows[k][static_cast<std::size_t>(i)]) = xk.row(i);
    }
  }
  return out;
}

Matrix sample_mixture(const MixtureModel& m, Index n, std::uint64_t seed) {
  std::vector<int> ignored;
  return sample_mixture(m, n, seed, ignored);
}

void validate_marginal(const Marginal& m) {
  std::visit(overloaded{
                 [](const dist::Normal& p) {
                   require(std::isfinite(p.mean) && std::isfinite(p.stddev) && p.stddev > 0.0,
                           "invalid_spec", "normal: stddev must be positive");
                 },
                 [](const dist::Uniform& p) {
                   require(std::isfinite(p.lo) && std::isfinite(p.hi) && p.lo < p.hi,
                           "invalid_spec", "uniform: need a < b");
                 },
                 [](const dist::Trapezoid& p) {
                   require(std::isfinite(p.a) && std::isfinite(p.d) && p.a <= p.b && p.b <= p.c &&
                               p.c <= p.d && p.a < p.d,
                           "invalid_spec", "trapezoid: need a <= b <= c <= d and a < d");
                 },
                 [](const dist::Constant& p) {
                   require(std::isfinite(p.value), "invalid_spec", "constant: value must be finite");
                 },
             },
             m);
}

namespace {

double trapezoid_height(const dist::Trapezoid& t) { return 2.0 / ((t.d - t.a) + (t.c - t.b)); }

}  // namespace

double marginal_mean(const Marginal& m) {
  return std::visit(
      overloaded{
          [](const dist::Normal& p) { return p.mean; },
          [](const dist::Uniform& p) { return 0.5 * (p.lo + p.hi); },
          [](const dist::Trapezoid& t) {
            const double h = trapezoid_height(t);
            double mean = 0.5 * h * (t.c * t.c - t.b * t.b);
            if (t.b > t.a) {
              mean += h / (t.b - t.a) *
                      ((t.b * t.b * t.b - t.a * t.a * t.a) / 3.0 - t.a * (t.b * t.b - t.a * t.a) / 2.0);
            }
            if (t.d > t.c) {
              mean += h / (t.d - t.c) *
                      (t.d * (t.d * t.d - t.c * t.c) / 2.0 - (t.d * t.d * t.d - t.c * t.c * t.c) / 3.0);
            }
            return mean;
          },
          [](const dist::Constant& p) { return p.value; },
      },
      m);
}

double marginal_cdf(const Marginal& m, double x) {
  return std::visit(
      overloaded{
          [x](const dist::Normal& p) {
            return 0.5 * std::erfc(-(x - p.mean) / (p.stddev * std::numbers::sqrt2));
          },
          [x](const dist::Uniform& p) { return std::clamp((x - p.lo) / (p.hi - p.lo), 0.0, 1.0); },
          [x](const dist::Trapezoid& t) {
            const double h = trapezoid_height(t);
            if (x <= t.a) return 0.0;
            if (x >= t.d) return 1.0;
            if (x < t.b) return h * (x - t.a) * (x - t.a) / (2.0 * (t.b - t.a));
            if (x <= t.c) return 0.5 * h * (t.b - t.a) + h * (x - t.b);
            return 1.0 - h * (t.d - x) * (t.d - x) / (2.0 * (t.d - t.c));
          },
          [x](const dist::Constant& p) { return x >= p.value ? 1.0 : 0.0; },
      },
      m);
}

double sample_marginal(const Marginal& m, Rng& rng) {
  return std::visit(
      overloaded{
          [&rng](const dist::Normal& p) { return p.mean + p.stddev * rng.normal(); },
          [&rng](const dist::Uniform& p) { return p.lo + (p.hi - p.lo) * rng.uniform(); },
          [&rng](const dist::Trapezoid& t) {
            const double h = trapezoid_height(t);
            const double u = rng.uniform();
            const double rise = 0.5 * h * (t.b - t.a);
            const double flat = rise + h * (t.c - t.b);
            if (u < rise) return t.a + std::sqrt(2.0 * u * (t.b - t.a) / h);
            if (u < flat) return t.b + (u - rise) / h;
            return t.d - std::sqrt(2.0 * (1.0 - u) * (t.d - t.c) / h);
          },
          [](const dist::Constant& p) { return p.value; },
      },
      m);
}

void AnalyticSpec::validate() const {
  require(!classes.empty(), "invalid_spec", "analytic spec: no classes");
  const std::size_t d = classes.front().dims.size();
  require(d >= 1, "invalid_spec", "analytic spec: classes need at least one dimension");
  for (const auto& c : classes) {
    require(c.dims.size() == d, "invalid_spec",
            "analytic spec: class '" + c.name + "' has a different dimension count");
    for (const auto& m : c.dims) validate_marginal(m);
  }
}

LabeledDataset sample_analytic(const AnalyticSpec& spec, Index n_per_class, std::uint64_t seed) {
  spec.validate();
  require(n_per_class >= 1, "invalid_count", "sample_analytic: n_per_class must be positive");
  const auto classes = static_cast<Index>(spec.classes.size());
  const auto d = static_cast<Index>(spec.classes.front().dims.size());
  Matrix samples(classes * n_per_class, d);
  std::vector<int> labels(static_cast<std::size_t>(classes * n_per_class));
  std::vector<std::string> names;
  const Index chunks = chunk_count(n_per_class);
  for (Index c = 0; c < classes; ++c) {
    const auto& cls = spec.classes[static_cast<std::size_t>(c)];
    names.push_back(cls.name);
#pragma omp parallel for schedule(static)
    for (Index ch = 0; ch < chunks; ++ch) {
      Rng rng(derive_stream(seed, {static_cast<std::uint64_t>(c), static_cast<std::uint64_t>(ch)}));
      const Index start = ch * kSampleChunk;
      const Index len = std::min(kSampleChunk, n_per_class - start);
      for (Index r = 0; r < len; ++r) {
        const Index row = c * n_per_class + start + r;
        labels[static_cast<std::size_t>(row)] = static_cast<int>(c);
        for (Index j = 0; j < d; ++j) samples(row, j) = sample_marginal(cls.dims[static_cast<std::size_t>(j)], rng);
      }
    }
  }
  return LabeledDataset(std::move(samples), std::move(labels), std::move(names));
}

SyntheticDataset make_synthetic_multimodal(const std::vector<SyntheticClass>& classes,
                                           const std::vector<Index>& n_per_class,
                                           std::uint64_t seed) {
  require(!classes.empty(), "invalid_spec", "synthetic: no classes");
  require(n_per_class.size() == classes.size(), "length_mismatch",
          "synthetic: need one sample count per class");
  std::vector<MixtureModel> truth;
  Index total = 0;
  for (std::size_t c = 0; c < classes.size(); ++c) {
    const auto& cls = classes[c];
    require(!cls.means.empty() && cls.means.size() == cls.covs.size() &&
                cls.means.size() == cls.weights.size(),
            "invalid_spec", "synthetic: class '" + cls.name + "' has inconsistent component lists");
    require(n_per_class[c] >= 1, "invalid_count", "synthetic: class sizes must be positive");
    std::vector<Component> comps;
    for (std::size_t k = 0; k < cls.means.size(); ++k) {
      comps.push_back({cls.weights[k], Gaussian(cls.means[k], cls.covs[k])});
    }
    truth.emplace_back(std::move(comps));
    total += n_per_class[c];
  }
  const Index d = truth.front().dim();
  for (const auto& m : truth) {
    require(m.dim() == d, "dimension_mismatch", "synthetic: classes have different dimensions");
  }

  Matrix samples(total, d);
  std::vector<int> labels(static_cast<std::size_t>(total));
  std::vector<std::string> names;
  Index row = 0;
  for (std::size_t c = 0; c < classes.size(); ++c) {
    const Index n = n_per_class[c];
    samples.middleRows(row, n) = sample_mixture(truth[c], n, derive_stream(seed, {c}));
    std::fill(labels.begin() + row, labels.begin() + row + n, static_cast<int>(c));
    names.push_back(classes[c].name);
    row += n;
  }
  return {LabeledDataset(std::move(samples), std::move(labels), std::move(names)), std::move(truth)};
}

}  // namespace gmmproj
