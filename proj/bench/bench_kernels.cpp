// Parallel kernels against their serial reference, plus the weight-update path.
#include "gmmproj/contours.hpp"
#include "gmmproj/density.hpp"
#include "gmmproj/linalg.hpp"
#include "gmmproj/metrics.hpp"
#include "gmmproj/pipeline.hpp"
#include "gmmproj/projection.hpp"
#include "gmmproj/reference.hpp"
#include "test_support.hpp"

#include <benchmark/benchmark.h>

using namespace gmmproj;
using namespace gmmproj::testing;

namespace {

MixtureModel planar_mixture() {
  Rng rng(1);
  return random_mixture(2, 5, rng);
}

Matrix cloud(Index n, Index dim) {
  Rng rng(2);
  return random_matrix(n, dim, rng);
}

void BM_rasterize(benchmark::State& state) {
  const MixtureModel m = planar_mixture();
  const Bounds b = default_bounds(m);
  const Resolution res{state.range(0), state.range(0)};
  for (auto _ : state) benchmark::DoNotOptimize(grid_density(m, b, res));
}

void BM_rasterize_serial(benchmark::State& state) {
  const MixtureModel m = planar_mixture();
  const Bounds b = default_bounds(m);
  const Resolution res{state.range(0), state.range(0)};
  for (auto _ : state) benchmark::DoNotOptimize(reference::grid_density(m, b, res));
}

void BM_kde(benchmark::State& state) {
  const Matrix pts = cloud(state.range(0), 2);
  const Bounds b{-4, 4, -4, 4};
  for (auto _ : state) benchmark::DoNotOptimize(kde_grid(pts, b, {128, 128}));
}

void BM_kde_serial(benchmark::State& state) {
  const Matrix pts = cloud(state.range(0), 2);
  const Bounds b{-4, 4, -4, 4};
  const Bandwidth bw = scott_bandwidth(pts, b);
  for (auto _ : state) benchmark::DoNotOptimize(reference::kde_values(pts, b, {128, 128}, bw));
}

void BM_loglik(benchmark::State& state) {
  Rng rng(3);
  const MixtureModel m = random_mixture(20, 4, rng);
  const Matrix pts = cloud(state.range(0), 20);
  const MixtureDensity density(m);
  for (auto _ : state) benchmark::DoNotOptimize(density.log_pdf_rows(pts));
}

void BM_loglik_serial(benchmark::State& state) {
  Rng rng(3);
  const MixtureModel m = random_mixture(20, 4, rng);
  const Matrix pts = cloud(state.range(0), 20);
  for (auto _ : state) benchmark::DoNotOptimize(reference::mixture_log_pdf_rows(m, pts));
}

// Projection-matrix construction plus mixture projection, L = 10, 3 components each.
void BM_weight_update(benchmark::State& state) {
  const Index dim = state.range(0);
  Rng rng(4);
  std::vector<MixtureModel> models;
  for (int c = 0; c < 10; ++c) {
    std::vector<Component> comps;
    for (int k = 0; k < 3; ++k) {
      const Matrix f = random_matrix(dim, 8, rng);
      Matrix cov = f * f.transpose() / 8.0;
      cov.diagonal().array() += 0.5;
      comps.push_back({1.0 / 3.0, Gaussian(random_vector(dim, rng, 3.0), cov)});
    }
    models.emplace_back(std::move(comps));
  }
  const ImportanceWeights tau = ImportanceWeights::equal(10);
  for (auto _ : state) {
    const WeightedMomentSet w = build_weighted_moments(aggregate_all(models), tau);
    const ProjectionMatrix p = projection_from_ua(w, 2);
    for (const auto& m : models) benchmark::DoNotOptimize(project_mixture(m, p));
  }
}

void BM_top_eigenpairs(benchmark::State& state) {
  Rng rng(5);
  const Index n = state.range(0);
  const Matrix f = random_matrix(n, 30, rng);
  Matrix s = f * f.transpose();
  s.diagonal().array() += 1.0;
  for (auto _ : state) benchmark::DoNotOptimize(top_eigenpairs(s, 3));
}

}  // namespace

BENCHMARK(BM_rasterize)->Arg(128)->Arg(256)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_rasterize_serial)->Arg(128)->Arg(256)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_kde)->Arg(1000)->Arg(5000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_kde_serial)->Arg(1000)->Arg(5000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_loglik)->Arg(10000)->Arg(100000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_loglik_serial)->Arg(10000)->Arg(100000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_weight_update)->Arg(256)->Arg(1024)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_top_eigenpairs)->Arg(300)->Arg(1024)->Arg(1617)->Unit(benchmark::kMillisecond);

int main(int argc, char** argv) {
  ensure_linalg_backend(argv);
  benchmark::Initialize(&argc, argv);
  if (benchmark::ReportUnrecognizedArguments(argc, argv)) return 1;
  benchmark::RunSpecifiedBenchmarks();
  benchmark::Shutdown();
  return 0;
}
