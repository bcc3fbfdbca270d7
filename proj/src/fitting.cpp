#include "gmmproj/fitting.hpp"

#include "gmmproj/density.hpp"
#include "gmmproj/error.hpp"
#include "gmmproj/linalg.hpp"
#include "gmmproj/moments.hpp"
#include "gmmproj/projection.hpp"
#include "gmmproj/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

namespace gmmproj {

namespace {

constexpr int kLloydIterations = 10;
constexpr double kEmptyComponentFraction = 1e-6;
constexpr double kInf = std::numeric_limits<double>::infinity();

struct RunOutcome {
  std::optional<MixtureModel> model;
  double loglik = -kInf;
  int iterations = 0;
  EmRun trace;
};

std::vector<Index> kmeans_pp_seeds(const Matrix& x, int k, Rng& rng) {
  const Index n = x.rows();
  std::vector<Index> seeds;
  seeds.push_back(static_cast<Index>(rng.below(static_cast<std::uint64_t>(n))));
  Vector dist2 = (x.rowwise() - x.row(seeds.back())).rowwise().squaredNorm();
  while (static_cast<int>(seeds.size()) < k) {
    const double total = dist2.sum();
    Index pick = 0;
    if (total > 0.0) {
      const double u = rng.uniform() * total;
      double acc = 0.0;
      pick = n - 1;
      for (Index i = 0; i < n; ++i) {
        acc += dist2(i);
        if (acc > u) {
          pick = i;
          break;
        }
      }
    } else {
      pick = static_cast<Index>(rng.below(static_cast<std::uint64_t>(n)));
    }
    seeds.push_back(pick);
    dist2 = dist2.cwiseMin((x.rowwise() - x.row(pick)).rowwise().squaredNorm());
  }
  return seeds;
}

// Hard assignments after k-means++ seeding and a fixed number of Lloyd steps.
std::vector<int> kmeans_labels(const Matrix& x, int k, Rng& rng) {
  const Index n = x.rows();
  Matrix centers(k, x.cols());
  const auto seeds = kmeans_pp_seeds(x, k, rng);
  for (int c = 0; c < k; ++c) centers.row(c) = x.row(seeds[static_cast<std::size_t>(c)]);

  std::vector<int> labels(static_cast<std::size_t>(n), 0);
  for (int it = 0; it < kLloydIterations; ++it) {
    for (Index i = 0; i < n; ++i) {
      Index best = 0;
      (centers.rowwise() - x.row(i)).rowwise().squaredNorm().minCoeff(&best);
      labels[static_cast<std::size_t>(i)] = static_cast<int>(best);
    }
    Matrix sums = Matrix::Zero(k, x.cols());
    std::vector<Index> counts(static_cast<std::size_t>(k), 0);
    for (Index i = 0; i < n; ++i) {
      const int l = labels[static_cast<std::size_t>(i)];
      sums.row(l) += x.row(i);
      ++counts[static_cast<std::size_t>(l)];
    }
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) {
        centers.row(c) = sums.row(c) / static_cast<double>(counts[static_cast<std::size_t>(c)]);
      }
    }
  }
  return labels;
}

// Responsibility-weighted maximum-likelihood update with diagonal loading.
// Components flagged in `reseed` restart at `anchor` with the global spread.
MixtureModel m_step(const Matrix& x, const Matrix& resp, const Vector& mass, double loading,
                    const std::vector<bool>& reseed, const Vector& anchor, const Gaussian& global) {
  const double n = static_cast<double>(x.rows());
  std::vector<Component> comps;
  comps.reserve(static_cast<std::size_t>(resp.cols()));
  double total = 0.0;
  for (Index k = 0; k < resp.cols(); ++k) {
    if (reseed[static_cast<std::size_t>(k)]) {
      Matrix cov = global.cov();
      cov.diagonal().array() += loading;
      comps.push_back({1.0 / n, Gaussian::trusted(anchor, std::move(cov))});
    } else {
      const double nk = mass(k);
      Vector mean = (x.transpose() * resp.col(k)) / nk;
      const Matrix centered = x.rowwise() - mean.transpose();
      const Matrix weighted = centered.array().colwise() * resp.col(k).array();
      Matrix cov = (weighted.transpose() * centered) / nk;
      cov = (0.5 * (cov + cov.transpose())).eval();
      cov.diagonal().array() += loading;
      comps.push_back({nk / n, Gaussian::trusted(std::move(mean), std::move(cov))});
    }
    total += comps.back().weight;
  }
  for (auto& c : comps) c.weight /= total;
  return MixtureModel(std::move(comps));
}

RunOutcome run_em(const Matrix& x, int k, const FitConfig& cfg, double loading,
                  const Gaussian& global, Rng& rng) {
  const Index n = x.rows();
  RunOutcome out;
  const auto labels = kmeans_labels(x, k, rng);
  Matrix resp = Matrix::Zero(n, k);
  for (Index i = 0; i < n; ++i) resp(i, labels[static_cast<std::size_t>(i)]) = 1.0;

  auto fail = [&out](std::string why) {
    out.trace.failed = true;
    out.trace.failure = std::move(why);
    out.model.reset();
    return out;
  };

  // Before the first E-step the most isolated point stands in for the
  // lowest-density one.
  Index far = 0;
  (x.rowwise() - global.mean().transpose()).rowwise().squaredNorm().maxCoeff(&far);
  Vector anchor = x.row(far).transpose();
  bool reseeded = false;

  for (int it = 0;; ++it) {
    const Vector mass = resp.colwise().sum().transpose();
    std::vector<bool> reseed(static_cast<std::size_t>(k), false);
    for (Index c = 0; c < k; ++c) {
      if (mass(c) >= kEmptyComponentFraction * static_cast<double>(n)) continue;
      if (reseeded) return fail("a component emptied twice");
      reseed[static_cast<std::size_t>(c)] = true;
      reseeded = true;
      out.trace.reseeds.push_back(out.trace.loglik.size());
    }
    try {
      MixtureModel model = m_step(x, resp, mass, loading, reseed, anchor, global);
      const Matrix logs = MixtureDensity(model).weighted_component_log_pdf(x);
      const Vector per_point = log_sum_exp_rows(logs);
      const double ll = per_point.sum();
      if (!std::isfinite(ll)) return fail("non-finite log-likelihood");
      out.trace.loglik.push_back(ll);
      out.loglik = ll;
      out.iterations = it;
      out.model = std::move(model);
      Index worst = 0;
      per_point.minCoeff(&worst);
      anchor = x.row(worst).transpose();

      const auto& trace = out.trace.loglik;
      const bool just_reseeded =
          !out.trace.reseeds.empty() && out.trace.reseeds.back() + 1 == trace.size();
      if (trace.size() >= 2 && !just_reseeded) {
        const double prev = trace[trace.size() - 2];
        if (ll - prev < cfg.loglik_tolerance * std::abs(prev)) {
          out.trace.stop = StopReason::tolerance;
          break;
        }
      }
      if (it >= cfg.max_iterations) {
        out.trace.stop = StopReason::max_iterations;
        break;
      }
      resp = (logs.colwise() - per_point).array().exp().matrix();
    } catch (const SingularModelError& e) {
      return fail(e.what());
    }
  }
  return out;
}

void check_samples(const Matrix& samples, const char* what) {
  require(samples.rows() >= 2, "insufficient_samples",
          std::string(what) + ": need at least 2 samples");
  require(samples.cols() >= 1, "invalid_dimension", std::string(what) + ": samples have no columns");
  require(samples.allFinite(), "non_finite", std::string(what) + ": samples contain non-finite values");
}

}  // namespace

void FitConfig::validate() const {
  require(k_min >= 1 && k_max >= k_min, "invalid_config", "fit config: need 1 <= k_min <= k_max");
  require(max_iterations >= 1, "invalid_config", "fit config: max_iterations must be positive");
  require(restarts >= 1, "invalid_config", "fit config: restarts must be positive");
  require(loglik_tolerance > 0.0, "invalid_config", "fit config: loglik_tolerance must be positive");
  require(reg_epsilon > 0.0, "invalid_config", "fit config: reg_epsilon must be positive");
  require(reduce_dim >= 1, "invalid_config", "fit config: reduce_dim must be positive");
}

const char* to_string(StopReason r) {
  switch (r) {
    case StopReason::tolerance: return "tolerance";
    case StopReason::max_iterations: return "max_iterations";
    case StopReason::closed_form: return "closed_form";
  }
  return "unknown";
}

Gaussian regularized_empirical_gaussian(const Matrix& samples, double eps) {
  const Gaussian emp = empirical_moments(samples);
  Matrix cov = emp.cov();
  cov.diagonal().array() += diagonal_loading(emp.cov(), eps);
  return Gaussian::trusted(emp.mean(), std::move(cov));
}

EmResult em_fit(const Matrix& samples, int k, const FitConfig& cfg, std::uint64_t stream) {
  cfg.validate();
  check_samples(samples, "em_fit");
  require(k >= 1, "invalid_config", "em_fit: k must be positive");
  if (samples.rows() < k) {
    throw ValidationError("infeasible", "em_fit: " + std::to_string(samples.rows()) +
                                            " samples cannot support " + std::to_string(k) +
                                            " components");
  }

  if (k == 1) {
    MixtureModel model = MixtureModel::single(regularized_empirical_gaussian(samples, cfg.reg_epsilon));
    const double ll = total_log_likelihood(model, samples);
    EmRun run;
    run.loglik = {ll};
    run.stop = StopReason::closed_form;
    return EmResult{std::move(model), ll, 0, true, StopReason::closed_form, {run}};
  }

  const Gaussian global = empirical_moments(samples);
  const double loading = diagonal_loading(global.cov(), cfg.reg_epsilon);

  std::vector<RunOutcome> outcomes;
  outcomes.reserve(static_cast<std::size_t>(cfg.restarts));
  for (int r = 0; r < cfg.restarts; ++r) {
    Rng rng(derive_stream(cfg.seed, {stream, static_cast<std::uint64_t>(k), static_cast<std::uint64_t>(r)}));
    outcomes.push_back(run_em(samples, k, cfg, loading, global, rng));
  }

  std::optional<std::size_t> best;
  for (std::size_t r = 0; r < outcomes.size(); ++r) {
    if (!outcomes[r].model) continue;
    if (!best || outcomes[r].loglik > outcomes[*best].loglik) best = r;
  }
  if (!best) {
    throw NumericalError("fit_failure", "em_fit: all " + std::to_string(cfg.restarts) +
                                            " restarts degenerated for k=" + std::to_string(k) +
                                            " (" + outcomes.front().trace.failure + ")");
  }
  std::vector<EmRun> runs;
  for (const auto& o : outcomes) runs.push_back(o.trace);
  RunOutcome& win = outcomes[*best];
  const StopReason stop = win.trace.stop;
  return EmResult{std::move(*win.model), win.loglik, win.iterations, stop == StopReason::tolerance,
                  stop, std::move(runs)};
}

double mixture_parameter_count(int k, Index d) {
  const double kd = static_cast<double>(k);
  const double dd = static_cast<double>(d);
  return (kd - 1.0) + kd * dd + kd * dd * (dd + 1.0) / 2.0;
}

double total_log_likelihood(const MixtureModel& m, const Matrix& samples) {
  return MixtureDensity(m).log_pdf_rows(samples).sum();
}

double bic_score(const MixtureModel& m, const Matrix& samples) {
  require(samples.cols() == m.dim(), "dimension_mismatch", "bic_score: sample dimension differs from model");
  require(samples.rows() >= 1, "insufficient_samples", "bic_score: no samples");
  const double ll = total_log_likelihood(m, samples);
  if (!std::isfinite(ll)) return kInf;
  const double p = mixture_parameter_count(static_cast<int>(m.size()), m.dim());
  return p * std::log(static_cast<double>(samples.rows())) - 2.0 * ll;
}

Selection select_components(const Matrix& samples, const FitConfig& cfg, std::uint64_t stream) {
  cfg.validate();
  check_samples(samples, "select_components");
  const Index n = samples.rows();
  require(n >= cfg.k_min, "infeasible",
          "select_components: " + std::to_string(n) + " samples is fewer than k_min=" +
              std::to_string(cfg.k_min));

  const Index d = samples.cols();
  const bool reduce = d > cfg.reduce_dim;
  Matrix sweep = samples;
  if (reduce) {
    const Gaussian emp = empirical_moments(samples);
    const ProjectionMatrix pca = principal_projection(emp.cov(), cfg.reduce_dim);
    sweep = project_samples(samples, pca, emp.mean());
  }

  const int count = cfg.k_max - cfg.k_min + 1;
  std::vector<double> bic(static_cast<std::size_t>(count), kInf);
  std::vector<std::optional<EmResult>> fits(static_cast<std::size_t>(count));
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < count; ++i) {
    const int k = cfg.k_min + i;
    if (k > n) continue;
    try {
      EmResult fit = em_fit(sweep, k, cfg, stream);
      bic[static_cast<std::size_t>(i)] = bic_score(fit.model, sweep);
      fits[static_cast<std::size_t>(i)] = std::move(fit);
    } catch (const Error&) {
      // Recorded as +inf.
    }
  }

  FitReport report;
  int chosen = -1;
  for (int i = 0; i < count; ++i) {
    const double b = bic[static_cast<std::size_t>(i)];
    report.bic_curve.emplace_back(cfg.k_min + i, b);
    if (std::isfinite(b) && (chosen < 0 || b < bic[static_cast<std::size_t>(chosen)])) chosen = i;
  }
  if (chosen < 0) {
    throw NumericalError("selection_failure",
                         "select_components: no component count in [" + std::to_string(cfg.k_min) +
                             ", " + std::to_string(cfg.k_max) + "] could be fitted");
  }
  const int k = cfg.k_min + chosen;
  EmResult final_fit = reduce ? em_fit(samples, k, cfg, stream) : std::move(*fits[static_cast<std::size_t>(chosen)]);

  report.chosen_k = k;
  report.final_loglik = final_fit.loglik;
  report.iterations_used = final_fit.iterations;
  report.converged = final_fit.converged;
  report.stop = final_fit.stop;
  report.input_dim = d;
  report.sweep_dim = sweep.cols();
  report.n_samples = n;
  report.seed = cfg.seed;
  return {std::move(final_fit.model), std::move(report)};
}

std::vector<ClassFit> fit_labeled(const LabeledDataset& data, const FitConfig& cfg) {
  cfg.validate();
  const auto counts = data.class_counts();
  std::vector<ClassFit> out;
  for (std::size_t c = 0; c < data.num_classes(); ++c) {
    ClassFit fit;
    fit.class_id = static_cast<int>(c);
    fit.name = data.label_names()[c];
    fit.count = counts[c];
    if (counts[c] < 2 || counts[c] < static_cast<std::size_t>(cfg.k_min)) {
      fit.error = "class has " + std::to_string(counts[c]) + " samples; k_min is " +
                  std::to_string(cfg.k_min);
    } else {
      try {
        Selection sel = select_components(data.class_samples(static_cast<int>(c)), cfg, c);
        fit.model = std::move(sel.model);
        fit.report = std::move(sel.report);
      } catch (const Error& e) {
        fit.error = e.what();
      }
    }
    out.push_back(std::move(fit));
  }
  return out;
}

}  // namespace gmmproj
