#pragma once

#include "gmmproj/types.hpp"

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace gmmproj {

struct FitConfig {
  int k_min = 1;
  int k_max = 30;
  int max_iterations = 200;
  double loglik_tolerance = 1e-4;
  int restarts = 5;
  double reg_epsilon = 1e-6;
  Index reduce_dim = 50;
  std::uint64_t seed = 0;

  void validate() const;
};

enum class StopReason { tolerance, max_iterations, closed_form };

const char* to_string(StopReason r);

// Trace of one EM run. `loglik` holds the log-likelihood after every E-step;
// `reseeds` lists trace indices at which an empty component was re-seeded.
struct EmRun {
  std::vector<double> loglik;
  std::vector<std::size_t> reseeds;
  bool failed = false;
  std::string failure;
  StopReason stop = StopReason::tolerance;
};

struct EmResult {
  MixtureModel model;
  double loglik;
  int iterations;
  bool converged;
  StopReason stop;
  std::vector<EmRun> runs;  // one per restart, in restart order
};

// Best of cfg.restarts EM runs (k-means++ seeding, 10 Lloyd iterations,
// then EM). `stream` distinguishes independent tasks (e.g. the class id)
// so per-task RNG streams derive from (cfg.seed, stream, k, restart).
EmResult em_fit(const Matrix& samples, int k, const FitConfig& cfg, std::uint64_t stream = 0);

// Empirical mean/covariance with diagonal loading eps * trace / D.
// This is the closed-form single-component fit.
Gaussian regularized_empirical_gaussian(const Matrix& samples, double eps);

// Free parameters of a full-covariance mixture: (K-1) + K*D + K*D(D+1)/2.
double mixture_parameter_count(int k, Index d);

double total_log_likelihood(const MixtureModel& m, const Matrix& samples);

// p ln N - 2 L. +inf when any sample has zero density.
double bic_score(const MixtureModel& m, const Matrix& samples);

struct FitReport {
  int chosen_k = 0;
  std::vector<std::pair<int, double>> bic_curve;  // failed fits carry +inf
  double final_loglik = -std::numeric_limits<double>::infinity();
  int iterations_used = 0;
  bool converged = false;
  StopReason stop = StopReason::tolerance;
  Index input_dim = 0;
  Index sweep_dim = 0;  // < input_dim when the sweep ran on a PCA reduction
  Index n_samples = 0;
  std::uint64_t seed = 0;
};

struct Selection {
  MixtureModel model;  // fitted in the original space
  FitReport report;
};

Selection select_components(const Matrix& samples, const FitConfig& cfg, std::uint64_t stream = 0);

struct ClassFit {
  int class_id = 0;
  std::string name;
  std::size_t count = 0;
  std::optional<MixtureModel> model;
  std::optional<FitReport> report;
  std::string error;  // non-empty when the class failed

  bool ok() const { return model.has_value(); }
};

std::vector<ClassFit> fit_labeled(const LabeledDataset& data, const FitConfig& cfg);

}  // namespace gmmproj
