#pragma once

#include "gmmproj/contours.hpp"
#include "gmmproj/fitting.hpp"
#include "gmmproj/moments.hpp"
#include "gmmproj/serialize.hpp"
#include "gmmproj/types.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace gmmproj {

namespace fs = std::filesystem;

// --tau: "equal", "samples", or an explicit comma-separated list (rescaled
// to sum to one).
struct TauSpec {
  enum class Mode { equal, samples, explicit_list };
  Mode mode = Mode::samples;
  std::vector<double> values;

  static TauSpec parse(const std::string& text);
};

// Sample-based weights need counts for every class; otherwise falls back
// to equal weights with a warning.
ImportanceWeights resolve_tau(const TauSpec& spec, const std::vector<std::size_t>& counts);

std::vector<double> parse_rhos(const std::string& text);

// Per-class models with names and (optional, 0 = unknown) sample counts.
struct ModelBundle {
  std::vector<std::string> names;
  std::vector<MixtureModel> models;
  std::vector<std::size_t> counts;
  std::uint64_t seed = 0;

  std::size_t size() const { return models.size(); }
  bool has_counts() const;
};

// {seed, classes:[{class_id, name, count, model | model_file}]}; model_file
// entries resolve relative to `base_dir`.
ModelBundle bundle_from_json(const json& j, const fs::path& base_dir = {});
json bundle_json(const ModelBundle& b);  // inline models
// Accepts a bundle file or a directory holding models.json.
ModelBundle load_bundle(const fs::path& path);

struct ViewConfig {
  Index d = 2;
  std::vector<double> rhos{std::begin(kDefaultRhos), std::end(kDefaultRhos)};
  Resolution resolution{kDefaultResolution, kDefaultResolution};
  bool center = false;
};

// Everything rendered for one weight vector. Contours exist only for d = 2
// and a non-empty rho list.
struct ProjectedView {
  ImportanceWeights tau;
  ProjectionMatrix projection;
  std::optional<Vector> center;  // P^T mean_bar when display centering is on
  std::vector<MixtureModel> projected;
  std::vector<ContourSet> contours;
};

ProjectedView compute_view(const std::vector<AggregatedMoments>& moments, const std::vector<MixtureModel>& models,
                           const ImportanceWeights& tau, const ViewConfig& cfg);

std::vector<AggregatedMoments> aggregate_all(const std::vector<MixtureModel>& models);

// Per-class contour documents as written by `contours` and served by the
// service. `seed` is carried through from the model bundle.
json class_contours_json(int class_id, const std::string& name, const ContourSet& set, std::uint64_t seed);

std::string contours_svg(const std::vector<std::string>& names, const std::vector<ContourSet>& sets);

// ---- commands ----

struct FitCommand {
  fs::path input;
  std::string label_column = "label";
  FitConfig fit;
  fs::path out = ".";
};
// Writes models.json, model_<id>.json per class and fit_report.json.
// Returns false when any class failed (others are still written).
bool cmd_fit(const FitCommand& c);

struct ProjectCommand {
  fs::path models;
  TauSpec tau;
  Index d = 2;
  bool center = false;
  fs::path out = ".";
};
// Writes projection.json and projected_models.json.
void cmd_project(const ProjectCommand& c);

struct ContoursCommand {
  fs::path models;  // 2D bundle, or a higher-dimensional one projected first
  TauSpec tau;
  bool center = false;
  std::vector<double> rhos{std::begin(kDefaultRhos), std::end(kDefaultRhos)};
  Index resolution = kDefaultResolution;
  std::optional<fs::path> svg;
  fs::path out = ".";
};
// Writes contours_<id>.json per class.
void cmd_contours(const ContoursCommand& c);

struct EvaluateCommand {
  fs::path input;
  std::string label_column = "label";
  fs::path models;
  TauSpec tau;
  Index resolution = 256;
  std::uint64_t seed = 0;
  fs::path out = ".";
};
// Writes metrics.json and metrics.txt; returns the table.
std::string cmd_evaluate(const EvaluateCommand& c);

struct SampleCommand {
  std::optional<fs::path> spec;    // analytic per-dimension laws
  std::optional<fs::path> models;  // or a model bundle
  Index n = kDefaultAnalyticSamples;
  std::string label_column = "label";
  std::uint64_t seed = 0;
  fs::path out = ".";
};
// Writes samples.csv (+ samples.meta.json recording the seed).
void cmd_sample(const SampleCommand& c);

// {"error": {"kind", "code", "message"}}.
json error_json(const std::string& kind, const std::string& code, const std::string& message);

}  // namespace gmmproj
