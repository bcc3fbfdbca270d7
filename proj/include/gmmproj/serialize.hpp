#pragma once

#include "gmmproj/contours.hpp"
#include "gmmproj/fitting.hpp"
#include "gmmproj/metrics.hpp"
#include "gmmproj/sampling.hpp"
#include "gmmproj/types.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>

namespace gmmproj {

using json = nlohmann::json;

// {dim, components:[{weight, mean:[...], cov:[[...]]}]} with full covariances.
json to_json(const MixtureModel& m);
MixtureModel mixture_from_json(const json& j);

// {dim, d, eigenvalues:[...], basis:[[column 0...], [column 1...], ...]}.
json to_json(const ProjectionMatrix& p);
ProjectionMatrix projection_from_json(const json& j);

json to_json(const FitReport& r);

json to_json(const Bounds& b);
Bounds bounds_from_json(const json& j);

// {class_id, bounds, resolution, levels:[{rho, threshold, polylines:[[[x,y],...]]}]}.
json contour_json(int class_id, const ContourSet& set);

json to_json(const MetricReport& r);
// Aligned plain-text table, one row per class plus the weighted average.
std::string metric_table(const MetricReport& r);

// {classes:[{name, dims:[{kind:"trapezoid", params:[a,b,c,d]}, ...]}]}.
AnalyticSpec analytic_spec_from_json(const json& j);
json to_json(const AnalyticSpec& spec);

json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const json& j);

}  // namespace gmmproj
