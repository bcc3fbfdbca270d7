#include "gmmproj/pipeline.hpp"

#include "gmmproj/diagnostics.hpp"
#include "gmmproj/error.hpp"
#include "gmmproj/io.hpp"
#include "gmmproj/metrics.hpp"
#include "gmmproj/projection.hpp"
#include "gmmproj/rng.hpp"
#include "gmmproj/sampling.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace gmmproj {

namespace {

std::vector<double> parse_number_list(const std::string& text, const char* what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto first = item.find_first_not_of(" \t");
    const auto last = item.find_last_not_of(" \t");
    double v = 0.0;
    const char* b = first == std::string::npos ? item.data() : item.data() + first;
    const char* e = first == std::string::npos ? b : item.data() + last + 1;
    const auto [ptr, ec] = std::from_chars(b, e, v);
    if (b == e || ec != std::errc() || ptr != e) {
      throw ValidationError("invalid_argument", std::string(what) + ": '" + item + "' is not a number");
    }
    out.push_back(v);
  }
  require(!out.empty(), "invalid_argument", std::string(what) + ": empty list");
  return out;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ValidationError("io_error", "cannot create " + dir.string() + ": " + ec.message());
}

std::string model_file_name(std::size_t id) { return "model_" + std::to_string(id) + ".json"; }

}  // namespace

TauSpec TauSpec::parse(const std::string& text) {
  TauSpec s;
  if (text == "equal") {
    s.mode = Mode::equal;
  } else if (text == "samples") {
    s.mode = Mode::samples;
  } else {
    s.mode = Mode::explicit_list;
    s.values = parse_number_list(text, "--tau");
  }
  return s;
}

ImportanceWeights resolve_tau(const TauSpec& spec, const std::vector<std::size_t>& counts) {
  switch (spec.mode) {
    case TauSpec::Mode::equal:
      return ImportanceWeights::equal(counts.size());
    case TauSpec::Mode::explicit_list: {
      require(spec.values.size() == counts.size(), "length_mismatch",
              "tau has " + std::to_string(spec.values.size()) + " entries for " + std::to_string(counts.size()) +
                  " classes");
      Vector v(static_cast<Index>(spec.values.size()));
      for (std::size_t i = 0; i < spec.values.size(); ++i) v(static_cast<Index>(i)) = spec.values[i];
      return ImportanceWeights::normalized(v);
    }
    case TauSpec::Mode::samples:
      break;
  }
  const bool known = std::all_of(counts.begin(), counts.end(), [](std::size_t c) { return c > 0; });
  if (!known) {
    warn("class sample counts unknown; using equal weights");
    return ImportanceWeights::equal(counts.size());
  }
  return ImportanceWeights::from_counts(counts);
}

std::vector<double> parse_rhos(const std::string& text) {
  auto rhos = parse_number_list(text, "--rhos");
  for (double r : rhos) require(r > 0.0 && r <= 1.0, "invalid_rho", "--rhos: levels must lie in (0, 1]");
  return rhos;
}

bool ModelBundle::has_counts() const {
  return !counts.empty() && std::all_of(counts.begin(), counts.end(), [](std::size_t c) { return c > 0; });
}

ModelBundle bundle_from_json(const json& j, const fs::path& base_dir) {
  ModelBundle b;
  try {
    require(j.is_object() && j.contains("classes") && j.at("classes").is_array() && !j.at("classes").empty(),
            "invalid_json", "model bundle: 'classes' must be a non-empty array");
    if (j.contains("seed")) b.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& c : j.at("classes")) {
      b.names.push_back(c.contains("name") ? c.at("name").get<std::string>() : "class_" + std::to_string(b.size()));
      b.counts.push_back(c.contains("count") ? c.at("count").get<std::size_t>() : 0);
      if (c.contains("model")) {
        b.models.push_back(mixture_from_json(c.at("model")));
      } else if (c.contains("model_file")) {
        b.models.push_back(mixture_from_json(read_json_file(base_dir / c.at("model_file").get<std::string>())));
      } else {
        throw ValidationError("invalid_json", "model bundle: class entry needs 'model' or 'model_file'");
      }
    }
  } catch (const json::exception& e) {
    throw ValidationError("invalid_json", std::string("model bundle: ") + e.what());
  }
  for (const auto& m : b.models) {
    require(m.dim() == b.models.front().dim(), "dimension_mismatch", "model bundle: classes differ in dimension");
  }
  return b;
}

json bundle_json(const ModelBundle& b) {
  json classes = json::array();
  for (std::size_t i = 0; i < b.size(); ++i) {
    classes.push_back({{"class_id", i}, {"name", b.names[i]}, {"count", b.counts[i]}, {"model", to_json(b.models[i])}});
  }
  return {{"seed", b.seed}, {"classes", classes}};
}

ModelBundle load_bundle(const fs::path& path) {
  const fs::path file = fs::is_directory(path) ? path / "models.json" : path;
  return bundle_from_json(read_json_file(file), file.parent_path());
}

std::vector<AggregatedMoments> aggregate_all(const std::vector<MixtureModel>& models) {
  std::vector<AggregatedMoments> out;
  out.reserve(models.size());
  for (const auto& m : models) out.push_back(aggregate_mixture(m));
  return out;
}

ProjectedView compute_view(const std::vector<AggregatedMoments>& moments, const std::vector<MixtureModel>& models,
                           const ImportanceWeights& tau, const ViewConfig& cfg) {
  require(moments.size() == models.size(), "length_mismatch", "moments and models differ in length");
  require(cfg.d >= 1, "invalid_dimension", "target dimension must be >= 1");
  const WeightedMomentSet wms(moments, tau);
  ProjectedView view{tau, projection_from_ua(wms, cfg.d), std::nullopt, {}, {}};
  if (cfg.center) view.center = Vector(view.projection.basis().transpose() * wms.mean_bar());
  view.projected.reserve(models.size());
  for (const auto& m : models) {
    MixtureModel p = project_mixture(m, view.projection);
    view.projected.push_back(view.center ? translate_mixture(p, *view.center) : std::move(p));
  }
  if (cfg.d == 2 && !cfg.rhos.empty()) {
    for (const auto& p : view.projected) view.contours.push_back(contour_set(p, cfg.rhos, cfg.resolution));
  }
  return view;
}

json class_contours_json(int class_id, const std::string& name, const ContourSet& set, std::uint64_t seed) {
  json j = contour_json(class_id, set);
  j["name"] = name;
  j["seed"] = seed;
  return j;
}

std::string contours_svg(const std::vector<std::string>& names, const std::vector<ContourSet>& sets) {
  require(!sets.empty(), "invalid_argument", "svg: no contour sets");
  Bounds b = sets.front().bounds;
  for (const auto& s : sets) b = b.united(s.bounds);
  const double size = 800.0, margin = 40.0;
  const double scale = (size - 2 * margin) / std::max(b.xmax - b.xmin, b.ymax - b.ymin);
  auto px = [&](double x) { return margin + (x - b.xmin) * scale; };
  auto py = [&](double y) { return size - margin - (y - b.ymin) * scale; };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size << "\" height=\"" << size
      << "\" viewBox=\"0 0 " << size << ' ' << size << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  char buf[64];
  for (std::size_t c = 0; c < sets.size(); ++c) {
    const double hue = 360.0 * static_cast<double>(c) / static_cast<double>(sets.size());
    svg << "<g id=\"class-" << c << "\"><title>" << names[c] << "</title>\n";
    for (const auto& level : sets[c].levels) {
      const double light = 25.0 + 50.0 * level.rho;
      for (const auto& line : level.polylines) {
        svg << "<polyline fill=\"none\" stroke-width=\"1.5\" stroke=\"hsl(" << hue << ',' << 70 << "%," << light
            << "%)\" points=\"";
        for (const auto& p : line) {
          std::snprintf(buf, sizeof buf, "%.2f,%.2f ", px(p.x), py(p.y));
          svg << buf;
        }
        svg << "\"/>\n";
      }
    }
    svg << "<text x=\"" << margin << "\" y=\"" << 20 + 14 * c << "\" font-size=\"12\" fill=\"hsl(" << hue
        << ",70%,40%)\">" << names[c] << "</text>\n</g>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

bool cmd_fit(const FitCommand& c) {
  c.fit.validate();
  const LabeledDataset data = load_csv(c.input, c.label_column);
  ensure_dir(c.out);
  const auto fits = fit_labeled(data, c.fit);
  json index = json::array();
  json reports = json::array();
  bool all_ok = true;
  for (const auto& f : fits) {
    json entry = {{"class_id", f.class_id}, {"name", f.name}, {"count", f.count}};
    json report = entry;
    if (f.ok()) {
      json model = to_json(*f.model);
      model["seed"] = c.fit.seed;
      model["name"] = f.name;
      write_json_file(c.out / model_file_name(static_cast<std::size_t>(f.class_id)), model);
      entry["model_file"] = model_file_name(static_cast<std::size_t>(f.class_id));
      index.push_back(entry);
      report["report"] = to_json(*f.report);
    } else {
      all_ok = false;
      report["error"] = f.error;
      warn("class '" + f.name + "' failed to fit: " + f.error);
    }
    reports.push_back(report);
  }
  const json cfg = {{"k_min", c.fit.k_min},
                    {"k_max", c.fit.k_max},
                    {"restarts", c.fit.restarts},
                    {"max_iterations", c.fit.max_iterations},
                    {"loglik_tolerance", c.fit.loglik_tolerance},
                    {"reg_epsilon", c.fit.reg_epsilon},
                    {"reduce_dim", c.fit.reduce_dim}};
  write_json_file(c.out / "fit_report.json", {{"seed", c.fit.seed}, {"config", cfg}, {"classes", reports}});
  if (all_ok) write_json_file(c.out / "models.json", {{"seed", c.fit.seed}, {"classes", index}});
  return all_ok;
}

void cmd_project(const ProjectCommand& c) {
  const ModelBundle b = load_bundle(c.models);
  require(c.d >= 1 && c.d <= b.models.front().dim(), "invalid_dimension",
          "--d must lie in [1, " + std::to_string(b.models.front().dim()) + "]");
  ViewConfig vc;
  vc.d = c.d;
  vc.center = c.center;
  vc.rhos.clear();  // contours are a separate command
  const auto tau = resolve_tau(c.tau, b.counts);
  const ProjectedView view = compute_view(aggregate_all(b.models), b.models, tau, vc);
  ensure_dir(c.out);
  json pj = to_json(view.projection);
  pj["tau"] = std::vector<double>(tau.values().data(), tau.values().data() + tau.values().size());
  pj["seed"] = b.seed;
  if (view.center) pj["center"] = std::vector<double>(view.center->data(), view.center->data() + view.center->size());
  write_json_file(c.out / "projection.json", pj);
  ModelBundle projected{b.names, view.projected, b.counts, b.seed};
  json mj = bundle_json(projected);
  mj["centered"] = c.center;
  write_json_file(c.out / "projected_models.json", mj);
}

void cmd_contours(const ContoursCommand& c) {
  require(c.resolution >= 2, "invalid_resolution", "--resolution must be >= 2");
  ModelBundle b = load_bundle(c.models);
  std::vector<ContourSet> sets;
  const Resolution res{c.resolution, c.resolution};
  if (b.models.front().dim() != 2) {
    ViewConfig vc;
    vc.d = 2;
    vc.rhos = c.rhos;
    vc.resolution = res;
    vc.center = c.center;
    ProjectedView view = compute_view(aggregate_all(b.models), b.models, resolve_tau(c.tau, b.counts), vc);
    sets = std::move(view.contours);
  } else {
    for (const auto& m : b.models) sets.push_back(contour_set(m, c.rhos, res));
  }
  ensure_dir(c.out);
  for (std::size_t i = 0; i < sets.size(); ++i) {
    write_json_file(c.out / ("contours_" + std::to_string(i) + ".json"),
                    class_contours_json(static_cast<int>(i), b.names[i], sets[i], b.seed));
  }
  if (c.svg) {
    std::ofstream out(*c.svg);
    if (!out) throw ValidationError("io_error", "cannot write " + c.svg->string());
    out << contours_svg(b.names, sets);
  }
}

std::string cmd_evaluate(const EvaluateCommand& c) {
  const LabeledDataset data = load_csv(c.input, c.label_column);
  const ModelBundle b = load_bundle(c.models);
  // Align bundle classes to dataset classes by name.
  std::vector<MixtureModel> models;
  for (const auto& name : data.label_names()) {
    const auto it = std::find(b.names.begin(), b.names.end(), name);
    require(it != b.names.end(), "missing_model", "no model for dataset class '" + name + "'");
    models.push_back(b.models[static_cast<std::size_t>(it - b.names.begin())]);
  }
  EvaluationConfig cfg;
  cfg.resolution = {c.resolution, c.resolution};
  cfg.seed = c.seed;
  const MetricReport report = evaluate_strategies(data, models, resolve_tau(c.tau, data.class_counts()), cfg);
  ensure_dir(c.out);
  write_json_file(c.out / "metrics.json", to_json(report));
  const std::string table = metric_table(report);
  std::ofstream(c.out / "metrics.txt") << table;
  return table;
}

void cmd_sample(const SampleCommand& c) {
  require(c.spec.has_value() != c.models.has_value(), "invalid_argument",
          "sample: give exactly one of --spec or --models");
  require(c.n >= 1, "invalid_argument", "--n must be >= 1");
  std::optional<LabeledDataset> data;
  json meta = {{"seed", c.seed}, {"n_per_class", c.n}};
  if (c.spec) {
    data = sample_analytic(analytic_spec_from_json(read_json_file(*c.spec)), c.n, c.seed);
    meta["source"] = c.spec->string();
  } else {
    const ModelBundle b = load_bundle(*c.models);
    const Index per = c.n;
    Matrix all(per * static_cast<Index>(b.size()), b.models.front().dim());
    std::vector<int> labels;
    for (std::size_t i = 0; i < b.size(); ++i) {
      all.middleRows(static_cast<Index>(i) * per, per) = sample_mixture(b.models[i], per, derive_stream(c.seed, {i}));
      labels.insert(labels.end(), static_cast<std::size_t>(per), static_cast<int>(i));
    }
    data.emplace(std::move(all), std::move(labels), b.names);
    meta["source"] = c.models->string();
  }
  ensure_dir(c.out);
  write_csv(c.out / "samples.csv", *data, c.label_column);
  write_json_file(c.out / "samples.meta.json", meta);
}

json error_json(const std::string& kind, const std::string& code, const std::string& message) {
  return {{"error", {{"kind", kind}, {"code", code}, {"message", message}}}};
}

}  // namespace gmmproj
