#include "gmmproj/serialize.hpp"

#include "gmmproj/error.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace gmmproj {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

json vector_json(const Vector& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

Vector vector_from(const json& j, const char* what) {
  require(j.is_array(), "invalid_json", std::string(what) + " must be an array");
  Vector v(static_cast<Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    require(j[i].is_number(), "invalid_json", std::string(what) + " entries must be numbers");
    v(static_cast<Index>(i)) = j[i].get<double>();
  }
  return v;
}

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

// Wraps nlohmann parse/type errors into ValidationError.
template <class F>
auto guarded(const char* what, F&& f) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw ValidationError("invalid_json", std::string(what) + ": " + e.what());
  }
}

}  // namespace

json to_json(const MixtureModel& m) {
  json comps = json::array();
  for (const auto& c : m.components()) {
    json cov = json::array();
    for (Index r = 0; r < c.gaussian.dim(); ++r) cov.push_back(vector_json(c.gaussian.cov().row(r).transpose()));
    comps.push_back({{"weight", c.weight}, {"mean", vector_json(c.gaussian.mean())}, {"cov", cov}});
  }
  return {{"dim", m.dim()}, {"components", comps}};
}

MixtureModel mixture_from_json(const json& j) {
  return guarded("mixture model", [&] {
    require(j.is_object() && j.contains("components"), "invalid_json", "mixture model: missing 'components'");
    const auto& comps = j.at("components");
    require(comps.is_array() && !comps.empty(), "invalid_json", "mixture model: 'components' must be a non-empty array");
    std::vector<Component> out;
    for (const auto& c : comps) {
      Vector mean = vector_from(c.at("mean"), "mean");
      const auto& rows = c.at("cov");
      require(rows.is_array() && rows.size() == static_cast<std::size_t>(mean.size()), "dimension_mismatch",
              "mixture model: covariance row count differs from mean length");
      Matrix cov(mean.size(), mean.size());
      for (std::size_t r = 0; r < rows.size(); ++r) {
        const Vector row = vector_from(rows[r], "cov row");
        require(row.size() == mean.size(), "dimension_mismatch", "mixture model: covariance is not square");
        cov.row(static_cast<Index>(r)) = row.transpose();
      }
      out.push_back({c.at("weight").get<double>(), Gaussian(std::move(mean), std::move(cov))});
    }
    MixtureModel m(std::move(out));
    if (j.contains("dim")) {
      require(j.at("dim").get<Index>() == m.dim(), "dimension_mismatch", "mixture model: 'dim' disagrees with components");
    }
    return m;
  });
}

json to_json(const ProjectionMatrix& p) {
  json basis = json::array();
  for (Index c = 0; c < p.output_dim(); ++c) basis.push_back(vector_json(p.basis().col(c)));
  return {{"dim", p.input_dim()}, {"d", p.output_dim()}, {"eigenvalues", vector_json(p.eigenvalues())},
          {"basis", basis}};
}

ProjectionMatrix projection_from_json(const json& j) {
  return guarded("projection", [&] {
    const auto dim = j.at("dim").get<Index>();
    const auto d = j.at("d").get<Index>();
    const auto& cols = j.at("basis");
    require(cols.is_array() && cols.size() == static_cast<std::size_t>(d), "invalid_json",
            "projection: basis must hold d columns");
    Matrix basis(dim, d);
    for (Index c = 0; c < d; ++c) {
      const Vector col = vector_from(cols[static_cast<std::size_t>(c)], "basis column");
      require(col.size() == dim, "dimension_mismatch", "projection: basis column has wrong length");
      basis.col(c) = col;
    }
    return ProjectionMatrix(std::move(basis), vector_from(j.at("eigenvalues"), "eigenvalues"));
  });
}

json to_json(const FitReport& r) {
  json curve = json::array();
  for (const auto& [k, bic] : r.bic_curve) curve.push_back({{"k", k}, {"bic", finite_or_null(bic)}});
  return {{"chosen_k", r.chosen_k},
          {"bic_curve", curve},
          {"final_loglik", finite_or_null(r.final_loglik)},
          {"iterations_used", r.iterations_used},
          {"converged", r.converged},
          {"stop_reason", to_string(r.stop)},
          {"input_dim", r.input_dim},
          {"sweep_dim", r.sweep_dim},
          {"reduced", r.sweep_dim < r.input_dim},
          {"n_samples", r.n_samples},
          {"seed", r.seed}};
}

json to_json(const Bounds& b) {
  return {{"xmin", b.xmin}, {"xmax", b.xmax}, {"ymin", b.ymin}, {"ymax", b.ymax}};
}

Bounds bounds_from_json(const json& j) {
  return guarded("bounds", [&] {
    return Bounds{j.at("xmin").get<double>(), j.at("xmax").get<double>(), j.at("ymin").get<double>(),
                  j.at("ymax").get<double>()};
  });
}

json contour_json(int class_id, const ContourSet& set) {
  json levels = json::array();
  for (const auto& level : set.levels) {
    json lines = json::array();
    for (const auto& line : level.polylines) {
      json pts = json::array();
      for (const auto& p : line) pts.push_back({p.x, p.y});
      lines.push_back(std::move(pts));
    }
    levels.push_back({{"rho", level.rho}, {"threshold", level.threshold}, {"polylines", std::move(lines)}});
  }
  return {{"class_id", class_id},
          {"bounds", to_json(set.bounds)},
          {"resolution", {set.resolution.nx, set.resolution.ny}},
          {"levels", std::move(levels)}};
}

json to_json(const MetricReport& r) {
  json rows = json::array();
  for (const auto& c : r.per_class) {
    rows.push_back({{"class_id", c.class_id},
                    {"name", c.name},
                    {"kl_wgmm", c.kl_wgmm},
                    {"kl_uapca", c.kl_uapca},
                    {"sw2_wgmm", c.sw2_wgmm},
                    {"sw2_uapca", c.sw2_uapca}});
  }
  json cfg = {{"resolution", {r.config.resolution.nx, r.config.resolution.ny}},
              {"sample_count", r.config.sample_budget},
              {"projection_count", r.config.n_projections},
              {"bandwidth_rule", r.bandwidth_rule},
              {"kl_floor_relative", r.kl_floor},
              {"reg_epsilon", r.config.reg_epsilon},
              {"seed", r.config.seed}};
  if (r.config.bandwidth) cfg["bandwidth"] = {r.config.bandwidth->hx, r.config.bandwidth->hy};
  return {{"per_class", rows},
          {"weighted",
           {{"kl_wgmm", r.kl_wgmm}, {"kl_uapca", r.kl_uapca}, {"sw2_wgmm", r.sw2_wgmm}, {"sw2_uapca", r.sw2_uapca}}},
          {"tau", vector_json(r.tau)},
          {"config", cfg}};
}

std::string metric_table(const MetricReport& r) {
  std::ostringstream out;
  char line[256];
  std::snprintf(line, sizeof line, "%-20s %8s %14s %14s %14s %14s\n", "class", "tau", "KL(wGMM)", "KL(UAPCA)",
                "SW2(wGMM)", "SW2(UAPCA)");
  out << line;
  for (std::size_t i = 0; i < r.per_class.size(); ++i) {
    const auto& c = r.per_class[i];
    std::snprintf(line, sizeof line, "%-20s %8.4f %14.4e %14.4e %14.4e %14.4e\n", c.name.substr(0, 20).c_str(),
                  r.tau(static_cast<Index>(i)), c.kl_wgmm, c.kl_uapca, c.sw2_wgmm, c.sw2_uapca);
    out << line;
  }
  std::snprintf(line, sizeof line, "%-20s %8s %14.4e %14.4e %14.4e %14.4e\n", "weighted", "", r.kl_wgmm,
                r.kl_uapca, r.sw2_wgmm, r.sw2_uapca);
  out << line;
  return out.str();
}

AnalyticSpec analytic_spec_from_json(const json& j) {
  return guarded("analytic spec", [&] {
    AnalyticSpec spec;
    for (const auto& c : j.at("classes")) {
      AnalyticClass cls;
      cls.name = c.at("name").get<std::string>();
      for (const auto& d : c.at("dims")) {
        const auto kind = d.at("kind").get<std::string>();
        const auto params = d.at("params").get<std::vector<double>>();
        auto need = [&](std::size_t n) {
          require(params.size() == n, "invalid_spec",
                  "analytic spec: '" + kind + "' takes " + std::to_string(n) + " parameters");
        };
        if (kind == "normal") {
          need(2);
          cls.dims.emplace_back(dist::Normal{params[0], params[1]});
        } else if (kind == "uniform") {
          need(2);
          cls.dims.emplace_back(dist::Uniform{params[0], params[1]});
        } else if (kind == "trapezoid") {
          need(4);
          cls.dims.emplace_back(dist::Trapezoid{params[0], params[1], params[2], params[3]});
        } else if (kind == "constant") {
          need(1);
          cls.dims.emplace_back(dist::Constant{params[0]});
        } else {
          throw ValidationError("invalid_spec", "analytic spec: unknown distribution kind '" + kind + "'");
        }
      }
      spec.classes.push_back(std::move(cls));
    }
    spec.validate();
    return spec;
  });
}

json to_json(const AnalyticSpec& spec) {
  json classes = json::array();
  for (const auto& c : spec.classes) {
    json dims = json::array();
    for (const auto& m : c.dims) {
      dims.push_back(std::visit(
          overloaded{
              [](const dist::Normal& p) { return json{{"kind", "normal"}, {"params", {p.mean, p.stddev}}}; },
              [](const dist::Uniform& p) { return json{{"kind", "uniform"}, {"params", {p.lo, p.hi}}}; },
              [](const dist::Trapezoid& p) {
                return json{{"kind", "trapezoid"}, {"params", {p.a, p.b, p.c, p.d}}};
              },
              [](const dist::Constant& p) { return json{{"kind", "constant"}, {"params", {p.value}}}; },
          },
          m));
    }
    classes.push_back({{"name", c.name}, {"dims", dims}});
  }
  return {{"classes", classes}};
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("missing_file", "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ValidationError("invalid_json", path.string() + ": " + e.what());
  }
}

void write_json_file(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw ValidationError("io_error", "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

}  // namespace gmmproj
