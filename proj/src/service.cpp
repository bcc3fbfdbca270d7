#include "gmmproj/service.hpp"

#include "gmmproj/diagnostics.hpp"
#include "gmmproj/error.hpp"
#include "gmmproj/io.hpp"

#include <httplib.h>

#include <map>
#include <mutex>
#include <shared_mutex>

namespace gmmproj {

namespace {

json vec_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Reply error_reply(int status, const std::string& kind, const std::string& code, const std::string& message) {
  return {status, error_json(kind, code, message)};
}

Reply from_exception(const Error& e, int numerical_status) {
  const bool validation = e.kind() == ErrorKind::validation;
  return error_reply(validation ? 400 : numerical_status, validation ? "validation" : "numerical", e.code(),
                     e.what());
}

struct Snapshot {
  std::uint64_t revision = 0;
  ProjectedView view;
  json contours;  // classes array, computed once per revision
};

struct Session {
  std::string id;
  ModelBundle bundle;
  std::vector<AggregatedMoments> moments;  // tau-independent, cached at creation
  ViewConfig view;

  std::mutex writer;  // serializes weight updates
  mutable std::mutex publish;
  std::shared_ptr<const Snapshot> current;

  std::shared_ptr<const Snapshot> load() const {
    std::lock_guard lock(publish);
    return current;
  }
  void store(std::shared_ptr<const Snapshot> s) {
    std::lock_guard lock(publish);
    current = std::move(s);
  }

  std::shared_ptr<const Snapshot> build(const ImportanceWeights& tau, std::uint64_t revision) const {
    auto snap = std::make_shared<Snapshot>(Snapshot{revision, compute_view(moments, bundle.models, tau, view), {}});
    snap->contours = json::array();
    for (std::size_t i = 0; i < snap->view.contours.size(); ++i) {
      snap->contours.push_back(
          class_contours_json(static_cast<int>(i), bundle.names[i], snap->view.contours[i], bundle.seed));
    }
    return snap;
  }

  json contours_body(const Snapshot& s) const {
    json body = {{"session", id}, {"revision", s.revision}, {"classes", s.contours}};
    if (!s.view.contours.empty()) {
      Bounds b = s.view.contours.front().bounds;
      for (const auto& c : s.view.contours) b = b.united(c.bounds);
      body["bounds"] = to_json(b);
    }
    return body;
  }

  json projected_json(const Snapshot& s) const {
    return bundle_json(ModelBundle{bundle.names, s.view.projected, bundle.counts, bundle.seed});
  }

  json state_body(const Snapshot& s) const {
    json classes = json::array();
    for (std::size_t i = 0; i < bundle.size(); ++i) {
      classes.push_back({{"class_id", i}, {"name", bundle.names[i]}, {"count", bundle.counts[i]}});
    }
    json body = {{"id", id},
                 {"revision", s.revision},
                 {"classes", classes},
                 {"dim", bundle.models.front().dim()},
                 {"d", view.d},
                 {"rhos", view.rhos},
                 {"resolution", {view.resolution.nx, view.resolution.ny}},
                 {"center", view.center},
                 {"seed", bundle.seed},
                 {"tau", vec_json(s.view.tau.values())},
                 {"projection", to_json(s.view.projection)},
                 {"projected_models", projected_json(s)},
                 {"contours", contours_body(s)}};
    if (s.view.center) body["center_offset"] = vec_json(*s.view.center);
    return body;
  }

  json update_body(const Snapshot& s) const {
    return {{"id", id},
            {"revision", s.revision},
            {"tau", vec_json(s.view.tau.values())},
            {"projection", to_json(s.view.projection)},
            {"contours", contours_body(s)}};
  }
};

ViewConfig view_from_body(const json& body, ViewConfig v) {
  if (body.contains("d")) v.d = body.at("d").get<Index>();
  if (body.contains("rhos")) {
    v.rhos = body.at("rhos").get<std::vector<double>>();
    for (double r : v.rhos) require(r > 0.0 && r <= 1.0, "invalid_rho", "rhos must lie in (0, 1]");
  }
  if (body.contains("resolution")) {
    const Index r = body.at("resolution").get<Index>();
    require(r >= 2, "invalid_resolution", "resolution must be >= 2");
    v.resolution = {r, r};
  }
  if (body.contains("center")) v.center = body.at("center").get<bool>();
  return v;
}

TauSpec tau_from_body(const json& body) {
  if (!body.contains("tau")) return {};
  const auto& t = body.at("tau");
  if (t.is_string()) return TauSpec::parse(t.get<std::string>());
  return {TauSpec::Mode::explicit_list, t.get<std::vector<double>>()};
}

FitConfig fit_from_body(const json& j) {
  FitConfig f;
  if (j.contains("k_min")) f.k_min = j.at("k_min").get<int>();
  if (j.contains("k_max")) f.k_max = j.at("k_max").get<int>();
  if (j.contains("restarts")) f.restarts = j.at("restarts").get<int>();
  if (j.contains("max_iterations")) f.max_iterations = j.at("max_iterations").get<int>();
  if (j.contains("loglik_tolerance")) f.loglik_tolerance = j.at("loglik_tolerance").get<double>();
  if (j.contains("reg_epsilon")) f.reg_epsilon = j.at("reg_epsilon").get<double>();
  if (j.contains("reduce_dim")) f.reduce_dim = j.at("reduce_dim").get<Index>();
  if (j.contains("seed")) f.seed = j.at("seed").get<std::uint64_t>();
  f.validate();
  return f;
}

}  // namespace

struct WeightService::Impl {
  ServiceConfig cfg;
  mutable std::shared_mutex map_mutex;
  std::map<std::string, std::shared_ptr<Session>> sessions;
  std::uint64_t next_id = 1;
  httplib::Server server;
  int bound_port = -1;

  std::shared_ptr<Session> find(const std::string& id) const {
    std::shared_lock lock(map_mutex);
    const auto it = sessions.find(id);
    return it == sessions.end() ? nullptr : it->second;
  }

  std::string insert(std::shared_ptr<Session> s, std::optional<std::string> id = std::nullopt) {
    std::unique_lock lock(map_mutex);
    if (!id) id = "s" + std::to_string(next_id++);
    s->id = *id;
    sessions[*id] = std::move(s);
    return *id;
  }
};

WeightService::WeightService(ServiceConfig cfg) : impl_(std::make_unique<Impl>()) {
  impl_->cfg = std::move(cfg);
  auto& srv = impl_->server;
  srv.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                           {"Access-Control-Allow-Methods", "GET, POST, PUT, OPTIONS"},
                           {"Access-Control-Allow-Headers", "Content-Type"}});

  auto send = [](httplib::Response& res, const Reply& r) {
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
  };
  auto parse = [](const httplib::Request& req) -> std::optional<json> {
    try {
      return json::parse(req.body);
    } catch (const json::exception&) {
      return std::nullopt;
    }
  };
  auto bad_json = error_reply(400, "validation", "invalid_json", "request body is not valid JSON");

  srv.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
  srv.Post("/sessions", [this, send, parse, bad_json](const httplib::Request& req, httplib::Response& res) {
    const auto body = parse(req);
    send(res, body ? create_session(*body) : bad_json);
  });
  srv.Get(R"(/sessions/([^/]+))", [this, send](const httplib::Request& req, httplib::Response& res) {
    send(res, get_session(req.matches[1]));
  });
  srv.Get(R"(/sessions/([^/]+)/contours)", [this, send](const httplib::Request& req, httplib::Response& res) {
    send(res, get_contours(req.matches[1]));
  });
  srv.Put(R"(/sessions/([^/]+)/weights)",
          [this, send, parse, bad_json](const httplib::Request& req, httplib::Response& res) {
            const auto body = parse(req);
            send(res, body ? put_weights(req.matches[1], *body) : bad_json);
          });
  srv.set_exception_handler([send](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    try {
      std::rethrow_exception(ep);
    } catch (const std::exception& e) {
      send(res, error_reply(500, "internal", "internal_error", e.what()));
    }
  });

  if (impl_->cfg.snapshot && fs::exists(*impl_->cfg.snapshot)) load_snapshot(*impl_->cfg.snapshot);
}

WeightService::~WeightService() { stop(); }

Reply WeightService::create_session(const json& body) {
  ModelBundle bundle;
  try {
    require(body.is_object(), "invalid_json", "request body must be an object");
    if (body.contains("classes")) {
      bundle = bundle_from_json(body);
    } else if (body.contains("dataset")) {
      const auto& ds = body.at("dataset");
      require(ds.is_object() && ds.contains("path"), "invalid_json", "dataset reference needs a 'path'");
      const LabeledDataset data =
          load_csv(ds.at("path").get<std::string>(), ds.value("label_column", std::string("label")));
      const FitConfig fit = fit_from_body(body.value("fit", json::object()));
      bundle.seed = fit.seed;
      for (auto& f : fit_labeled(data, fit)) {
        if (!f.ok()) {
          return error_reply(422, "numerical", "fit_failed", "class '" + f.name + "' failed to fit: " + f.error);
        }
        bundle.names.push_back(f.name);
        bundle.counts.push_back(f.count);
        bundle.models.push_back(std::move(*f.model));
      }
    } else {
      throw ValidationError("invalid_json", "body needs 'classes' (models) or 'dataset' (fit inputs)");
    }
  } catch (const Error& e) {
    return from_exception(e, 422);
  } catch (const json::exception& e) {
    return error_reply(400, "validation", "invalid_json", e.what());
  }
  return create_session(std::move(bundle), body);
}

Reply WeightService::create_session(ModelBundle bundle, const json& options) {
  auto session = std::make_shared<Session>();
  try {
    require(options.is_object(), "invalid_json", "session options must be an object");
    require(bundle.size() > 0 && bundle.names.size() == bundle.size() && bundle.counts.size() == bundle.size(),
            "invalid_json", "model bundle needs one name and count per class");
    for (const auto& m : bundle.models) {
      require(m.dim() == bundle.models.front().dim(), "dimension_mismatch", "model bundle: classes differ in dimension");
    }
    session->view = view_from_body(options, impl_->cfg.view);
    const TauSpec tau_spec = tau_from_body(options);
    session->bundle = std::move(bundle);
    require(session->view.d <= session->bundle.models.front().dim(), "invalid_dimension",
            "d exceeds the model dimension");
    session->moments = aggregate_all(session->bundle.models);
    session->store(session->build(resolve_tau(tau_spec, session->bundle.counts), 0));
  } catch (const Error& e) {
    return from_exception(e, 422);
  } catch (const json::exception& e) {
    return error_reply(400, "validation", "invalid_json", e.what());
  }
  impl_->insert(session);
  return {201, session->state_body(*session->load())};
}

Reply WeightService::get_session(const std::string& id) const {
  const auto s = impl_->find(id);
  if (!s) return error_reply(404, "validation", "unknown_session", "no session '" + id + "'");
  return {200, s->state_body(*s->load())};
}

Reply WeightService::get_contours(const std::string& id) const {
  const auto s = impl_->find(id);
  if (!s) return error_reply(404, "validation", "unknown_session", "no session '" + id + "'");
  return {200, s->contours_body(*s->load())};
}

Reply WeightService::put_weights(const std::string& id, const json& body) {
  const auto s = impl_->find(id);
  if (!s) return error_reply(404, "validation", "unknown_session", "no session '" + id + "'");
  try {
    require(body.is_object() && body.contains("tau") && body.at("tau").is_array(), "invalid_json",
            "body needs a 'tau' array");
    const auto raw = body.at("tau").get<std::vector<double>>();
    require(raw.size() == s->bundle.size(), "length_mismatch",
            "tau has " + std::to_string(raw.size()) + " entries for " + std::to_string(s->bundle.size()) +
                " classes");
    Vector v(static_cast<Index>(raw.size()));
    for (std::size_t i = 0; i < raw.size(); ++i) {
      require(std::isfinite(raw[i]) && raw[i] >= 0.0, "invalid_tau", "tau entries must be finite and >= 0");
      v(static_cast<Index>(i)) = raw[i];
    }
    const ImportanceWeights tau = ImportanceWeights::normalized(v);

    std::lock_guard lock(s->writer);
    const auto prev = s->load();
    if (body.contains("base_revision") && !body.at("base_revision").is_null()) {
      const auto base = body.at("base_revision").get<std::uint64_t>();
      if (base != prev->revision) {
        Reply r = error_reply(409, "validation", "stale_revision",
                              "base revision " + std::to_string(base) + " is behind current revision " +
                                  std::to_string(prev->revision));
        r.body["revision"] = prev->revision;
        return r;
      }
    }
    auto next = s->build(tau, prev->revision + 1);
    s->store(next);
    return {200, s->update_body(*next)};
  } catch (const Error& e) {
    return from_exception(e, 422);
  } catch (const json::exception& e) {
    return error_reply(400, "validation", "invalid_json", e.what());
  }
}

void WeightService::save_snapshot(const fs::path& path) const {
  json all = json::array();
  {
    std::shared_lock lock(impl_->map_mutex);
    for (const auto& [id, s] : impl_->sessions) {
      const auto snap = s->load();
      all.push_back({{"id", id},
                     {"revision", snap->revision},
                     {"tau", vec_json(snap->view.tau.values())},
                     {"d", s->view.d},
                     {"rhos", s->view.rhos},
                     {"resolution", s->view.resolution.nx},
                     {"center", s->view.center},
                     {"bundle", bundle_json(s->bundle)}});
    }
  }
  write_json_file(path, {{"sessions", all}});
}

void WeightService::load_snapshot(const fs::path& path) {
  const json j = read_json_file(path);
  try {
    for (const auto& e : j.at("sessions")) {
      auto s = std::make_shared<Session>();
      s->bundle = bundle_from_json(e.at("bundle"));
      s->view = view_from_body(e, impl_->cfg.view);
      s->moments = aggregate_all(s->bundle.models);
      const auto tau = e.at("tau").get<std::vector<double>>();
      s->store(s->build(ImportanceWeights(Eigen::Map<const Vector>(tau.data(), static_cast<Index>(tau.size()))),
                        e.at("revision").get<std::uint64_t>()));
      const auto id = e.at("id").get<std::string>();
      impl_->insert(s, id);
      if (id.size() > 1 && id[0] == 's') {
        impl_->next_id = std::max<std::uint64_t>(impl_->next_id, std::stoull(id.substr(1)) + 1);
      }
    }
  } catch (const json::exception& e) {
    throw ValidationError("invalid_json", "snapshot " + path.string() + ": " + e.what());
  }
}

int WeightService::bind() {
  if (impl_->bound_port >= 0) return impl_->bound_port;
  const auto& c = impl_->cfg;
  if (c.port == 0) {
    impl_->bound_port = impl_->server.bind_to_any_port(c.bind);
  } else if (impl_->server.bind_to_port(c.bind, c.port)) {
    impl_->bound_port = c.port;
  }
  if (impl_->bound_port < 0) {
    throw ValidationError("bind_failed", "cannot bind " + c.bind + ":" + std::to_string(c.port));
  }
  return impl_->bound_port;
}

void WeightService::run() {
  bind();
  impl_->server.listen_after_bind();
  if (impl_->cfg.snapshot) save_snapshot(*impl_->cfg.snapshot);
}

void WeightService::stop() {
  if (impl_->server.is_running()) impl_->server.stop();
}

}  // namespace gmmproj
