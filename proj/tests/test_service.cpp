#include "gmmproj/io.hpp"
#include "gmmproj/projection.hpp"
#include "gmmproj/sampling.hpp"
#include "gmmproj/service.hpp"
#include "test_support.hpp"

#include <doctest.h>
#include <httplib.h>

#include <atomic>
#include <chrono>
#include <fstream>
#include <thread>

using namespace gmmproj;
using namespace gmmproj::testing;

namespace {

ModelBundle three_classes(std::uint64_t seed, Index dim = 6) {
  Rng rng(seed);
  ModelBundle b;
  b.names = {"red", "green", "blue"};
  b.counts = {500, 300, 200};
  b.seed = seed;
  for (int k : {2, 3, 1}) b.models.push_back(random_mixture(dim, k, rng));
  return b;
}

// Runs a service on a free port for the lifetime of the object.
class LiveService {
 public:
  explicit LiveService(ServiceConfig cfg = {}) : svc_([&] {
    cfg.port = 0;
    return cfg;
  }()) {
    port_ = svc_.bind();
    thread_ = std::thread([this] { svc_.run(); });
  }
  ~LiveService() {
    svc_.stop();
    thread_.join();
  }
  httplib::Client client() const {
    httplib::Client c("127.0.0.1", port_);
    c.set_read_timeout(60, 0);
    return c;
  }
  WeightService& service() { return svc_; }

 private:
  WeightService svc_;
  int port_ = 0;
  std::thread thread_;
};

json body_of(const httplib::Result& r) {
  REQUIRE(r);
  return json::parse(r->body);
}

httplib::Result put_tau(httplib::Client& c, const std::string& id, const json& body) {
  return c.Put("/sessions/" + id + "/weights", body.dump(), "application/json");
}

// Enclosed area of the closed polylines of one level (shoelace).
double level_area(const json& level) {
  double area = 0.0;
  for (const auto& line : level.at("polylines")) {
    double a = 0.0;
    for (std::size_t i = 0; i + 1 < line.size(); ++i) {
      a += line[i][0].get<double>() * line[i + 1][1].get<double>() - line[i + 1][0].get<double>() * line[i][1].get<double>();
    }
    area += std::abs(0.5 * a);
  }
  return area;
}

std::vector<double> vec_to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

Matrix basis_of(const json& projection) { return projection_from_json(projection).basis(); }

}  // namespace

TEST_CASE("session lifecycle over HTTP") {
  LiveService live;
  auto c = live.client();
  const ModelBundle bundle = three_classes(3);

  const auto created = c.Post("/sessions", bundle_json(bundle).dump(), "application/json");
  REQUIRE(created);
  CHECK(created->status == 201);
  const json s = json::parse(created->body);
  const std::string id = s.at("id");
  CHECK(s.at("classes").size() == 3);
  CHECK(s.at("classes")[2].at("name") == "blue");
  CHECK(s.at("revision") == 0);
  const auto tau0 = s.at("tau").get<std::vector<double>>();
  CHECK(tau0[0] == doctest::Approx(0.5));
  CHECK(tau0[2] == doctest::Approx(0.2));
  CHECK(s.at("contours").at("classes").size() == 3);
  CHECK(s.at("contours").contains("bounds"));

  SUBCASE("identical uploads give identical contours") {
    const json again = body_of(c.Post("/sessions", bundle_json(bundle).dump(), "application/json"));
    CHECK(again.at("id") != id);
    CHECK(again.at("contours").at("classes") == s.at("contours").at("classes"));
  }

  SUBCASE("same tau keeps the projection and bumps the revision") {
    const auto r = put_tau(c, id, {{"tau", tau0}});
    REQUIRE(r);
    CHECK(r->status == 200);
    const json u = json::parse(r->body);
    CHECK(u.at("revision") == 1);
    CHECK(basis_of(u.at("projection")) == basis_of(s.at("projection")));
    CHECK(body_of(c.Get("/sessions/" + id)).at("revision") == 1);
    CHECK(body_of(c.Get("/sessions/" + id + "/contours")).at("revision") == 1);
  }

  SUBCASE("emphasizing one class at 0.95") {
    const json equal = body_of(put_tau(c, id, {{"tau", {1, 1, 1}}}));
    const json focus = body_of(put_tau(c, id, {{"tau", {0.025, 0.95, 0.025}}}));
    CHECK(focus.at("revision") == 2);
    const Matrix pe = basis_of(equal.at("projection"));
    const Matrix pf = basis_of(focus.at("projection"));
    CHECK((pe - pf).cwiseAbs().maxCoeff() > 1e-3);
    const json& le = equal.at("contours").at("classes")[1].at("levels");
    const json& lf = focus.at("contours").at("classes")[1].at("levels");
    const double ae = level_area(le.back()), af = level_area(lf.back());
    CHECK(ae > 0.0);
    CHECK(std::abs(af - ae) / ae > 1e-3);
  }

  SUBCASE("focus class at 0.8 is echoed normalized") {
    const json u = body_of(put_tau(c, id, {{"tau", {0.1, 0.1, 0.8}}}));
    const auto echo = u.at("tau").get<std::vector<double>>();
    CHECK(echo[0] + echo[1] + echo[2] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(echo[2] == doctest::Approx(0.8));
    const json scaled = body_of(put_tau(c, id, {{"tau", {1, 1, 8}}}));
    CHECK(scaled.at("tau").get<std::vector<double>>()[2] == doctest::Approx(0.8).epsilon(1e-15));
  }

  SUBCASE("request errors") {
    auto r = put_tau(c, "nope", {{"tau", {1, 1, 1}}});
    CHECK(r->status == 404);
    CHECK(c.Get("/sessions/nope")->status == 404);
    CHECK(c.Get("/sessions/nope/contours")->status == 404);
    r = put_tau(c, id, {{"tau", {1, -1, 1}}});
    CHECK(r->status == 400);
    CHECK(json::parse(r->body).at("error").at("code") == "invalid_tau");
    CHECK(put_tau(c, id, {{"tau", {1, 1}}})->status == 400);
    CHECK(put_tau(c, id, {{"tau", {0, 0, 0}}})->status == 400);
    CHECK(c.Put("/sessions/" + id + "/weights", "{not json", "application/json")->status == 400);

    CHECK(put_tau(c, id, {{"tau", {1, 2, 3}}, {"base_revision", 0}})->status == 200);
    r = put_tau(c, id, {{"tau", {3, 2, 1}}, {"base_revision", 0}});
    CHECK(r->status == 409);
    CHECK(json::parse(r->body).at("error").at("code") == "stale_revision");
    CHECK(body_of(c.Get("/sessions/" + id)).at("revision") == 1);
  }

  SUBCASE("CORS preflight") {
    const auto r = c.Options("/sessions");
    REQUIRE(r);
    CHECK(r->status == 204);
    CHECK(r->get_header_value("Access-Control-Allow-Origin") == "*");
  }
}

TEST_CASE("session creation errors") {
  LiveService live;
  auto c = live.client();
  auto r = c.Post("/sessions", R"({"dataset": {"label_column": "label"}})", "application/json");
  CHECK(r->status == 400);
  CHECK(json::parse(r->body).at("error").at("kind") == "validation");
  r = c.Post("/sessions", R"({"dataset": {"path": "/nonexistent/data.csv"}})", "application/json");
  CHECK(r->status == 400);
  r = c.Post("/sessions", R"({"classes": [{"name": "a", "model": {"components": []}}]})", "application/json");
  CHECK(r->status == 400);
  CHECK(c.Post("/sessions", "[]", "application/json")->status == 400);

  TempDir dir("service_fit");
  std::ofstream(dir / "tiny.csv") << "x,y,label\n0,0,a\n1,1,a\n2,0,a\n0,2,a\n5,5,b\n" << std::flush;
  r = c.Post("/sessions", json{{"dataset", {{"path", (dir / "tiny.csv").string()}}}, {"fit", {{"k_max", 2}}}}.dump(),
             "application/json");
  CHECK(r->status == 422);
  CHECK(json::parse(r->body).at("error").at("kind") == "numerical");
}

TEST_CASE("session from a dataset reference") {
  TempDir dir("service_dataset");
  Vector e = Vector::Zero(4);
  e(0) = 4.0;
  const Matrix id = Matrix::Identity(4, 4);
  write_csv(dir / "data.csv",
            make_synthetic_multimodal({{"a", {-e, e}, {id, id}, {0.5, 0.5}}, {"b", {Vector::Constant(4, 3.0)}, {id}, {1.0}}},
                                      {400, 200}, 2)
                .data,
            "species");
  WeightService svc;
  const Reply r = svc.create_session(
      {{"dataset", {{"path", (dir / "data.csv").string()}, {"label_column", "species"}}}, {"fit", {{"k_max", 3}, {"seed", 4}}}});
  REQUIRE(r.status == 201);
  CHECK(r.body.at("seed") == 4);
  CHECK(r.body.at("tau").get<std::vector<double>>()[0] == doctest::Approx(2.0 / 3.0));
  CHECK(r.body.at("projected_models").at("classes")[0].at("model").at("components").size() == 2);
}

TEST_CASE("served state equals a from-scratch computation") {
  WeightService svc;
  const ModelBundle bundle = three_classes(8, 12);
  const json s = svc.create_session(bundle_json(bundle)).body;
  const std::string id = s.at("id");
  Rng rng(1);
  for (int step = 0; step < 5; ++step) {
    Vector raw(3);
    for (Index i = 0; i < 3; ++i) raw(i) = 0.05 + rng.uniform();
    const json u = svc.put_weights(id, {{"tau", vec_to_std(raw)}}).body;
    const ImportanceWeights tau = ImportanceWeights::normalized(raw);
    const ProjectionMatrix fresh =
        projection_from_ua(build_weighted_moments(aggregate_all(bundle.models), tau), 2);
    CHECK((basis_of(u.at("projection")) - fresh.basis()).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("contours endpoint matches the contours command") {
  TempDir dir("service_cli");
  const ModelBundle bundle = three_classes(5);
  write_json_file(dir / "models.json", bundle_json(bundle));
  ContoursCommand cmd;
  cmd.models = dir / "models.json";
  cmd.resolution = 128;
  cmd.out = dir.path();
  cmd_contours(cmd);

  ServiceConfig cfg;
  cfg.view.resolution = {128, 128};
  WeightService svc(cfg);
  const std::string id = svc.create_session(bundle_json(bundle)).body.at("id");
  const json served = svc.get_contours(id).body;
  for (std::size_t i = 0; i < bundle.size(); ++i) {
    CAPTURE(i);
    CHECK(served.at("classes")[i] == read_json_file(dir / ("contours_" + std::to_string(i) + ".json")));
  }
}

TEST_CASE("concurrent readers see whole revisions") {
  LiveService live;
  auto writer = live.client();
  const std::string id = body_of(writer.Post("/sessions", bundle_json(three_classes(9)).dump(), "application/json")).at("id");

  std::atomic<bool> done{false};
  std::atomic<int> torn{0}, reads{0};
  auto reader = [&] {
    auto c = live.client();
    while (!done) {
      const json st = body_of(c.Get("/sessions/" + id));
      // The nested contour document carries its own revision stamp.
      if (st.at("revision") != st.at("contours").at("revision")) ++torn;
      const auto tau = st.at("tau").get<std::vector<double>>();
      // Every PUT below sets tau[0] = revision / (revision + 2).
      const double r = st.at("revision").get<double>();
      if (r > 0 && std::abs(tau[0] - r / (r + 2.0)) > 1e-12) ++torn;
      ++reads;
    }
  };
  std::thread a(reader), b(reader);
  for (int rev = 1; rev <= 8; ++rev) {
    const double w = static_cast<double>(rev);
    CHECK(put_tau(writer, id, {{"tau", {w, 1.0, 1.0}}})->status == 200);
  }
  done = true;
  a.join();
  b.join();
  CHECK(torn == 0);
  CHECK(reads > 0);
  CHECK(body_of(writer.Get("/sessions/" + id)).at("revision") == 8);
}

TEST_CASE("weight update latency") {
  Rng rng(12);
  ModelBundle b;
  for (int c = 0; c < 10; ++c) {
    b.names.push_back("c" + std::to_string(c));
    b.counts.push_back(100);
    b.models.push_back(random_mixture(300, 3, rng));
  }
  WeightService svc;
  const std::string id = svc.create_session(bundle_json(b)).body.at("id");
  std::vector<double> tau(10, 1.0);
  tau[3] = 9.0;
  const auto t0 = std::chrono::steady_clock::now();
  const Reply r = svc.put_weights(id, {{"tau", tau}});
  const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  CHECK(r.status == 200);
  MESSAGE("PUT took " << ms << " ms");
  CHECK(ms < 500.0);
}

TEST_CASE("snapshot persistence") {
  TempDir dir("snapshot");
  const ModelBundle bundle = three_classes(6);
  std::string id;
  json before;
  {
    WeightService svc;
    id = svc.create_session(bundle_json(bundle)).body.at("id");
    svc.put_weights(id, {{"tau", {1, 2, 3}}});
    before = svc.get_session(id).body;
    svc.save_snapshot(dir / "snap.json");
  }
  ServiceConfig cfg;
  cfg.snapshot = dir / "snap.json";
  WeightService restored(cfg);
  const json after = restored.get_session(id).body;
  CHECK(after.at("revision") == before.at("revision"));
  CHECK(after.at("tau") == before.at("tau"));
  CHECK(after.at("contours").at("classes") == before.at("contours").at("classes"));
  const std::string next = restored.create_session(bundle_json(bundle)).body.at("id");
  CHECK(next != id);
}
