#pragma once

#include "gmmproj/pipeline.hpp"

#include <memory>
#include <optional>
#include <string>

namespace gmmproj {

struct ServiceConfig {
  std::string bind = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  ViewConfig view{2, {std::begin(kDefaultRhos), std::end(kDefaultRhos)}, {256, 256}, false};
  std::optional<fs::path> snapshot;  // loaded on start, written on stop
};

struct Reply {
  int status = 200;
  json body;
};

// In-memory sessions of per-class models with cached aggregated moments.
// Each accepted weight update recomputes projection and contours and
// publishes them as one immutable revision.
//
//   POST /sessions                 {classes:[{name, count?, model}]} or
//                                  {dataset:{path, label_column?}, fit:{...}}
//   GET  /sessions/{id}
//   GET  /sessions/{id}/contours
//   PUT  /sessions/{id}/weights    {tau:[...], base_revision?}
class WeightService {
 public:
  explicit WeightService(ServiceConfig cfg = {});
  ~WeightService();
  WeightService(const WeightService&) = delete;
  WeightService& operator=(const WeightService&) = delete;

  // Handlers, callable without HTTP.
  Reply create_session(const json& body);
  // Same as a POST with inline models; `options` carries d, rhos,
  // resolution, center and tau.
  Reply create_session(ModelBundle bundle, const json& options = json::object());
  Reply get_session(const std::string& id) const;
  Reply get_contours(const std::string& id) const;
  Reply put_weights(const std::string& id, const json& body);

  void save_snapshot(const fs::path& path) const;
  void load_snapshot(const fs::path& path);

  // Binds the listening socket and returns the bound port.
  int bind();
  // Serves until stop(); bind() is called first if needed.
  void run();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace gmmproj
