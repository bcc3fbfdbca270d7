// Command-line pipeline: fit, project, contours, evaluate, sample, serve.
#include "gmmproj/diagnostics.hpp"
#include "gmmproj/error.hpp"
#include "gmmproj/linalg.hpp"
#include "gmmproj/pipeline.hpp"
#include "gmmproj/service.hpp"

#include <CLI11.hpp>

#include <csignal>
#include <iostream>
#include <thread>

using namespace gmmproj;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitNumerical = 3;

int fail(const std::string& kind, const std::string& code, const std::string& message) {
  std::cerr << error_json(kind, code, message).dump() << '\n';
  return kind == "numerical" ? kExitNumerical : kExitValidation;
}

int serve(const ServiceConfig& cfg) {
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  WeightService service(cfg);
  const int port = service.bind();
  std::cerr << "listening on " << cfg.bind << ':' << port << '\n';
  std::thread waiter([&] {
    int sig = 0;
    sigwait(&signals, &sig);
    service.stop();
  });
  service.run();
  // run() can also return on its own (socket error); release the waiter.
  pthread_kill(waiter.native_handle(), SIGTERM);
  waiter.join();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  ensure_linalg_backend(argv);
  CLI::App app{"Weighted uncertainty-aware projection of Gaussian-mixture-modeled classes"};
  app.require_subcommand(1);

  std::string input, label_column = "label", models, out = ".", tau = "samples", rhos = "0.25,0.5,0.95";
  std::string svg, spec, bind = "127.0.0.1", snapshot;
  Index d = 2, resolution = 0, n = kDefaultAnalyticSamples;
  int kmin = 1, kmax = 30, restarts = 5, port = 8080, max_iter = 200;
  std::uint64_t seed = 0;
  bool center = false;

  auto add_seed = [&](CLI::App* c) { c->add_option("--seed", seed, "RNG seed (recorded in outputs)"); };
  auto add_out = [&](CLI::App* c) { c->add_option("--out", out, "Output directory")->capture_default_str(); };
  auto add_tau = [&](CLI::App* c) {
    c->add_option("--tau", tau, "Class weights: equal | samples | w1,w2,...")->capture_default_str();
  };

  auto* fit = app.add_subcommand("fit", "Fit a mixture per class with BIC model selection");
  fit->add_option("--input", input, "CSV dataset")->required();
  fit->add_option("--label-column", label_column)->capture_default_str();
  fit->add_option("--kmin", kmin)->capture_default_str();
  fit->add_option("--kmax", kmax)->capture_default_str();
  fit->add_option("--restarts", restarts)->capture_default_str();
  fit->add_option("--max-iterations", max_iter)->capture_default_str();
  add_seed(fit);
  add_out(fit);

  auto* project = app.add_subcommand("project", "Build the weighted projection and project the class models");
  project->add_option("--models", models, "Model bundle (file or fit output directory)")->required();
  project->add_option("--d", d, "Target dimension")->capture_default_str();
  project->add_flag("--center", center, "Center the projected view on the weighted mean");
  add_tau(project);
  add_out(project);

  auto* contours = app.add_subcommand("contours", "Extract highest-density-region contours of 2D models");
  contours->add_option("--models", models, "Projected (or full) model bundle")->required();
  contours->add_option("--rhos", rhos, "Probability levels")->capture_default_str();
  contours->add_option("--resolution", resolution, "Grid cells per axis (default 512)");
  contours->add_option("--svg", svg, "Also write an SVG plot");
  contours->add_flag("--center", center, "Center when projecting full-dimensional models");
  add_tau(contours);
  add_out(contours);

  auto* evaluate = app.add_subcommand("evaluate", "Compare wGMM and UAPCA projections against a KDE reference");
  evaluate->add_option("--input", input, "CSV dataset")->required();
  evaluate->add_option("--label-column", label_column)->capture_default_str();
  evaluate->add_option("--models", models, "Model bundle fitted on the dataset")->required();
  evaluate->add_option("--resolution", resolution, "Grid cells per axis (default 256)");
  add_tau(evaluate);
  add_seed(evaluate);
  add_out(evaluate);

  auto* sample = app.add_subcommand("sample", "Draw samples from analytic laws or fitted models");
  auto* spec_opt = sample->add_option("--spec", spec, "Analytic per-dimension specification (JSON)");
  sample->add_option("--models", models, "Model bundle")->excludes(spec_opt);
  sample->add_option("--n", n, "Samples per class")->capture_default_str();
  sample->add_option("--label-column", label_column)->capture_default_str();
  add_seed(sample);
  add_out(sample);

  auto* serve_cmd = app.add_subcommand("serve", "Run the interactive weight service");
  serve_cmd->add_option("--port", port)->capture_default_str();
  serve_cmd->add_option("--bind", bind)->capture_default_str();
  serve_cmd->add_option("--resolution", resolution, "Contour grid cells per axis (default 256)");
  serve_cmd->add_option("--rhos", rhos)->capture_default_str();
  serve_cmd->add_option("--d", d)->capture_default_str();
  serve_cmd->add_option("--snapshot", snapshot, "Session snapshot file (loaded on start, saved on stop)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("validation", "invalid_arguments", e.what());
  }

  try {
    if (*fit) {
      FitCommand c{input, label_column, {}, out};
      c.fit.k_min = kmin;
      c.fit.k_max = kmax;
      c.fit.restarts = restarts;
      c.fit.max_iterations = max_iter;
      c.fit.seed = seed;
      if (!cmd_fit(c)) return fail("numerical", "fit_failed", "one or more classes failed to fit; see fit_report.json");
    } else if (*project) {
      cmd_project({models, TauSpec::parse(tau), d, center, out});
    } else if (*contours) {
      ContoursCommand c;
      c.models = models;
      c.tau = TauSpec::parse(tau);
      c.center = center;
      c.rhos = parse_rhos(rhos);
      if (resolution > 0) c.resolution = resolution;
      if (!svg.empty()) c.svg = svg;
      c.out = out;
      cmd_contours(c);
    } else if (*evaluate) {
      EvaluateCommand c{input, label_column, models, TauSpec::parse(tau), resolution > 0 ? resolution : 256, seed, out};
      std::cout << cmd_evaluate(c);
    } else if (*sample) {
      SampleCommand c;
      if (!spec.empty()) c.spec = spec;
      if (!models.empty()) c.models = models;
      c.n = n;
      c.label_column = label_column;
      c.seed = seed;
      c.out = out;
      cmd_sample(c);
    } else if (*serve_cmd) {
      ServiceConfig cfg;
      cfg.bind = bind;
      cfg.port = port;
      cfg.view.d = d;
      cfg.view.rhos = parse_rhos(rhos);
      if (resolution > 0) cfg.view.resolution = {resolution, resolution};
      if (!snapshot.empty()) cfg.snapshot = snapshot;
      return serve(cfg);
    }
  } catch (const Error& e) {
    return fail(e.kind() == ErrorKind::validation ? "validation" : "numerical", e.code(), e.what());
  } catch (const std::bad_alloc&) {
    return fail("numerical", "out_of_memory", "allocation failed");
  } catch (const std::exception& e) {
    return fail("validation", "io_error", e.what());
  }
  return 0;
}
