// splatstream command line: serve, run, evaluate, and fixture/scene helpers.

#include <splatstream/conformance.hpp>
#include <splatstream/splatstream.hpp>

#include <CLI11.hpp>

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

namespace fs = std::filesystem;
using namespace splatstream;

namespace {

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop = true; }

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
  out << text;
}

RenderOptions render_options(int sh_degree) {
  RenderOptions o;
  o.sh_degree = sh_degree;
  return o;
}

int cmd_serve(const ServerConfig& config) {
  StreamingServer server(config);
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  const int port = server.start();
  const bool tls = !config.cert_path.empty();
  std::cout << "serving " << server.registry().records().size() << " model(s) from " << config.model_root.string()
            << " on " << (tls ? "https" : "http") << "://" << config.host << ":" << port << std::endl;
  while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
  std::cout << "draining" << std::endl;
  server.stop();
  return 0;
}

struct RunArgs {
  std::string endpoint = "http://127.0.0.1:8443";
  std::string model;
  fs::path trace, bandwidth, ladder, out = "session";
  int sample_stride = 10;
  bool virtual_time = false;
  double rtt_ms = 2.0;
  int width = 1280, height = 720;
  double hfov_deg = 60.0;
};

int cmd_run(const RunArgs& a) {
  SessionConfig cfg;
  cfg.model_id = a.model;
  cfg.base = Intrinsics::from_hfov(a.width, a.height, deg_to_rad(a.hfov_deg));
  if (!a.ladder.empty()) cfg.ladder = BitrateLadder::load(a.ladder);
  cfg.virtual_time = a.virtual_time;
  cfg.virtual_rtt_s = a.rtt_ms / 1000.0;
  cfg.sample_stride = a.sample_stride;
  cfg.out_dir = a.out;
  const auto movement = load_movement_trace(a.trace);
  std::optional<BandwidthTrace> bw;
  if (!a.bandwidth.empty()) bw = load_bandwidth_trace(a.bandwidth);

  const SessionLog log = run_session(a.endpoint, movement, bw, cfg);
  const SessionSummary s = export_session_report(log, a.out);
  std::cout << s.to_json().dump(2) << std::endl;
  if (log.aborted) {
    std::cerr << "session aborted: " << log.abort_reason << std::endl;
    return 2;
  }
  return 0;
}

int cmd_evaluate(const fs::path& models_root, const std::string& model, const fs::path& session, const fs::path& out,
                 int sh_degree) {
  const auto records = scan_model_directory(models_root);
  const ModelRecord* rec = nullptr;
  for (const auto& r : records) {
    if (r.id == model) rec = &r;
  }
  if (!rec) throw Error(ErrorKind::UnknownModel, "no model '" + model + "' under " + models_root.string());
  const ActivatedPrimitives prims = activate(load_ply(rec->ply_path));
  const auto triplets = evaluate_session(prims, session, render_options(sh_degree));
  const QualityReport report = aggregate_session(triplets);

  auto j = report.to_json();
  j["model_id"] = model;
  j["session"] = session.string();
  auto frames = nlohmann::json::array();
  for (const auto& t : triplets) {
    frames.push_back({{"frame_id", t.frame_id}, {"level", t.level}, {"psnr", t.psnr}, {"ssim", t.ssim}});
  }
  j["frames"] = frames;
  write_text(out, j.dump(2) + "\n");
  std::cout << report.to_json().dump(2) << std::endl;
  return 0;
}

int cmd_make_scene(const fs::path& out, const SyntheticSceneParams& params) {
  const auto set = make_synthetic_scene(params);
  write_text(out, write_ply(set));
  std::cout << "wrote " << set.count << " gaussians to " << out.string() << std::endl;
  return 0;
}

// Orbit-and-pan movement trace with a fixed frame interval.
int cmd_make_trace(const fs::path& out, int frames, double interval_ms, double deg_per_frame) {
  MovementTrace t;
  t.name = out.filename().string();
  for (int i = 0; i < frames; ++i) {
    MovementEntry e;
    e.t_ms = i * interval_ms;
    e.azimuth_deg = std::fmod(i * deg_per_frame + 180.0, 360.0) - 180.0;
    e.elevation_deg = 10.0 * std::sin(i * 0.05);
    t.entries.push_back(e);
  }
  write_text(out, format_movement_trace(t));
  return 0;
}

int cmd_abr_fixture(const fs::path& out) {
  auto traces = nlohmann::json::array();
  for (const auto& t : standard_decision_traces()) traces.push_back(to_json(t));
  write_text(out, traces.dump(2) + "\n");
  std::cout << "wrote " << traces.size() << " decision traces to " << out.string() << std::endl;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Remote-rendering adaptive streaming for Gaussian splat scenes"};
  app.require_subcommand(1);
  app.set_config("--config", "", "TOML/INI file with option values");

  ServerConfig server;
  double eviction_timeout = server.eviction_timeout_s, eviction_period = server.eviction_period_s;
  std::string model_root = server.model_root.string(), web_root = server.web_root.string();
  std::string cert, key;
  auto* serve = app.add_subcommand("serve", "Run the render server");
  serve->add_option("--models", model_root, "Model root directory")->capture_default_str();
  serve->add_option("--web", web_root, "Client asset directory (index.html, static/)")->capture_default_str();
  serve->add_option("--host", server.host, "Bind address")->capture_default_str();
  serve->add_option("--port", server.port, "Port (0 picks a free one)")->capture_default_str();
  serve->add_option("--cert", cert, "TLS certificate (PEM)");
  serve->add_option("--key", key, "TLS private key (PEM)");
  serve->add_option("--eviction-timeout", eviction_timeout, "Seconds idle before a model is unloaded")
      ->capture_default_str();
  serve->add_option("--eviction-period", eviction_period, "Seconds between eviction sweeps")->capture_default_str();
  serve->add_option("--inflight-cap", server.inflight_cap, "Concurrent renders (0 = 4 x cores)")
      ->capture_default_str();
  serve->add_flag("--h1-fallback,!--no-h1-fallback", server.h1_fallback, "Serve HTTP/1.1 (the only listener built)")
      ->capture_default_str();
  serve->add_option("--sh-degree", server.render.sh_degree, "Spherical-harmonic degree used for color (0-3)")
      ->check(CLI::Range(0, 3))
      ->capture_default_str();

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "Replay a movement trace against a server");
  run_cmd->add_option("--endpoint", run.endpoint, "Server base URL")->capture_default_str();
  run_cmd->add_option("--model", run.model, "Model id")->required();
  run_cmd->add_option("--trace", run.trace, "Movement trace CSV")->required()->check(CLI::ExistingFile);
  run_cmd->add_option("--bandwidth", run.bandwidth, "Bandwidth trace CSV")->check(CLI::ExistingFile);
  run_cmd->add_option("--ladder", run.ladder, "Bitrate ladder JSON")->check(CLI::ExistingFile);
  run_cmd->add_option("--out", run.out, "Session output directory")->capture_default_str();
  run_cmd->add_option("--sample-stride", run.sample_stride, "Save every N-th frame (0 = none)")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  run_cmd->add_flag("--virtual-time", run.virtual_time, "Use trace time and shaped transfer time");
  run_cmd->add_option("--rtt-ms", run.rtt_ms, "Per-request overhead in virtual time")->capture_default_str();
  run_cmd->add_option("--width", run.width, "Base render width")->capture_default_str();
  run_cmd->add_option("--height", run.height, "Base render height")->capture_default_str();
  run_cmd->add_option("--hfov", run.hfov_deg, "Horizontal field of view in degrees")->capture_default_str();

  std::string eval_model, eval_models_root = "models";
  fs::path eval_session, eval_out = "report.json";
  int eval_sh = 0;
  auto* eval = app.add_subcommand("evaluate", "Score a saved session against ground truth");
  eval->add_option("--model", eval_model, "Model id")->required();
  eval->add_option("--session", eval_session, "Session directory")->required()->check(CLI::ExistingDirectory);
  eval->add_option("--out", eval_out, "Report JSON path")->capture_default_str();
  eval->add_option("--models", eval_models_root, "Model root directory")->capture_default_str();
  eval->add_option("--sh-degree", eval_sh, "Spherical-harmonic degree (match the server)")
      ->check(CLI::Range(0, 3))
      ->capture_default_str();

  SyntheticSceneParams scene;
  fs::path scene_out = "models/synthetic/point_cloud.ply";
  auto* make_scene = app.add_subcommand("make-scene", "Write a synthetic Gaussian scene as PLY");
  make_scene->add_option("--out", scene_out, "Output PLY path")->capture_default_str();
  make_scene->add_option("--count", scene.count, "Number of Gaussians")->capture_default_str();
  make_scene->add_option("--seed", scene.seed, "Random seed")->capture_default_str();

  fs::path trace_out = "trace.csv";
  int trace_frames = 300;
  double trace_interval = 33.0, trace_speed = 1.0;
  auto* make_trace = app.add_subcommand("make-trace", "Write an orbiting movement trace");
  make_trace->add_option("--out", trace_out, "Output CSV")->capture_default_str();
  make_trace->add_option("--frames", trace_frames, "Entries")->capture_default_str();
  make_trace->add_option("--interval-ms", trace_interval, "Time between entries")->capture_default_str();
  make_trace->add_option("--deg-per-frame", trace_speed, "Azimuth change per entry")->capture_default_str();

  fs::path fixture_out = "abr_fixture.json";
  auto* fixture = app.add_subcommand("abr-fixture", "Write golden ABR decision traces");
  fixture->add_option("--out", fixture_out, "Output JSON")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*serve) {
      server.model_root = model_root;
      server.web_root = web_root;
      server.cert_path = cert;
      server.key_path = key;
      server.eviction_timeout_s = eviction_timeout;
      server.eviction_period_s = eviction_period;
      return cmd_serve(server);
    }
    if (*run_cmd) return cmd_run(run);
    if (*eval) return cmd_evaluate(eval_models_root, eval_model, eval_session, eval_out, eval_sh);
    if (*make_scene) return cmd_make_scene(scene_out, scene);
    if (*make_trace) return cmd_make_trace(trace_out, trace_frames, trace_interval, trace_speed);
    if (*fixture) return cmd_abr_fixture(fixture_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  }
  return 0;
}
