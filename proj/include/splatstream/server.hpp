#pragma once

#include <splatstream/error.hpp>
#include <splatstream/model_registry.hpp>
#include <splatstream/protocol.hpp>
#include <splatstream/renderer.hpp>

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <memory>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>

#include <httplib.h>
#include <json.hpp>

namespace splatstream {

/// Admits at most `capacity` holders at once, in arrival order.
class FifoGate {
 public:
  explicit FifoGate(std::size_t capacity) : capacity_(capacity == 0 ? 1 : capacity) {}

  void enter() {
    std::unique_lock lock(mutex_);
    const std::uint64_t ticket = next_ticket_++;
    cv_.wait(lock, [&] { return ticket == now_serving_ && active_ < capacity_; });
    ++now_serving_;
    ++active_;
    cv_.notify_all();
  }

  void leave() {
    std::lock_guard lock(mutex_);
    --active_;
    cv_.notify_all();
  }

  std::size_t capacity() const { return capacity_; }

 private:
  std::size_t capacity_;
  std::mutex mutex_;
  std::condition_variable cv_;
  std::uint64_t next_ticket_ = 0;
  std::uint64_t now_serving_ = 0;
  std::size_t active_ = 0;
};

/// Periodically evicts idle models until stopped.
class EvictionLoop {
 public:
  EvictionLoop(ModelRegistry& registry, std::chrono::duration<double> period)
      : registry_(registry), period_(period) {}
  EvictionLoop(const EvictionLoop&) = delete;
  EvictionLoop& operator=(const EvictionLoop&) = delete;
  ~EvictionLoop() { stop(); }

  void start() {
    std::lock_guard lock(mutex_);
    if (thread_.joinable()) return;
    stopping_ = false;
    thread_ = std::thread([this] { run(); });
  }

  void stop() {
    {
      std::lock_guard lock(mutex_);
      stopping_ = true;
    }
    cv_.notify_all();
    if (thread_.joinable()) thread_.join();
  }

  std::uint64_t ticks() const { return ticks_.load(); }

  /// Blocks until at least `n` ticks have completed or the timeout expires.
  bool wait_for_ticks(std::uint64_t n, std::chrono::milliseconds timeout) {
    std::unique_lock lock(mutex_);
    return tick_cv_.wait_for(lock, timeout, [&] { return ticks_.load() >= n; });
  }

 private:
  void run() {
    std::unique_lock lock(mutex_);
    while (!stopping_) {
      if (cv_.wait_for(lock, period_, [this] { return stopping_; })) break;
      lock.unlock();
      registry_.evict_inactive();
      lock.lock();
      ++ticks_;
      tick_cv_.notify_all();
    }
  }

  ModelRegistry& registry_;
  std::chrono::duration<double> period_;
  std::mutex mutex_;
  std::condition_variable cv_;
  std::condition_variable tick_cv_;
  std::atomic<std::uint64_t> ticks_{0};
  bool stopping_ = false;
  std::thread thread_;
};

struct ServerConfig {
  std::filesystem::path model_root = "models";
  std::filesystem::path web_root = "web";
  std::string host = "127.0.0.1";
  int port = 8443;  // 0 picks a free port
  std::filesystem::path cert_path;
  std::filesystem::path key_path;
  double eviction_timeout_s = 300.0;
  double eviction_period_s = 30.0;
  std::size_t inflight_cap = 0;  // 0 means 4 x hardware threads
  bool h1_fallback = true;
  RenderOptions render{};
};

/// Result of a route handler before it is written to the wire.
struct HttpReply {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
  std::vector<std::pair<std::string, std::string>> headers;
};

inline HttpReply json_error(int status, const std::string& message, const std::string& field = {}) {
  nlohmann::json j = {{"error", message}};
  if (!field.empty()) j["field"] = field;
  return {status, "application/json", j.dump(), {}};
}

inline constexpr std::string_view kFallbackIndex =
    "<!doctype html><html><head><meta charset=\"utf-8\"><title>splatstream</title></head>"
    "<body><p>splatstream server is running. The browser client is served from /static.</p></body></html>";

/// Render service: model discovery and loading, stateless per-frame
/// rendering, static client assets, and the eviction loop.
class StreamingServer {
 public:
  explicit StreamingServer(ServerConfig config)
      : config_(std::move(config)),
        registry_(std::make_shared<ModelRegistry>(scan_model_directory(config_.model_root),
                                                  std::chrono::duration<double>(config_.eviction_timeout_s))),
        gate_(resolve_cap(config_.inflight_cap)) {}

  /// Uses an externally built registry (custom loaders or clocks).
  StreamingServer(ServerConfig config, std::shared_ptr<ModelRegistry> registry)
      : config_(std::move(config)), registry_(std::move(registry)), gate_(resolve_cap(config_.inflight_cap)) {}

  StreamingServer(const StreamingServer&) = delete;
  StreamingServer& operator=(const StreamingServer&) = delete;
  ~StreamingServer() { stop(); }

  ModelRegistry& registry() { return *registry_; }
  const ServerConfig& config() const { return config_; }

  HttpReply handle_models_list() const {
    auto list = nlohmann::json::array();
    for (const auto& r : registry_->records()) {
      nlohmann::json preview = nullptr;
      if (r.preview_path) preview = "/models/" + r.id + "/preview";
      list.push_back({{"id", r.id}, {"name", r.name}, {"state", std::string(to_string(r.state))},
                      {"preview_url", preview}});
    }
    return {200, "application/json", list.dump(), {}};
  }

  HttpReply handle_model_load(const std::string& id) {
    if (!registry_->contains(id)) return json_error(404, "unknown model '" + id + "'");
    try {
      const auto state = registry_->load(id);
      return {200, "application/json", nlohmann::json{{"id", id}, {"state", std::string(to_string(state))}}.dump(), {}};
    } catch (const Error& e) {
      return json_error(e.kind() == ErrorKind::UnknownModel ? 404 : 500, e.what());
    }
  }

  HttpReply handle_render(const std::string& body) {
    SchemaError schema;
    auto request = parse_render_request(body, schema);
    if (!request) return json_error(422, schema.message, schema.field);
    if (!registry_->contains(request->model_id)) {
      return json_error(404, "unknown model '" + request->model_id + "'");
    }

    gate_.enter();
    struct Leave {
      FifoGate& g;
      ~Leave() { g.leave(); }
    } leave{gate_};

    try {
      ModelHandle model = registry_->acquire(request->model_id);
      const QualityProfile profile{0, request->width, request->height, request->jpeg_quality, 1.0};
      auto result = render_view(*model, request->pose(), request->intrinsics(), profile, config_.render);
      model.reset();

      std::ostringstream ms;
      ms << std::fixed << std::setprecision(3) << result.stats.render_ms;
      HttpReply reply;
      reply.content_type = "image/jpeg";
      reply.body.assign(reinterpret_cast<const char*>(result.jpeg.data()), result.jpeg.size());
      reply.headers = {{"X-Render-Ms", ms.str()},
                       {"X-Frame-Id", std::to_string(request->frame_id)},
                       {"Cache-Control", "no-store"}};
      return reply;
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::UnknownModel) return json_error(404, e.what());
      return json_error(500, e.what());
    } catch (const std::exception& e) {
      return json_error(500, e.what());
    }
  }

  HttpReply handle_index() const {
    const auto index = config_.web_root / "index.html";
    std::ifstream in(index, std::ios::binary);
    if (in) {
      std::ostringstream ss;
      ss << in.rdbuf();
      return {200, "text/html; charset=utf-8", ss.str(), {}};
    }
    return {200, "text/html; charset=utf-8", std::string(kFallbackIndex), {}};
  }

  HttpReply handle_preview(const std::string& id) const {
    auto rec = registry_->record(id);
    if (!rec) return json_error(404, "unknown model '" + id + "'");
    if (!rec->preview_path) return json_error(404, "model '" + id + "' has no preview");
    std::ifstream in(*rec->preview_path, std::ios::binary);
    if (!in) return json_error(404, "preview unreadable");
    std::ostringstream ss;
    ss << in.rdbuf();
    return {200, "image/jpeg", ss.str(), {}};
  }

  /// Binds and starts serving on a background thread. Returns the bound port.
  int start() {
    if (!config_.h1_fallback) {
      throw Error(ErrorKind::InvalidArgument,
                  "HTTP/3 listener unavailable: this build has no QUIC stack; enable the HTTP/1.1 listener");
    }
    if (!config_.cert_path.empty() || !config_.key_path.empty()) {
#ifdef CPPHTTPLIB_OPENSSL_SUPPORT
      http_ = std::make_unique<httplib::SSLServer>(config_.cert_path.c_str(), config_.key_path.c_str());
      if (!http_->is_valid()) throw Error(ErrorKind::IoError, "cannot load TLS certificate or key");
#else
      throw Error(ErrorKind::InvalidArgument, "TLS requested but built without OpenSSL");
#endif
    } else {
      http_ = std::make_unique<httplib::Server>();
    }
    install_routes(*http_);

    int port = config_.port;
    if (port == 0) {
      port = http_->bind_to_any_port(config_.host);
    } else if (!http_->bind_to_port(config_.host, port)) {
      port = -1;
    }
    if (port < 0) throw Error(ErrorKind::IoError, "cannot bind " + config_.host + ":" + std::to_string(config_.port));
    port_ = port;

    listener_ = std::thread([this] { http_->listen_after_bind(); });
    http_->wait_until_ready();
    eviction_ = std::make_unique<EvictionLoop>(*registry_, std::chrono::duration<double>(config_.eviction_period_s));
    eviction_->start();
    return port_;
  }

  int port() const { return port_; }
  EvictionLoop* eviction_loop() { return eviction_.get(); }

  /// Stops accepting, lets in-flight requests finish, stops the eviction
  /// loop, then unloads every model.
  void stop() {
    if (!http_) return;
    http_->stop();
    if (listener_.joinable()) listener_.join();
    if (eviction_) eviction_->stop();
    registry_->drain_and_unload();
    http_.reset();
  }

 private:
  static std::size_t resolve_cap(std::size_t cap) {
    if (cap > 0) return cap;
    const unsigned hw = std::thread::hardware_concurrency();
    return 4 * static_cast<std::size_t>(hw == 0 ? 1 : hw);
  }

  static void write(httplib::Response& res, HttpReply reply) {
    res.status = reply.status;
    for (auto& [k, v] : reply.headers) res.set_header(k, v);
    res.set_content(std::move(reply.body), reply.content_type);
  }

  void install_routes(httplib::Server& http) {
    http.Get("/", [this](const httplib::Request&, httplib::Response& res) { write(res, handle_index()); });
    http.Get("/healthz", [](const httplib::Request&, httplib::Response& res) {
      res.set_content(R"({"status":"ok"})", "application/json");
    });
    http.Get("/models", [this](const httplib::Request&, httplib::Response& res) { write(res, handle_models_list()); });
    http.Post(R"(/models/([^/]+)/load)", [this](const httplib::Request& req, httplib::Response& res) {
      write(res, handle_model_load(req.matches[1]));
    });
    http.Get(R"(/models/([^/]+)/preview)", [this](const httplib::Request& req, httplib::Response& res) {
      write(res, handle_preview(req.matches[1]));
    });
    http.Post("/render", [this](const httplib::Request& req, httplib::Response& res) {
      write(res, handle_render(req.body));
    });

    const auto static_dir = config_.web_root / "static";
    std::error_code ec;
    if (std::filesystem::is_directory(static_dir, ec)) {
      http.set_mount_point("/static", static_dir.string());
    }
    http.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
      if (res.body.empty()) {
        res.set_content(nlohmann::json{{"error", "not found: " + req.path}}.dump(), "application/json");
      }
    });
    http.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
      std::string what = "internal error";
      try {
        std::rethrow_exception(ep);
      } catch (const std::exception& e) {
        what = e.what();
      } catch (...) {
      }
      res.status = 500;
      res.set_content(nlohmann::json{{"error", what}}.dump(), "application/json");
    });
  }

  ServerConfig config_;
  std::shared_ptr<ModelRegistry> registry_;
  FifoGate gate_;
  std::unique_ptr<httplib::Server> http_;
  std::thread listener_;
  std::unique_ptr<EvictionLoop> eviction_;
  int port_ = -1;
};

}  // namespace splatstream
