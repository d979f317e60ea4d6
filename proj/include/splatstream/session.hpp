#pragma once

#include <splatstream/abr.hpp>
#include <splatstream/camera.hpp>
#include <splatstream/error.hpp>
#include <splatstream/ladder.hpp>
#include <splatstream/protocol.hpp>
#include <splatstream/shaper.hpp>
#include <splatstream/traces.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

namespace splatstream {

struct FetchResult {
  bool transport_ok = false;
  int status = 0;
  std::string body;
  std::size_t content_length = 0;
  double render_ms = 0.0;
  std::string error;
};

/// Issues one render request and waits for the whole response.
class FrameFetcher {
 public:
  virtual ~FrameFetcher() = default;
  virtual FetchResult fetch(const RenderRequest& request) = 0;
};

class HttpFrameFetcher final : public FrameFetcher {
 public:
  explicit HttpFrameFetcher(const std::string& endpoint, std::chrono::seconds timeout = std::chrono::seconds(30))
      : client_(endpoint) {
    client_.set_connection_timeout(timeout);
    client_.set_read_timeout(timeout);
    client_.set_keep_alive(true);
#ifdef CPPHTTPLIB_OPENSSL_SUPPORT
    // development servers use self-signed certificates
    client_.enable_server_certificate_verification(false);
#endif
  }

  FetchResult fetch(const RenderRequest& request) override {
    FetchResult out;
    auto res = client_.Post("/render", request.to_json().dump(), "application/json");
    if (!res) {
      out.error = httplib::to_string(res.error());
      return out;
    }
    out.transport_ok = true;
    out.status = res->status;
    out.body = std::move(res->body);
    const auto cl = res->get_header_value("Content-Length");
    out.content_length = cl.empty() ? out.body.size() : static_cast<std::size_t>(std::stoull(cl));
    const auto ms = res->get_header_value("X-Render-Ms");
    if (!ms.empty()) out.render_ms = std::stod(ms);
    if (out.status != 200) {
      try {
        out.error = nlohmann::json::parse(out.body).value("error", std::string{});
      } catch (const std::exception&) {
        out.error = "HTTP " + std::to_string(out.status);
      }
    }
    return out;
  }

 private:
  httplib::Client client_;
};

struct FrameRecord {
  std::int64_t frame_id = 0;
  double t_send = 0.0;  // seconds from session start
  double t_recv = 0.0;
  double azimuth_deg = 0.0, elevation_deg = 0.0;
  double tx = 0.0, ty = 0.0, tz = 0.0;
  int level = 0;
  int width = 0, height = 0;
  int jpeg_quality = 0;
  std::size_t bytes = 0;
  double render_ms = 0.0;
  double ema_bps = 0.0;
  int status = 0;  // HTTP status, 0 when the transport failed
  bool ok = false;
  std::string sample_file;  // set when the frame was written to disk

  double latency() const { return t_recv - t_send; }
  friend bool operator==(const FrameRecord&, const FrameRecord&) = default;
};

struct SessionLog {
  std::string model_id;
  std::string policy;
  std::string movement_trace;
  std::string bandwidth_trace;
  Intrinsics base{};
  BitrateLadder ladder{};
  bool virtual_time = false;
  bool aborted = false;
  std::string abort_reason;
  std::vector<FrameRecord> frames;

  std::vector<int> levels() const {
    std::vector<int> out;
    for (const auto& f : frames) out.push_back(f.level);
    return out;
  }
};

struct SessionConfig {
  std::string model_id;
  Intrinsics base = Intrinsics::from_hfov(1280, 720, deg_to_rad(60.0));
  BitrateLadder ladder{};
  std::string policy = "latency";
  AbrConfig abr{};
  std::optional<int> initial_level;  // defaults to the worst rung
  bool virtual_time = true;
  /// Fixed request overhead added to every frame in virtual time.
  double virtual_rtt_s = 0.002;
  double bucket_bytes = kDefaultBucketBytes;
  double panning_threshold_deg = 5.0;
  int sample_stride = 10;  // 0 disables frame sampling
  std::optional<std::filesystem::path> out_dir;
};

namespace detail {

inline void write_binary(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

inline std::string sample_name(std::int64_t frame_id) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "frame_%06lld.jpg", static_cast<long long>(frame_id));
  return buf;
}

}  // namespace detail

/// Replays a movement trace against a render endpoint, one request at a
/// time, with the ABR policy choosing the rung for every frame.
///
/// In virtual time each request is sent at max(entry time, previous
/// completion) and completes after `virtual_rtt_s` plus the shaped transfer
/// time, so the level sequence depends only on the traces and the payload
/// sizes. In wall-clock mode real time is measured and shaping delays are
/// slept.
inline SessionLog run_session(FrameFetcher& fetcher, const MovementTrace& movement,
                              const std::optional<BandwidthTrace>& bandwidth, SessionConfig config) {
  if (movement.entries.empty()) throw Error(ErrorKind::InvalidArgument, "empty movement trace");
  SessionLog log;
  log.model_id = config.model_id;
  log.policy = config.policy;
  log.movement_trace = movement.name;
  log.bandwidth_trace = bandwidth ? bandwidth->name : "";
  log.base = config.base;
  log.ladder = config.ladder;
  log.virtual_time = config.virtual_time;

  BitrateLadder ladder = config.ladder;
  auto policy = make_policy(config.policy, config.abr, config.initial_level.value_or(ladder.worst_level()));
  ThroughputEstimator estimator;
  std::optional<TokenBucketShaper> shaper;
  if (bandwidth) shaper.emplace(*bandwidth, config.bucket_bytes);

  if (config.out_dir && config.sample_stride > 0) {
    std::filesystem::create_directories(*config.out_dir / "frames");
  }

  using WallClock = std::chrono::steady_clock;
  const auto wall_start = WallClock::now();
  auto wall_now = [&] { return std::chrono::duration<double>(WallClock::now() - wall_start).count(); };
  auto sleep_until = [&](double t) {
    const double delay = t - wall_now();
    if (delay > 0) std::this_thread::sleep_for(std::chrono::duration<double>(delay));
  };

  double prev_recv = 0.0;
  for (std::size_t i = 0; i < movement.entries.size(); ++i) {
    const auto& entry = movement.entries[i];
    const int level = policy->current_level();
    const QualityProfile& profile = ladder[level];
    const Intrinsics k = scale_intrinsics(config.base, profile.width, profile.height);

    RenderRequest req;
    req.model_id = config.model_id;
    req.azimuth = entry.azimuth_deg;
    req.elevation = entry.elevation_deg;
    req.translation = {entry.tx, entry.ty, entry.tz};
    req.fx = k.fx, req.fy = k.fy, req.cx = k.cx, req.cy = k.cy;
    req.width = k.width, req.height = k.height;
    req.jpeg_quality = profile.jpeg_quality;
    req.frame_id = static_cast<std::int64_t>(i) + 1;

    FrameRecord rec;
    rec.frame_id = req.frame_id;
    rec.azimuth_deg = entry.azimuth_deg;
    rec.elevation_deg = entry.elevation_deg;
    rec.tx = entry.tx, rec.ty = entry.ty, rec.tz = entry.tz;
    rec.level = level;
    rec.width = k.width, rec.height = k.height;
    rec.jpeg_quality = profile.jpeg_quality;

    const double scheduled = entry.t_ms / 1000.0;
    if (config.virtual_time) {
      rec.t_send = std::max(scheduled, prev_recv);
    } else {
      sleep_until(scheduled);
      rec.t_send = wall_now();
    }

    FetchResult res = fetcher.fetch(req);
    rec.status = res.status;
    if (!res.transport_ok) {
      rec.t_recv = config.virtual_time ? rec.t_send : wall_now();
      rec.ema_bps = estimator.ema();
      log.frames.push_back(rec);
      log.aborted = true;
      log.abort_reason = "server unreachable: " + res.error;
      break;
    }
    if (res.status != 200) {
      rec.t_recv = config.virtual_time ? rec.t_send : wall_now();
      rec.ema_bps = estimator.ema();
      log.frames.push_back(rec);
      prev_recv = rec.t_recv;
      continue;
    }

    rec.ok = true;
    rec.bytes = res.content_length;
    rec.render_ms = res.render_ms;
    if (config.virtual_time) {
      const double start = rec.t_send + config.virtual_rtt_s;
      rec.t_recv = shaper ? shaper->deliver(static_cast<double>(rec.bytes), start) : start;
    } else {
      const double arrived = wall_now();
      if (shaper) {
        const double shaped = shaper->deliver(static_cast<double>(rec.bytes), rec.t_send);
        sleep_until(shaped);
      }
      rec.t_recv = std::max(arrived, wall_now());
    }

    estimator.record_sample(static_cast<double>(rec.bytes), rec.latency());
    ladder.update_expected_size(level, static_cast<double>(rec.bytes));
    bool panning = false;
    if (i > 0) {
      const auto& prev = movement.entries[i - 1];
      panning = is_panning(prev.azimuth_deg, prev.elevation_deg, entry.azimuth_deg, entry.elevation_deg,
                           config.panning_threshold_deg);
    }
    policy->decide(ladder, estimator, rec.latency(), panning);
    rec.ema_bps = estimator.ema();

    if (config.out_dir && config.sample_stride > 0 && i % static_cast<std::size_t>(config.sample_stride) == 0) {
      rec.sample_file = "frames/" + detail::sample_name(rec.frame_id);
      detail::write_binary(*config.out_dir / rec.sample_file, res.body);
    }
    log.frames.push_back(rec);
    prev_recv = rec.t_recv;
  }
  return log;
}

inline SessionLog run_session(const std::string& endpoint, const MovementTrace& movement,
                              const std::optional<BandwidthTrace>& bandwidth, SessionConfig config) {
  HttpFrameFetcher fetcher(endpoint);
  return run_session(fetcher, movement, bandwidth, std::move(config));
}

struct SessionSummary {
  std::size_t frames = 0;
  std::size_t ok_frames = 0;
  double mean_latency_s = 0.0;
  double p95_latency_s = 0.0;
  double mean_bandwidth_bps = 0.0;  // bits per second
  int median_width = 0, median_height = 0;
  std::size_t switches = 0;

  nlohmann::json to_json() const {
    return {{"frames", frames},
            {"ok_frames", ok_frames},
            {"mean_latency_s", mean_latency_s},
            {"p95_latency_s", p95_latency_s},
            {"mean_bandwidth_bps", mean_bandwidth_bps},
            {"median_resolution", {{"width", median_width}, {"height", median_height}}},
            {"switches", switches}};
  }
};

/// Frames whose level differs from the previous frame's.
inline std::size_t count_switches(const std::vector<int>& levels) {
  std::size_t n = 0;
  for (std::size_t i = 1; i < levels.size(); ++i) n += levels[i] != levels[i - 1] ? 1 : 0;
  return n;
}

/// Latency and bandwidth statistics use successful frames only; switches
/// count every logged frame.
inline SessionSummary summarize(const SessionLog& log) {
  if (log.frames.empty()) throw Error(ErrorKind::EmptyInput, "session log has no frames");
  SessionSummary s;
  s.frames = log.frames.size();
  s.switches = count_switches(log.levels());

  std::vector<double> latencies;
  std::vector<std::pair<long, const FrameRecord*>> by_area;
  double bw_sum = 0.0;
  for (const auto& f : log.frames) {
    if (!f.ok) continue;
    latencies.push_back(f.latency());
    if (f.latency() > 0) bw_sum += static_cast<double>(f.bytes) * 8.0 / f.latency();
    by_area.push_back({static_cast<long>(f.width) * f.height, &f});
  }
  s.ok_frames = latencies.size();
  if (latencies.empty()) return s;

  s.mean_latency_s = std::accumulate(latencies.begin(), latencies.end(), 0.0) / latencies.size();
  auto sorted = latencies;
  std::sort(sorted.begin(), sorted.end());
  const auto rank = static_cast<std::size_t>(std::ceil(0.95 * sorted.size()));
  s.p95_latency_s = sorted[std::max<std::size_t>(rank, 1) - 1];
  s.mean_bandwidth_bps = bw_sum / latencies.size();

  std::stable_sort(by_area.begin(), by_area.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  const auto* median = by_area[(by_area.size() - 1) / 2].second;
  s.median_width = median->width;
  s.median_height = median->height;
  return s;
}

inline constexpr std::string_view kSessionCsvHeader =
    "frame_id,t_send,t_recv,azimuth_deg,elevation_deg,tx,ty,tz,level,width,height,jpeg_quality,bytes,render_ms,"
    "ema_bps,status,ok,sample_file";

inline std::string format_session_csv(const SessionLog& log) {
  std::ostringstream out;
  out << kSessionCsvHeader << "\n";
  auto d = [](double v) { return detail::fmt_double(v); };
  for (const auto& f : log.frames) {
    out << f.frame_id << ',' << d(f.t_send) << ',' << d(f.t_recv) << ',' << d(f.azimuth_deg) << ','
        << d(f.elevation_deg) << ',' << d(f.tx) << ',' << d(f.ty) << ',' << d(f.tz) << ',' << f.level << ','
        << f.width << ',' << f.height << ',' << f.jpeg_quality << ',' << f.bytes << ',' << d(f.render_ms) << ','
        << d(f.ema_bps) << ',' << f.status << ',' << (f.ok ? 1 : 0) << ',' << f.sample_file << "\n";
  }
  return out.str();
}

inline nlohmann::json session_metadata(const SessionLog& log) {
  return {{"model_id", log.model_id},
          {"policy", log.policy},
          {"movement_trace", log.movement_trace},
          {"bandwidth_trace", log.bandwidth_trace},
          {"virtual_time", log.virtual_time},
          {"aborted", log.aborted},
          {"abort_reason", log.abort_reason},
          {"base_intrinsics",
           {{"fx", log.base.fx},
            {"fy", log.base.fy},
            {"cx", log.base.cx},
            {"cy", log.base.cy},
            {"width", log.base.width},
            {"height", log.base.height}}},
          {"ladder", log.ladder.to_json()}};
}

/// Writes session.csv (per-frame records), session.json (metadata) and
/// summary.json into `dir`.
inline SessionSummary export_session_report(const SessionLog& log, const std::filesystem::path& dir) {
  const auto summary = summarize(log);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::IoError, "cannot create " + dir.string() + ": " + ec.message());
  detail::write_binary(dir / "session.csv", format_session_csv(log));
  detail::write_binary(dir / "session.json", session_metadata(log).dump(2));
  auto j = summary.to_json();
  j["aborted"] = log.aborted;
  detail::write_binary(dir / "summary.json", j.dump(2));
  return summary;
}

/// Reads back a directory written by export_session_report.
inline SessionLog load_session(const std::filesystem::path& dir) {
  SessionLog log;
  {
    std::ifstream in(dir / "session.json");
    if (!in) throw Error(ErrorKind::IoError, "cannot open " + (dir / "session.json").string());
    nlohmann::json meta;
    try {
      meta = nlohmann::json::parse(in);
      log.model_id = meta.at("model_id").get<std::string>();
      log.policy = meta.value("policy", "");
      log.movement_trace = meta.value("movement_trace", "");
      log.bandwidth_trace = meta.value("bandwidth_trace", "");
      log.virtual_time = meta.value("virtual_time", false);
      log.aborted = meta.value("aborted", false);
      log.abort_reason = meta.value("abort_reason", "");
      const auto& k = meta.at("base_intrinsics");
      log.base = {k.at("fx").get<double>(), k.at("fy").get<double>(), k.at("cx").get<double>(),
                  k.at("cy").get<double>(), k.at("width").get<int>(),  k.at("height").get<int>()};
      log.ladder = BitrateLadder::from_json(meta.at("ladder"));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::ParseError, std::string("session.json: ") + e.what());
    }
  }
  std::ifstream in(dir / "session.csv");
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + (dir / "session.csv").string());
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1) {
      if (line != kSessionCsvHeader) throw Error(ErrorKind::ParseError, "session.csv: unexpected header");
      continue;
    }
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    if (fields.size() != 18) {
      throw Error(ErrorKind::ParseError, "session.csv:" + std::to_string(line_no) + ": expected 18 fields");
    }
    try {
      FrameRecord f;
      f.frame_id = std::stoll(fields[0]);
      f.t_send = std::stod(fields[1]);
      f.t_recv = std::stod(fields[2]);
      f.azimuth_deg = std::stod(fields[3]);
      f.elevation_deg = std::stod(fields[4]);
      f.tx = std::stod(fields[5]);
      f.ty = std::stod(fields[6]);
      f.tz = std::stod(fields[7]);
      f.level = std::stoi(fields[8]);
      f.width = std::stoi(fields[9]);
      f.height = std::stoi(fields[10]);
      f.jpeg_quality = std::stoi(fields[11]);
      f.bytes = std::stoull(fields[12]);
      f.render_ms = std::stod(fields[13]);
      f.ema_bps = std::stod(fields[14]);
      f.status = std::stoi(fields[15]);
      f.ok = fields[16] == "1";
      f.sample_file = fields[17];
      log.frames.push_back(std::move(f));
    } catch (const std::exception&) {
      throw Error(ErrorKind::ParseError, "session.csv:" + std::to_string(line_no) + ": bad field");
    }
  }
  return log;
}

}  // namespace splatstream
