#pragma once

#include <splatstream/abr.hpp>
#include <splatstream/ladder.hpp>

#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

namespace splatstream {

/// One observed request as the client sees it.
struct AbrSample {
  double size_bytes = 0.0;
  double duration_s = 0.0;
  bool panning = false;
};

/// Golden decision trace shared with other ABR implementations.
///
/// Replay rule, per sample in order: record the throughput sample, fold the
/// size into the expected size of the level that produced it, call decide
/// with the sample duration, then append the resulting level.
struct DecisionTrace {
  std::string name;
  BitrateLadder ladder{};
  AbrConfig config{};
  int initial_level = 0;
  std::vector<AbrSample> samples;
  std::vector<int> expected_levels;
};

inline std::vector<int> replay_decisions(const DecisionTrace& trace) {
  BitrateLadder ladder = trace.ladder;
  LatencyAbr abr(trace.config, trace.initial_level);
  ThroughputEstimator est;
  std::vector<int> levels;
  levels.reserve(trace.samples.size());
  for (const auto& s : trace.samples) {
    const int used = abr.current_level();
    if (est.record_sample(s.size_bytes, s.duration_s)) {
      ladder.update_expected_size(used, s.size_bytes);
      abr.decide(ladder, est, s.duration_s, s.panning);
    }
    levels.push_back(abr.current_level());
  }
  return levels;
}

/// Closed-loop trace: the controller picks a level, the link model turns
/// that level's frame size into a duration, and so on for `n` steps.
/// `actual_size(level)` gives payload bytes, `link_bps(i)` the link rate at
/// step i, `panning(i)` the panning flag.
inline DecisionTrace generate_decision_trace(std::string name, int n, int initial_level,
                                             const std::function<double(int)>& actual_size,
                                             const std::function<double(int)>& link_bps,
                                             const std::function<bool(int)>& panning, double rtt_s = 0.002,
                                             BitrateLadder ladder = {}, AbrConfig config = {}) {
  DecisionTrace trace;
  trace.name = std::move(name);
  trace.ladder = ladder;
  trace.config = config;
  trace.initial_level = initial_level;
  LatencyAbr abr(config, initial_level);
  ThroughputEstimator est;
  for (int i = 0; i < n; ++i) {
    const int used = abr.current_level();
    AbrSample s;
    s.size_bytes = actual_size(used);
    s.duration_s = rtt_s + s.size_bytes / link_bps(i);
    s.panning = panning(i);
    est.record_sample(s.size_bytes, s.duration_s);
    ladder.update_expected_size(used, s.size_bytes);
    abr.decide(ladder, est, s.duration_s, s.panning);
    trace.samples.push_back(s);
    trace.expected_levels.push_back(abr.current_level());
  }
  return trace;
}

/// The fixture set: convergence, a bandwidth drop, recovery, panning
/// during a drop, and a deadband hold.
inline std::vector<DecisionTrace> standard_decision_traces() {
  const BitrateLadder ladder;
  // payload sizes close to the ladder's expected sizes
  auto sizes = [](int level) {
    static constexpr double table[] = {230'000.0, 52'000.0, 19'000.0, 6'500.0};
    return table[level];
  };
  auto never = [](int) { return false; };
  std::vector<DecisionTrace> traces;
  traces.push_back(generate_decision_trace("constant_5mbps", 40, 3, sizes, [](int) { return 625'000.0; }, never));
  traces.push_back(generate_decision_trace("constant_50mbps", 40, 3, sizes, [](int) { return 6'250'000.0; }, never));
  traces.push_back(generate_decision_trace(
      "step_down", 60, 0, sizes, [](int i) { return i < 20 ? 6'250'000.0 : 62'500.0; }, never));
  traces.push_back(generate_decision_trace(
      "step_up", 60, 3, sizes, [](int i) { return i < 20 ? 62'500.0 : 6'250'000.0; }, never));
  traces.push_back(generate_decision_trace(
      "panning_drop", 40, 0, sizes, [](int i) { return i < 10 ? 6'250'000.0 : 125'000.0; },
      [](int i) { return i >= 10; }));
  // 640x360 frames take ~0.12 s: inside the deadband, level 2 must hold
  traces.push_back(generate_decision_trace("deadband_hold", 100, 2, sizes, [](int) { return 160'000.0; }, never));
  return traces;
}

inline nlohmann::json to_json(const DecisionTrace& t) {
  auto samples = nlohmann::json::array();
  for (const auto& s : t.samples) {
    samples.push_back({{"size_bytes", s.size_bytes}, {"duration_s", s.duration_s}, {"panning", s.panning}});
  }
  return {{"name", t.name},
          {"ladder", t.ladder.to_json()},
          {"config",
           {{"t_target", t.config.t_target},
            {"t_margin", t.config.t_margin},
            {"hold", t.config.hold},
            {"over_margin_needed", t.config.over_margin_needed}}},
          {"initial_level", t.initial_level},
          {"samples", samples},
          {"expected_levels", t.expected_levels}};
}

inline DecisionTrace decision_trace_from_json(const nlohmann::json& j) {
  DecisionTrace t;
  t.name = j.value("name", "");
  t.ladder = BitrateLadder::from_json(j.at("ladder"));
  const auto& c = j.at("config");
  t.config = {c.at("t_target").get<double>(), c.at("t_margin").get<double>(), c.at("hold").get<int>(),
              c.at("over_margin_needed").get<int>()};
  t.initial_level = j.at("initial_level").get<int>();
  for (const auto& s : j.at("samples")) {
    t.samples.push_back({s.at("size_bytes").get<double>(), s.at("duration_s").get<double>(),
                         s.at("panning").get<bool>()});
  }
  t.expected_levels = j.at("expected_levels").get<std::vector<int>>();
  return t;
}

}  // namespace splatstream
