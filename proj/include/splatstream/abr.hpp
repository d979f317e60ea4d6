#pragma once

#include <splatstream/error.hpp>
#include <splatstream/ladder.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <memory>
#include <optional>
#include <string>

namespace splatstream {

/// Smoothed throughput from per-request samples r = size / duration.
///
/// The first accepted sample seeds the average; each later one folds in as
/// ema = alpha * r + (1 - alpha) * ema. The last `history_length` raw
/// samples are kept for inspection only.
class ThroughputEstimator {
 public:
  static constexpr double kDefaultAlpha = 0.3;
  static constexpr std::size_t kDefaultHistory = 5;

  explicit ThroughputEstimator(double alpha = kDefaultAlpha, std::size_t history_length = kDefaultHistory)
      : alpha_(alpha), history_length_(history_length) {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw Error(ErrorKind::InvalidArgument, "alpha must be in (0, 1]");
    if (history_length == 0) throw Error(ErrorKind::InvalidArgument, "history length must be positive");
  }

  /// Returns false (and changes nothing) for non-positive or non-finite input.
  bool record_sample(double size_bytes, double duration_s) {
    if (!(size_bytes > 0.0) || !(duration_s > 0.0) || !std::isfinite(size_bytes) || !std::isfinite(duration_s)) {
      return false;
    }
    const double r = size_bytes / duration_s;
    if (!std::isfinite(r)) return false;
    history_.push_back(r);
    if (history_.size() > history_length_) history_.pop_front();
    ema_ = samples_ == 0 ? r : alpha_ * r + (1.0 - alpha_) * ema_;
    ++samples_;
    return true;
  }

  double ema() const { return ema_; }
  std::size_t samples() const { return samples_; }
  bool has_estimate() const { return samples_ > 0; }
  const std::deque<double>& history() const { return history_; }
  double alpha() const { return alpha_; }

 private:
  double alpha_;
  std::size_t history_length_;
  std::deque<double> history_;
  double ema_ = 0.0;
  std::size_t samples_ = 0;
};

/// Expected transfer time of a rung in seconds. Sizes and throughput are
/// both in bytes, so no extra unit factor applies.
inline double predict_time(const QualityProfile& profile, double throughput_bps) {
  if (!(throughput_bps > 0.0)) throw Error(ErrorKind::InvalidArgument, "throughput must be positive");
  return profile.expected_size_bytes / throughput_bps;
}

struct AbrConfig {
  double t_target = 0.100;
  double t_margin = 0.150;
  int hold = 3;
  int over_margin_needed = 2;
};

struct AbrState {
  int current_level = 0;
  int hold_counter = 0;
  int consecutive_over_margin = 0;
  std::optional<int> pending;  // candidate level the hold counter refers to

  friend bool operator==(const AbrState&, const AbrState&) = default;
};

struct AbrDecision {
  int level = 0;
  bool switched = false;
};

/// Pluggable per-frame quality policy.
class AbrPolicy {
 public:
  virtual ~AbrPolicy() = default;
  virtual std::string name() const = 0;
  virtual int current_level() const = 0;
  virtual AbrDecision decide(const BitrateLadder& ladder, const ThroughputEstimator& est, double last_request_time,
                             bool panning) = 0;
};

/// Latency-targeting controller.
///
/// Upgrade candidate: the next better rung is predicted to finish within
/// t_target. Downgrade candidate: the last `over_margin_needed` requests all
/// took longer than t_margin. A candidate must repeat for `hold`
/// consecutive decisions before it takes effect. While panning, downgrades
/// skip the hold and drop straight to the first rung predicted to meet
/// t_target; upgrades never skip it.
class LatencyAbr final : public AbrPolicy {
 public:
  explicit LatencyAbr(AbrConfig config = {}, int initial_level = 0) : config_(config) {
    if (!(config.t_target < config.t_margin)) {
      throw Error(ErrorKind::InvalidArgument, "t_target must be below t_margin");
    }
    if (config.hold < 1 || config.over_margin_needed < 1) {
      throw Error(ErrorKind::InvalidArgument, "hold and over-margin counts must be positive");
    }
    state_.current_level = initial_level;
  }

  std::string name() const override { return "latency"; }
  int current_level() const override { return state_.current_level; }
  const AbrState& state() const { return state_; }
  const AbrConfig& config() const { return config_; }

  AbrDecision decide(const BitrateLadder& ladder, const ThroughputEstimator& est, double last_request_time,
                     bool panning) override {
    auto [next, decision] = decide(state_, config_, ladder, est, last_request_time, panning);
    state_ = next;
    return decision;
  }

  /// Pure form of the transition function.
  static std::pair<AbrState, AbrDecision> decide(AbrState s, const AbrConfig& cfg, const BitrateLadder& ladder,
                                                 const ThroughputEstimator& est, double last_request_time,
                                                 bool panning) {
    const int worst = ladder.worst_level();
    s.current_level = std::clamp(s.current_level, 0, worst);

    if (last_request_time > cfg.t_margin) {
      ++s.consecutive_over_margin;
    } else {
      s.consecutive_over_margin = 0;
    }

    std::optional<int> candidate;
    bool downgrade = false;
    if (s.consecutive_over_margin >= cfg.over_margin_needed && s.current_level < worst) {
      candidate = s.current_level + 1;
      downgrade = true;
    } else if (s.current_level > 0 && est.has_estimate() &&
               predict_time(ladder[s.current_level - 1], est.ema()) <= cfg.t_target) {
      candidate = s.current_level - 1;
    }

    if (!candidate) {
      s.hold_counter = 0;
      s.pending.reset();
      return {s, {s.current_level, false}};
    }

    if (downgrade && panning) {
      int target = worst;
      if (est.has_estimate()) {
        for (int l = s.current_level + 1; l <= worst; ++l) {
          if (predict_time(ladder[l], est.ema()) <= cfg.t_target) {
            target = l;
            break;
          }
        }
      }
      s.current_level = target;
      s.hold_counter = 0;
      s.pending.reset();
      return {s, {target, true}};
    }

    if (s.pending == candidate) {
      ++s.hold_counter;
    } else {
      s.pending = candidate;
      s.hold_counter = 1;
    }
    if (s.hold_counter >= cfg.hold) {
      s.current_level = *candidate;
      s.hold_counter = 0;
      s.pending.reset();
      return {s, {s.current_level, true}};
    }
    return {s, {s.current_level, false}};
  }

 private:
  AbrConfig config_;
  AbrState state_;
};

/// Pose-rate test used for the panning bypass: combined yaw and pitch change
/// between the last two poses above the threshold (degrees per frame).
inline bool is_panning(double prev_azimuth_deg, double prev_elevation_deg, double azimuth_deg, double elevation_deg,
                       double threshold_deg = 5.0) {
  return std::abs(azimuth_deg - prev_azimuth_deg) + std::abs(elevation_deg - prev_elevation_deg) > threshold_deg;
}

inline std::unique_ptr<AbrPolicy> make_policy(const std::string& name, AbrConfig config = {}, int initial_level = 0) {
  if (name == "latency") return std::make_unique<LatencyAbr>(config, initial_level);
  throw Error(ErrorKind::InvalidArgument, "unknown ABR policy '" + name + "'");
}

}  // namespace splatstream
