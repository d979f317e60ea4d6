#pragma once

#include <splatstream/error.hpp>
#include <splatstream/traces.hpp>

#include <algorithm>
#include <limits>
#include <vector>

namespace splatstream {

/// Default burst allowance: one Ethernet MTU.
inline constexpr double kDefaultBucketBytes = 1500.0;

/// Token-bucket link model over a piecewise-constant rate schedule, in
/// seconds and bytes. Tokens refill at the current rate up to the bucket
/// size; a transfer spends tokens first and the remainder drains at the
/// link rate, integrated across rate changes.
class TokenBucketShaper {
 public:
  struct Segment {
    double start_s;
    double rate_bps;  // bytes per second
  };

  TokenBucketShaper(const BandwidthTrace& trace, double bucket_bytes = kDefaultBucketBytes)
      : bucket_(bucket_bytes), tokens_(bucket_bytes) {
    if (trace.entries.empty()) throw Error(ErrorKind::InvalidArgument, "empty bandwidth trace");
    for (const auto& e : trace.entries) {
      segments_.push_back({e.t_ms / 1000.0, BandwidthTrace::kbps_to_bytes(e.rate_kbps)});
    }
    validate();
  }

  TokenBucketShaper(double rate_bps, double bucket_bytes) : bucket_(bucket_bytes), tokens_(bucket_bytes) {
    segments_.push_back({0.0, rate_bps});
    validate();
  }

  double bucket() const { return bucket_; }
  double tokens() const { return tokens_; }
  double last_update() const { return last_; }
  void set_tokens(double tokens) { tokens_ = std::clamp(tokens, 0.0, bucket_); }

  double rate_at(double t) const {
    double rate = segments_.front().rate_bps;
    for (const auto& s : segments_) {
      if (s.start_s <= t) rate = s.rate_bps;
      else break;
    }
    return rate;
  }

  /// Bytes the link can carry in [t0, t1].
  double capacity_between(double t0, double t1) const {
    if (t1 <= t0) return 0.0;
    double total = 0.0;
    for (std::size_t i = 0; i < segments_.size(); ++i) {
      const double seg_start = i == 0 ? -std::numeric_limits<double>::infinity() : segments_[i].start_s;
      const double seg_end =
          i + 1 < segments_.size() ? segments_[i + 1].start_s : std::numeric_limits<double>::infinity();
      const double a = std::max(t0, seg_start), b = std::min(t1, seg_end);
      if (b > a) total += (b - a) * segments_[i].rate_bps;
    }
    return total;
  }

  /// Refills the bucket up to `now`. Time never runs backwards.
  void advance(double now) {
    if (now <= last_) return;
    tokens_ = std::min(bucket_, tokens_ + capacity_between(last_, now));
    last_ = now;
  }

  /// Completion time of a `bytes`-sized transfer that starts at `now`.
  double deliver(double bytes, double now) {
    if (!(bytes > 0.0)) throw Error(ErrorKind::InvalidArgument, "transfer size must be positive");
    advance(now);
    const double start = std::max(now, last_);
    if (tokens_ >= bytes) {
      tokens_ -= bytes;
      last_ = start;
      return start;
    }
    double remaining = bytes - tokens_;
    tokens_ = 0.0;
    double t = start;
    for (std::size_t i = 0; i < segments_.size(); ++i) {
      const double seg_end =
          i + 1 < segments_.size() ? segments_[i + 1].start_s : std::numeric_limits<double>::infinity();
      if (seg_end <= t) continue;
      const double rate = segments_[i].rate_bps;
      const double can = (seg_end - t) * rate;
      if (can >= remaining) {
        t += remaining / rate;
        remaining = 0.0;
        break;
      }
      remaining -= can;
      t = seg_end;
    }
    last_ = t;
    return t;
  }

 private:
  void validate() const {
    if (!(bucket_ >= 0.0)) throw Error(ErrorKind::InvalidArgument, "bucket must be non-negative");
    for (const auto& s : segments_) {
      if (!(s.rate_bps > 0.0)) throw Error(ErrorKind::InvalidArgument, "rates must be positive");
    }
  }

  std::vector<Segment> segments_;
  double bucket_;
  double tokens_;
  double last_ = 0.0;
};

}  // namespace splatstream
