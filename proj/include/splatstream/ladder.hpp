#pragma once

#include <splatstream/error.hpp>

#include <algorithm>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

namespace splatstream {

/// One rung of the bitrate ladder. Level 0 is the best quality.
struct QualityProfile {
  int level = 0;
  int width = 0;
  int height = 0;
  int jpeg_quality = 0;
  double expected_size_bytes = 0.0;

  friend bool operator==(const QualityProfile&, const QualityProfile&) = default;
};

inline constexpr double kMinExpectedSize = 1024.0;

/// Ordered rungs, best first.
class BitrateLadder {
 public:
  BitrateLadder() : BitrateLadder(defaults()) {}

  explicit BitrateLadder(std::vector<QualityProfile> rungs) : rungs_(std::move(rungs)) {
    if (rungs_.size() < 2) throw Error(ErrorKind::InvalidArgument, "ladder needs at least two rungs");
    for (std::size_t i = 0; i < rungs_.size(); ++i) {
      auto& r = rungs_[i];
      r.level = static_cast<int>(i);
      if (r.width <= 0 || r.height <= 0 || r.jpeg_quality < 1 || r.jpeg_quality > 100 ||
          !(r.expected_size_bytes > 0)) {
        throw Error(ErrorKind::InvalidArgument, "invalid rung " + std::to_string(i));
      }
      if (i > 0) {
        const auto& better = rungs_[i - 1];
        if (r.width * r.height >= better.width * better.height ||
            r.expected_size_bytes >= better.expected_size_bytes) {
          throw Error(ErrorKind::InvalidArgument,
                      "rung " + std::to_string(i) + " must be smaller than rung " + std::to_string(i - 1));
        }
      }
    }
  }

  /// Four rungs: 1280x720 q90, 960x540 q65, 640x360 q35, 320x180 q10, with
  /// expected sizes at the midpoints of 180-300, 50-60, 18-22 and 6-8 KB.
  static std::vector<QualityProfile> defaults() {
    return {{0, 1280, 720, 90, 240'000.0},
            {1, 960, 540, 65, 55'000.0},
            {2, 640, 360, 35, 20'000.0},
            {3, 320, 180, 10, 7'000.0}};
  }

  std::size_t size() const { return rungs_.size(); }
  int worst_level() const { return static_cast<int>(rungs_.size()) - 1; }
  const QualityProfile& operator[](int level) const { return rungs_.at(static_cast<std::size_t>(level)); }
  const std::vector<QualityProfile>& rungs() const { return rungs_; }

  /// Per-rung EMA of observed frame sizes: 0.8 old + 0.2 observed, floored at 1 KB.
  void update_expected_size(int level, double observed_bytes) {
    if (level < 0 || level > worst_level()) throw Error(ErrorKind::InvalidArgument, "level out of range");
    if (!(observed_bytes > 0)) throw Error(ErrorKind::InvalidArgument, "observed size must be positive");
    auto& r = rungs_[static_cast<std::size_t>(level)];
    r.expected_size_bytes = std::max(kMinExpectedSize, 0.8 * r.expected_size_bytes + 0.2 * observed_bytes);
  }

  nlohmann::json to_json() const {
    auto rungs = nlohmann::json::array();
    for (const auto& r : rungs_) {
      rungs.push_back({{"width", r.width},
                       {"height", r.height},
                       {"jpeg_quality", r.jpeg_quality},
                       {"expected_kb", r.expected_size_bytes / 1000.0}});
    }
    return {{"rungs", rungs}};
  }

  /// Accepts {"rungs": [{width, height, jpeg_quality, expected_kb}, ...]}, best first.
  static BitrateLadder from_json(const nlohmann::json& j) {
    std::vector<QualityProfile> rungs;
    try {
      for (const auto& r : j.at("rungs")) {
        QualityProfile p;
        p.width = r.at("width").get<int>();
        p.height = r.at("height").get<int>();
        p.jpeg_quality = r.at("jpeg_quality").get<int>();
        p.expected_size_bytes = r.at("expected_kb").get<double>() * 1000.0;
        rungs.push_back(p);
      }
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::ParseError, std::string("ladder config: ") + e.what());
    }
    return BitrateLadder(std::move(rungs));
  }

  static BitrateLadder load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::IoError, "cannot open ladder file " + path.string());
    try {
      return from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorKind::ParseError, std::string("ladder config: ") + e.what());
    }
  }

 private:
  std::vector<QualityProfile> rungs_;
};

}  // namespace splatstream
