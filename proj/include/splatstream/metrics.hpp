#pragma once

#include <splatstream/camera.hpp>
#include <splatstream/error.hpp>
#include <splatstream/gaussians.hpp>
#include <splatstream/image.hpp>
#include <splatstream/ply.hpp>
#include <splatstream/renderer.hpp>
#include <splatstream/session.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <vector>

#include <json.hpp>

namespace splatstream {

inline constexpr double kPsnrCap = 100.0;

/// PSNR over all channels of two 8-bit images, capped at 100 dB.
inline double psnr(const Image& a, const Image& b) {
  if (a.width != b.width || a.height != b.height) throw Error(ErrorKind::DimensionMismatch, "psnr");
  if (a.empty()) throw Error(ErrorKind::TooSmall, "psnr of empty image");
  double sse = 0.0;
  for (std::size_t i = 0; i < a.rgb.size(); ++i) {
    const double d = static_cast<double>(a.rgb[i]) - b.rgb[i];
    sse += d * d;
  }
  if (sse == 0.0) return kPsnrCap;
  const double mse = sse / static_cast<double>(a.rgb.size());
  return std::min(kPsnrCap, 10.0 * std::log10(255.0 * 255.0 / mse));
}

/// BT.601 luma in [0, 255], unrounded.
inline std::vector<double> luma(const Image& img) {
  std::vector<double> y(static_cast<std::size_t>(img.width) * img.height);
  for (std::size_t i = 0; i < y.size(); ++i) {
    const auto* p = &img.rgb[i * 3];
    y[i] = 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2];
  }
  return y;
}

namespace detail {

inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;

inline std::array<double, kSsimWindow> ssim_kernel() {
  std::array<double, kSsimWindow> k{};
  double sum = 0.0;
  for (int i = 0; i < kSsimWindow; ++i) {
    const double x = i - kSsimWindow / 2;
    k[i] = std::exp(-(x * x) / (2 * kSsimSigma * kSsimSigma));
    sum += k[i];
  }
  for (auto& v : k) v /= sum;
  return k;
}

// Separable Gaussian filter over all fully-covered window positions.
inline std::vector<double> filter_valid(const std::vector<double>& src, int w, int h) {
  const auto k = ssim_kernel();
  const int ow = w - kSsimWindow + 1, oh = h - kSsimWindow + 1;
  std::vector<double> tmp(static_cast<std::size_t>(ow) * h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int i = 0; i < kSsimWindow; ++i) s += k[i] * src[static_cast<std::size_t>(y) * w + x + i];
      tmp[static_cast<std::size_t>(y) * ow + x] = s;
    }
  std::vector<double> out(static_cast<std::size_t>(ow) * oh);
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int i = 0; i < kSsimWindow; ++i) s += k[i] * tmp[static_cast<std::size_t>(y + i) * ow + x];
      out[static_cast<std::size_t>(y) * ow + x] = s;
    }
  return out;
}

}  // namespace detail

/// Mean SSIM on luma: 11x11 Gaussian window (sigma 1.5), K1 = 0.01,
/// K2 = 0.03, L = 255, averaged over every window that fits in the image.
inline double ssim(const Image& a, const Image& b) {
  if (a.width != b.width || a.height != b.height) throw Error(ErrorKind::DimensionMismatch, "ssim");
  if (a.width < detail::kSsimWindow || a.height < detail::kSsimWindow) {
    throw Error(ErrorKind::TooSmall, "ssim needs at least 11x11 pixels");
  }
  if (a == b) return 1.0;
  const int w = a.width, h = a.height;
  const auto x = luma(a), y = luma(b);
  std::vector<double> xx(x.size()), yy(x.size()), xy(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    xx[i] = x[i] * x[i];
    yy[i] = y[i] * y[i];
    xy[i] = x[i] * y[i];
  }
  const auto mx = detail::filter_valid(x, w, h), my = detail::filter_valid(y, w, h);
  const auto sxx = detail::filter_valid(xx, w, h), syy = detail::filter_valid(yy, w, h);
  const auto sxy = detail::filter_valid(xy, w, h);
  constexpr double c1 = (0.01 * 255) * (0.01 * 255);
  constexpr double c2 = (0.03 * 255) * (0.03 * 255);
  double total = 0.0;
  for (std::size_t i = 0; i < mx.size(); ++i) {
    const double vx = sxx[i] - mx[i] * mx[i];
    const double vy = syy[i] - my[i] * my[i];
    const double cov = sxy[i] - mx[i] * my[i];
    total += ((2 * mx[i] * my[i] + c1) * (2 * cov + c2)) /
             ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
  }
  return total / static_cast<double>(mx.size());
}

/// Lossless base-resolution renders of the logged poses at `indices`.
/// Profile-independent and byte-identical across calls.
inline std::vector<std::vector<std::uint8_t>> materialize_ground_truth(const ActivatedPrimitives& prims,
                                                                       const SessionLog& log,
                                                                       const std::vector<std::size_t>& indices,
                                                                       const RenderOptions& options = {}) {
  std::vector<std::vector<std::uint8_t>> out;
  out.reserve(indices.size());
  for (std::size_t idx : indices) {
    if (idx >= log.frames.size()) {
      throw Error(ErrorKind::IndexOutOfRange,
                  "sample index " + std::to_string(idx) + " beyond log of " + std::to_string(log.frames.size()));
    }
  }
  for (std::size_t idx : indices) {
    const auto& f = log.frames[idx];
    const auto pose = CameraPose::from_degrees(f.azimuth_deg, f.elevation_deg, {f.tx, f.ty, f.tz});
    out.push_back(encode_png(to_image(render_framebuffer(prims, pose, log.base, options))));
  }
  return out;
}

struct EvalTriplet {
  std::int64_t frame_id = 0;
  int level = 0;
  CameraPose pose{};
  double psnr = 0.0;
  double ssim = 0.0;
};

/// Compares a transmitted frame to ground truth after bilinear upscaling to
/// the ground-truth resolution.
inline EvalTriplet evaluate_frame(const Image& transmitted, const Image& ground_truth, int level,
                                  std::int64_t frame_id = 0, CameraPose pose = {}) {
  const Image up = resize_bilinear(transmitted, ground_truth.width, ground_truth.height);
  return {frame_id, level, pose, psnr(up, ground_truth), ssim(up, ground_truth)};
}

struct QualityStats {
  std::size_t count = 0;
  double mean_psnr = 0.0, min_psnr = 0.0;
  double mean_ssim = 0.0, min_ssim = 0.0;

  nlohmann::json to_json() const {
    return {{"count", count},
            {"mean_psnr", mean_psnr},
            {"min_psnr", min_psnr},
            {"mean_ssim", mean_ssim},
            {"min_ssim", min_ssim}};
  }
};

struct QualityReport {
  QualityStats overall;
  std::map<int, QualityStats> per_level;

  nlohmann::json to_json() const {
    nlohmann::json levels = nlohmann::json::object();
    for (const auto& [level, s] : per_level) levels[std::to_string(level)] = s.to_json();
    auto j = overall.to_json();
    j["per_level"] = levels;
    return j;
  }
};

namespace detail {

inline QualityStats accumulate_stats(const std::vector<const EvalTriplet*>& ts) {
  QualityStats s;
  s.count = ts.size();
  s.min_psnr = ts.front()->psnr;
  s.min_ssim = ts.front()->ssim;
  for (const auto* t : ts) {
    s.mean_psnr += t->psnr;
    s.mean_ssim += t->ssim;
    s.min_psnr = std::min(s.min_psnr, t->psnr);
    s.min_ssim = std::min(s.min_ssim, t->ssim);
  }
  s.mean_psnr /= static_cast<double>(ts.size());
  s.mean_ssim /= static_cast<double>(ts.size());
  return s;
}

}  // namespace detail

inline QualityReport aggregate_session(const std::vector<EvalTriplet>& triplets) {
  if (triplets.empty()) throw Error(ErrorKind::EmptyInput, "no triplets to aggregate");
  std::vector<const EvalTriplet*> all;
  std::map<int, std::vector<const EvalTriplet*>> groups;
  for (const auto& t : triplets) {
    all.push_back(&t);
    groups[t.level].push_back(&t);
  }
  QualityReport r;
  r.overall = detail::accumulate_stats(all);
  for (const auto& [level, ts] : groups) r.per_level[level] = detail::accumulate_stats(ts);
  return r;
}

/// Materializes ground truth for every sampled frame of a saved session,
/// writes it under `<session>/gt/`, and scores the transmitted samples.
inline std::vector<EvalTriplet> evaluate_session(const ActivatedPrimitives& prims, const std::filesystem::path& dir,
                                                 const RenderOptions& options = {}) {
  const SessionLog log = load_session(dir);
  std::vector<std::size_t> indices;
  for (std::size_t i = 0; i < log.frames.size(); ++i) {
    if (log.frames[i].ok && !log.frames[i].sample_file.empty()) indices.push_back(i);
  }
  const auto gts = materialize_ground_truth(prims, log, indices, options);
  std::filesystem::create_directories(dir / "gt");

  std::vector<EvalTriplet> out;
  for (std::size_t n = 0; n < indices.size(); ++n) {
    const auto& f = log.frames[indices[n]];
    const std::string png(gts[n].begin(), gts[n].end());
    detail::write_binary(dir / "gt" / (std::filesystem::path(f.sample_file).stem().string() + ".png"), png);
    const auto jpeg = read_file_bytes(dir / f.sample_file);
    const Image transmitted = decode_jpeg(std::span<const std::uint8_t>(jpeg));
    const Image gt = decode_png(std::span<const std::uint8_t>(gts[n]));
    out.push_back(evaluate_frame(transmitted, gt, f.level, f.frame_id,
                                 CameraPose::from_degrees(f.azimuth_deg, f.elevation_deg, {f.tx, f.ty, f.tz})));
  }
  return out;
}

}  // namespace splatstream
