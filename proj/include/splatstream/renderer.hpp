#pragma once

#include <splatstream/camera.hpp>
#include <splatstream/error.hpp>
#include <splatstream/gaussians.hpp>
#include <splatstream/image.hpp>
#include <splatstream/ladder.hpp>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <vector>

namespace splatstream {

/// Added to both diagonal terms of every projected covariance (px^2).
inline constexpr double kCovarianceFloor = 0.3;
inline constexpr float kMaxAlpha = 0.99f;
/// A pixel stops accepting splats once its transmittance drops below this.
inline constexpr float kTransmittanceFloor = 1e-4f;
/// Splat footprints end where opacity * falloff drops below this.
inline constexpr double kAlphaFloor = 1e-4;

struct Rgb {
  float r = 0.0f, g = 0.0f, b = 0.0f;
  float operator[](int c) const { return c == 0 ? r : (c == 1 ? g : b); }
  friend bool operator==(const Rgb&, const Rgb&) = default;
};

struct RenderOptions {
  Rgb background{};
  bool frustum_culling = true;
  int sh_degree = 0;
};

struct ScreenSplat {
  double u = 0.0, v = 0.0;                     // mean in pixels
  double cov_xx = 0.0, cov_xy = 0.0, cov_yy = 0.0;
  double depth = 0.0;
  std::array<float, 3> color{};
  float opacity = 0.0f;
  // inverse covariance, evaluated per pixel
  float conic_a = 0.0f, conic_b = 0.0f, conic_c = 0.0f;
  // inclusive pixel bounds of the footprint, clipped to the image
  int x0 = 0, x1 = -1, y0 = 0, y1 = -1;
  std::uint32_t index = 0;
};

struct RenderStats {
  double render_ms = 0.0;
  std::size_t splats_drawn = 0;
  std::size_t splats_culled = 0;
};

/// Float RGB plus accumulated alpha, row-major.
struct Framebuffer {
  int width = 0;
  int height = 0;
  std::vector<float> rgb;
  std::vector<float> alpha;

  Framebuffer() = default;
  Framebuffer(int w, int h)
      : width(w), height(h), rgb(static_cast<std::size_t>(w) * h * 3, 0.0f),
        alpha(static_cast<std::size_t>(w) * h, 0.0f) {}

  const float* pixel(int x, int y) const { return &rgb[(static_cast<std::size_t>(y) * width + x) * 3]; }

  friend bool operator==(const Framebuffer&, const Framebuffer&) = default;
};

namespace detail {

inline Mat3 quaternion_to_matrix(const float* q) {
  const double w = q[0], x = q[1], y = q[2], z = q[3];
  return {{{1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)},
           {2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)},
           {2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)}}};
}

// Real SH basis constants for bands 1-3, in the order used by 3DGS exports.
inline constexpr double kShC1 = 0.4886025119029199;
inline constexpr std::array<double, 5> kShC2 = {1.0925484305920792, -1.0925484305920792, 0.31539156525252005,
                                                -1.0925484305920792, 0.5462742152960396};
inline constexpr std::array<double, 7> kShC3 = {-0.5900435899266435, 2.890611442640554, -0.4570457994644658,
                                                0.3731763325901154,  -0.4570457994644658, 1.445305721320277,
                                                -0.5900435899266435};

inline std::array<float, 3> eval_sh(const ActivatedPrimitives& p, std::size_t i, int degree, Vec3 dir) {
  const float* sh = &p.sh_coeffs[i * kShCoeffs * 3];
  auto coeff = [sh](int k, int c) { return static_cast<double>(sh[k * 3 + c]); };
  std::array<float, 3> out{};
  const double x = dir.x, y = dir.y, z = dir.z;
  const double xx = x * x, yy = y * y, zz = z * z, xy = x * y, yz = y * z, xz = x * z;
  for (int c = 0; c < 3; ++c) {
    double r = kShC0 * coeff(0, c);
    if (degree >= 1) {
      r += -kShC1 * y * coeff(1, c) + kShC1 * z * coeff(2, c) - kShC1 * x * coeff(3, c);
    }
    if (degree >= 2) {
      r += kShC2[0] * xy * coeff(4, c) + kShC2[1] * yz * coeff(5, c) +
           kShC2[2] * (2 * zz - xx - yy) * coeff(6, c) + kShC2[3] * xz * coeff(7, c) +
           kShC2[4] * (xx - yy) * coeff(8, c);
    }
    if (degree >= 3) {
      r += kShC3[0] * y * (3 * xx - yy) * coeff(9, c) + kShC3[1] * xy * z * coeff(10, c) +
           kShC3[2] * y * (4 * zz - xx - yy) * coeff(11, c) +
           kShC3[3] * z * (2 * zz - 3 * xx - 3 * yy) * coeff(12, c) +
           kShC3[4] * x * (4 * zz - xx - yy) * coeff(13, c) + kShC3[5] * z * (xx - yy) * coeff(14, c) +
           kShC3[6] * x * (xx - 3 * yy) * coeff(15, c);
    }
    out[static_cast<std::size_t>(c)] = static_cast<float>(std::clamp(r + 0.5, 0.0, 1.0));
  }
  return out;
}

}  // namespace detail

/// Mahalanobis radius at which a splat of the given opacity falls below
/// kAlphaFloor. Zero for splats that never reach it.
inline double footprint_radius(double opacity) {
  if (opacity <= kAlphaFloor) return 0.0;
  return std::sqrt(2.0 * std::log(opacity / kAlphaFloor));
}

/// EWA projection of every Gaussian into screen space. Splats at or behind
/// the near plane are always dropped; with frustum culling on, so are splats
/// whose footprint misses the image.
inline std::vector<ScreenSplat> project_gaussians(const ActivatedPrimitives& prims, const ViewTransform& view,
                                                  const Intrinsics& k, const RenderOptions& options = {},
                                                  RenderStats* stats = nullptr) {
  std::vector<ScreenSplat> out;
  out.reserve(prims.count);
  const Mat3 w = transpose(view.rotation);
  std::size_t culled = 0;

  for (std::size_t i = 0; i < prims.count; ++i) {
    const Vec3 mean{prims.means[i * 3], prims.means[i * 3 + 1], prims.means[i * 3 + 2]};
    const Vec3 pc = view.to_camera(mean);
    if (!(pc.z > kNearPlane)) {
      ++culled;
      continue;
    }
    const double opacity = prims.opacities[i];
    const double radius = footprint_radius(opacity);
    if (radius == 0.0 && options.frustum_culling) {
      ++culled;
      continue;
    }

    // M = W * R_q * diag(s); camera-space covariance is M M^T
    const Mat3 rq = detail::quaternion_to_matrix(&prims.rotations[i * 4]);
    Mat3 m = w * rq;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) m[r][c] *= prims.scales[i * 3 + c];
    Mat3 cov{};
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) cov[r][c] = m[r][0] * m[c][0] + m[r][1] * m[c][1] + m[r][2] * m[c][2];

    const double iz = 1.0 / pc.z;
    const double j00 = k.fx * iz, j02 = -k.fx * pc.x * iz * iz;
    const double j11 = k.fy * iz, j12 = -k.fy * pc.y * iz * iz;
    // rows of J * cov
    const double a0 = j00 * cov[0][0] + j02 * cov[2][0];
    const double a1 = j00 * cov[0][1] + j02 * cov[2][1];
    const double a2 = j00 * cov[0][2] + j02 * cov[2][2];
    const double b1 = j11 * cov[1][1] + j12 * cov[2][1];
    const double b2 = j11 * cov[1][2] + j12 * cov[2][2];

    ScreenSplat s;
    s.cov_xx = a0 * j00 + a2 * j02 + kCovarianceFloor;
    s.cov_xy = a1 * j11 + a2 * j12;
    s.cov_yy = b1 * j11 + b2 * j12 + kCovarianceFloor;
    s.u = k.fx * pc.x * iz + k.cx;
    s.v = k.fy * pc.y * iz + k.cy;
    s.depth = pc.z;
    s.opacity = static_cast<float>(opacity);
    s.index = static_cast<std::uint32_t>(i);

    const double det = s.cov_xx * s.cov_yy - s.cov_xy * s.cov_xy;
    s.conic_a = static_cast<float>(s.cov_yy / det);
    s.conic_b = static_cast<float>(-s.cov_xy / det);
    s.conic_c = static_cast<float>(s.cov_xx / det);

    // tight axis-aligned bounds of the footprint ellipse; pixel centers sit at i + 0.5
    const double hw = radius * std::sqrt(s.cov_xx);
    const double hh = radius * std::sqrt(s.cov_yy);
    const double fx0 = std::ceil(s.u - hw - 0.5), fx1 = std::floor(s.u + hw - 0.5);
    const double fy0 = std::ceil(s.v - hh - 0.5), fy1 = std::floor(s.v + hh - 0.5);
    const bool misses = fx1 < 0 || fy1 < 0 || fx0 > k.width - 1 || fy0 > k.height - 1 || fx0 > fx1 || fy0 > fy1;
    if (misses) {
      if (options.frustum_culling) {
        ++culled;
        continue;
      }
      s.x0 = 0, s.x1 = -1, s.y0 = 0, s.y1 = -1;
    } else {
      s.x0 = static_cast<int>(std::max(0.0, fx0));
      s.x1 = static_cast<int>(std::min<double>(k.width - 1, fx1));
      s.y0 = static_cast<int>(std::max(0.0, fy0));
      s.y1 = static_cast<int>(std::min<double>(k.height - 1, fy1));
    }

    if (options.sh_degree > 0) {
      const Vec3 d = mean - view.camera_center;
      const double len = std::sqrt(d.x * d.x + d.y * d.y + d.z * d.z);
      s.color = detail::eval_sh(prims, i, std::min(options.sh_degree, 3), (1.0 / len) * d);
    } else {
      for (int c = 0; c < 3; ++c) s.color[static_cast<std::size_t>(c)] = prims.colors_dc[i * 3 + c];
    }
    out.push_back(s);
  }
  if (stats) {
    stats->splats_drawn = out.size();
    stats->splats_culled = culled;
  }
  return out;
}

/// Stable ascending depth order.
inline void sort_splats(std::vector<ScreenSplat>& splats) {
  std::stable_sort(splats.begin(), splats.end(),
                   [](const ScreenSplat& a, const ScreenSplat& b) { return a.depth < b.depth; });
}

inline constexpr int kTileSize = 16;

/// Front-to-back compositing of depth-sorted splats. Each splat only visits
/// pixels inside its footprint ellipse; a pixel is finished once its
/// transmittance drops under kTransmittanceFloor, and 16x16 tiles whose
/// pixels are all finished are skipped.
inline Framebuffer rasterize(const std::vector<ScreenSplat>& splats, int width, int height, Rgb background = {}) {
  if (width <= 0 || height <= 0) throw Error(ErrorKind::InvalidArgument, "framebuffer size must be positive");
  Framebuffer fb(width, height);
  std::vector<float> transmittance(static_cast<std::size_t>(width) * height, 1.0f);
  const int tiles_x = (width + kTileSize - 1) / kTileSize;
  const int tiles_y = (height + kTileSize - 1) / kTileSize;
  std::vector<int> live(static_cast<std::size_t>(tiles_x) * tiles_y);
  for (int ty = 0; ty < tiles_y; ++ty)
    for (int tx = 0; tx < tiles_x; ++tx) {
      live[static_cast<std::size_t>(ty) * tiles_x + tx] =
          (std::min(width, (tx + 1) * kTileSize) - tx * kTileSize) * (std::min(height, (ty + 1) * kTileSize) - ty * kTileSize);
    }

  for (const auto& s : splats) {
    if (s.x0 > s.x1 || s.y0 > s.y1) continue;
    const double mu = s.u, mv = s.v;
    // pixels with a*dx^2 + 2b*dx*dy + c*dy^2 > r^2 fall under kAlphaFloor
    const double r = footprint_radius(s.opacity);
    const double r2 = r * r;
    const double ca = s.conic_a, cb = s.conic_b, cc = s.conic_c;
    for (int ty = s.y0 / kTileSize; ty <= s.y1 / kTileSize; ++ty) {
      const int ya = std::max(s.y0, ty * kTileSize), yb = std::min(s.y1, ty * kTileSize + kTileSize - 1);
      for (int tx = s.x0 / kTileSize; tx <= s.x1 / kTileSize; ++tx) {
        int& tile_live = live[static_cast<std::size_t>(ty) * tiles_x + tx];
        if (tile_live == 0) continue;
        const int xa = std::max(s.x0, tx * kTileSize), xb = std::min(s.x1, tx * kTileSize + kTileSize - 1);
        for (int y = ya; y <= yb; ++y) {
          const double dyd = (y + 0.5) - mv;
          // span of the ellipse on this row, padded by a pixel against rounding
          const double disc = cb * cb * dyd * dyd - ca * (cc * dyd * dyd - r2);
          if (disc < 0.0) continue;
          const double sq = std::sqrt(disc);
          const double lo = mu + (-cb * dyd - sq) / ca - 0.5, hi = mu + (-cb * dyd + sq) / ca - 0.5;
          const int x_lo = std::max(xa, static_cast<int>(std::floor(lo))), x_hi = std::min(xb, static_cast<int>(std::ceil(hi)));
          const float dy = static_cast<float>(dyd);
          const std::size_t row = static_cast<std::size_t>(y) * width;
          for (int x = x_lo; x <= x_hi; ++x) {
            float& t = transmittance[row + x];
            if (t < kTransmittanceFloor) continue;
            const float dx = (static_cast<float>(x) + 0.5f) - static_cast<float>(mu);
            const float power = -0.5f * (s.conic_a * dx * dx + 2.0f * s.conic_b * dx * dy + s.conic_c * dy * dy);
            const float alpha = std::min(kMaxAlpha, s.opacity * std::exp(power));
            float* px = &fb.rgb[(row + x) * 3];
            const float w = t * alpha;
            px[0] += w * s.color[0];
            px[1] += w * s.color[1];
            px[2] += w * s.color[2];
            t *= 1.0f - alpha;
            if (t < kTransmittanceFloor) --tile_live;
          }
        }
      }
    }
  }

  for (std::size_t i = 0; i < transmittance.size(); ++i) {
    const float t = transmittance[i];
    for (int c = 0; c < 3; ++c) fb.rgb[i * 3 + c] = std::clamp(fb.rgb[i * 3 + c] + t * background[c], 0.0f, 1.0f);
    fb.alpha[i] = std::clamp(1.0f - t, 0.0f, 1.0f);
  }
  return fb;
}

inline Image to_image(const Framebuffer& fb) {
  Image img(fb.width, fb.height);
  for (std::size_t i = 0; i < fb.rgb.size(); ++i) {
    img.rgb[i] = static_cast<std::uint8_t>(std::lround(std::clamp(fb.rgb[i], 0.0f, 1.0f) * 255.0f));
  }
  return img;
}

inline std::vector<std::uint8_t> encode_jpeg(const Framebuffer& fb, int quality) {
  if (fb.width <= 0 || fb.height <= 0) throw Error(ErrorKind::EncodeFailure, "zero-dimension framebuffer");
  return encode_jpeg(to_image(fb), quality);
}

/// project -> sort -> rasterize at the intrinsics' resolution.
inline Framebuffer render_framebuffer(const ActivatedPrimitives& prims, const CameraPose& pose, const Intrinsics& k,
                                      const RenderOptions& options = {}, RenderStats* stats = nullptr) {
  if (!k.valid()) throw Error(ErrorKind::InvalidArgument, "invalid intrinsics");
  const auto view = world_to_camera(pose);
  auto splats = project_gaussians(prims, view, k, options, stats);
  sort_splats(splats);
  return rasterize(splats, k.width, k.height, options.background);
}

struct RenderResult {
  std::vector<std::uint8_t> jpeg;
  RenderStats stats;
  Intrinsics intrinsics;
};

/// Renders at the profile's resolution (intrinsics rescaled from the base
/// resolution) and encodes at the profile's JPEG quality.
inline RenderResult render_view(const ActivatedPrimitives& prims, const CameraPose& pose, const Intrinsics& base,
                                const QualityProfile& profile, const RenderOptions& options = {}) {
  const auto start = std::chrono::steady_clock::now();
  RenderResult result;
  result.intrinsics = scale_intrinsics(base, profile.width, profile.height);
  const auto fb = render_framebuffer(prims, pose, result.intrinsics, options, &result.stats);
  result.jpeg = encode_jpeg(fb, profile.jpeg_quality);
  result.stats.render_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return result;
}

}  // namespace splatstream
