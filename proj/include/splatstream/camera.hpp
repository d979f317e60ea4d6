#pragma once

#include <splatstream/error.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>

namespace splatstream {

struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;

  friend Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
  friend Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
  friend Vec3 operator*(double s, Vec3 a) { return {s * a.x, s * a.y, s * a.z}; }
  friend bool operator==(const Vec3&, const Vec3&) = default;
  double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }
};

using Mat3 = std::array<std::array<double, 3>, 3>;
using Mat4 = std::array<std::array<double, 4>, 4>;

inline Mat3 operator*(const Mat3& a, const Mat3& b) {
  Mat3 r{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k) r[i][j] += a[i][k] * b[k][j];
  return r;
}

inline Vec3 operator*(const Mat3& m, Vec3 v) {
  return {m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
          m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
          m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z};
}

inline Mat3 transpose(const Mat3& m) {
  Mat3 t{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) t[i][j] = m[j][i];
  return t;
}

inline constexpr double kElevationEpsilon = 1e-4;
inline constexpr double kNearPlane = 0.01;

inline double clamp_elevation(double elevation) {
  constexpr double limit = std::numbers::pi / 2 - kElevationEpsilon;
  return std::clamp(elevation, -limit, limit);
}

inline double deg_to_rad(double deg) { return deg * std::numbers::pi / 180.0; }
inline double rad_to_deg(double rad) { return rad * 180.0 / std::numbers::pi; }

/// Yaw/pitch/translation camera pose; angles in radians.
struct CameraPose {
  double azimuth = 0.0;
  double elevation = 0.0;
  Vec3 translation{};

  static CameraPose make(double azimuth, double elevation, Vec3 translation) {
    if (!std::isfinite(azimuth) || !std::isfinite(elevation) || !std::isfinite(translation.x) ||
        !std::isfinite(translation.y) || !std::isfinite(translation.z)) {
      throw Error(ErrorKind::InvalidArgument, "camera pose must be finite");
    }
    return {azimuth, clamp_elevation(elevation), translation};
  }

  /// Wire format uses degrees.
  static CameraPose from_degrees(double azimuth_deg, double elevation_deg, Vec3 translation) {
    return make(deg_to_rad(azimuth_deg), deg_to_rad(elevation_deg), translation);
  }

  friend bool operator==(const CameraPose&, const CameraPose&) = default;
};

/// Pinhole intrinsics in pixels.
struct Intrinsics {
  double fx = 1.0, fy = 1.0;
  double cx = 0.0, cy = 0.0;
  int width = 1, height = 1;

  bool valid() const {
    return fx > 0 && fy > 0 && width > 0 && height > 0 && cx >= 0 && cx <= width && cy >= 0 &&
           cy <= height && std::isfinite(fx) && std::isfinite(fy);
  }

  double horizontal_fov() const { return 2.0 * std::atan(width / (2.0 * fx)); }
  double vertical_fov() const { return 2.0 * std::atan(height / (2.0 * fy)); }

  /// Square pixels, principal point at the image center.
  static Intrinsics from_hfov(int width, int height, double hfov_rad) {
    const double f = width / (2.0 * std::tan(hfov_rad / 2.0));
    return {f, f, width / 2.0, height / 2.0, width, height};
  }

  friend bool operator==(const Intrinsics&, const Intrinsics&) = default;
};

struct ViewTransform {
  Mat3 rotation{};        // camera-to-world rotation R
  Mat4 world_to_camera{}; // [R^T, -R^T t; 0, 1]
  Vec3 camera_center{};   // t

  /// p_c = R^T (p - t). Subtracting first keeps the result independent of
  /// a shared offset applied to both the point and the camera.
  Vec3 to_camera(Vec3 p) const {
    const Vec3 d = p - camera_center;
    return {rotation[0][0] * d.x + rotation[1][0] * d.y + rotation[2][0] * d.z,
            rotation[0][1] * d.x + rotation[1][1] * d.y + rotation[2][1] * d.z,
            rotation[0][2] * d.x + rotation[1][2] * d.y + rotation[2][2] * d.z};
  }
};

/// R = R_y(azimuth) * R_x(elevation). Camera looks down +z, x right, y down,
/// so the world-space forward vector is
/// (sin az cos el, -sin el, cos az cos el).
inline Mat3 rotation_from_angles(double azimuth, double elevation) {
  const double ca = std::cos(azimuth), sa = std::sin(azimuth);
  const double ce = std::cos(elevation), se = std::sin(elevation);
  const Mat3 ry{{{ca, 0, sa}, {0, 1, 0}, {-sa, 0, ca}}};
  const Mat3 rx{{{1, 0, 0}, {0, ce, -se}, {0, se, ce}}};
  return ry * rx;
}

inline ViewTransform world_to_camera(const CameraPose& pose) {
  ViewTransform v;
  v.rotation = rotation_from_angles(pose.azimuth, pose.elevation);
  v.camera_center = pose.translation;
  const Mat3 rt = transpose(v.rotation);
  const Vec3 trans = rt * pose.translation;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) v.world_to_camera[i][j] = rt[i][j];
    v.world_to_camera[i][3] = -trans[i];
  }
  v.world_to_camera[3] = {0.0, 0.0, 0.0, 1.0};
  return v;
}

struct PixelProjection {
  double u = 0.0;
  double v = 0.0;
  double depth = 0.0;
};

/// Returns nullopt when the point is at or behind the near plane.
inline std::optional<PixelProjection> project(Vec3 point, const ViewTransform& view, const Intrinsics& k) {
  const Vec3 pc = view.to_camera(point);
  if (!(pc.z > kNearPlane)) return std::nullopt;
  return PixelProjection{k.fx * pc.x / pc.z + k.cx, k.fy * pc.y / pc.z + k.cy, pc.z};
}

/// Resizes the image while keeping the field of view and the relative
/// principal point fixed.
inline Intrinsics scale_intrinsics(const Intrinsics& k, int new_width, int new_height) {
  if (new_width <= 0 || new_height <= 0) {
    throw Error(ErrorKind::InvalidArgument, "target resolution must be positive");
  }
  if (new_width == k.width && new_height == k.height) return k;
  const double sx = static_cast<double>(new_width) / k.width;
  const double sy = static_cast<double>(new_height) / k.height;
  return {k.fx * sx, k.fy * sy, k.cx * sx, k.cy * sy, new_width, new_height};
}

enum class Motion { Forward, Backward, Left, Right, Up, Down, Yaw, Pitch };

/// Planar moves follow the current azimuth. Up/Down move along the image
/// up direction, which is world -y in this convention.
inline CameraPose move_relative(const CameraPose& pose, Motion motion, double step) {
  CameraPose out = pose;
  const double s = std::sin(pose.azimuth), c = std::cos(pose.azimuth);
  const Vec3 forward{s, 0.0, c};
  const Vec3 right{c, 0.0, -s};
  switch (motion) {
    case Motion::Forward: out.translation = pose.translation + step * forward; break;
    case Motion::Backward: out.translation = pose.translation - step * forward; break;
    case Motion::Right: out.translation = pose.translation + step * right; break;
    case Motion::Left: out.translation = pose.translation - step * right; break;
    case Motion::Up: out.translation.y = pose.translation.y - step; break;
    case Motion::Down: out.translation.y = pose.translation.y + step; break;
    case Motion::Yaw: out.azimuth = pose.azimuth + step; break;
    case Motion::Pitch: out.elevation = clamp_elevation(pose.elevation + step); break;
  }
  return out;
}

}  // namespace splatstream
