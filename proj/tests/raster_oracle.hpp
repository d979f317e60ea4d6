#pragma once

// Brute-force compositing oracle: every splat is evaluated at every pixel,
// with no footprint bounds and no early termination.

// Eigen goes first: <resolv.h>, pulled in by the HTTP layer, defines _res.
#include <Eigen/Dense>
#include <Eigen/Geometry>

#include <splatstream/splatstream.hpp>

#include <algorithm>
#include <numeric>
#include <vector>

namespace test {

struct OracleSplat {
  double depth;
  Eigen::Vector2d mean;
  Eigen::Matrix2d conic;
  double opacity;
  Eigen::Vector3d color;
};

inline std::vector<OracleSplat> oracle_splats(const splatstream::ActivatedPrimitives& p,
                                              const splatstream::CameraPose& pose, const splatstream::Intrinsics& k) {
  const Eigen::Matrix3d r = (Eigen::AngleAxisd(pose.azimuth, Eigen::Vector3d::UnitY()) *
                             Eigen::AngleAxisd(pose.elevation, Eigen::Vector3d::UnitX()))
                                .toRotationMatrix();
  const Eigen::Vector3d t(pose.translation.x, pose.translation.y, pose.translation.z);
  std::vector<OracleSplat> out;
  for (std::size_t i = 0; i < p.count; ++i) {
    const Eigen::Vector3d m(p.means[i * 3], p.means[i * 3 + 1], p.means[i * 3 + 2]);
    const Eigen::Vector3d pc = r.transpose() * (m - t);
    if (pc.z() <= splatstream::kNearPlane) continue;
    const Eigen::Quaterniond q(p.rotations[i * 4], p.rotations[i * 4 + 1], p.rotations[i * 4 + 2],
                               p.rotations[i * 4 + 3]);
    const Eigen::Vector3d s(p.scales[i * 3], p.scales[i * 3 + 1], p.scales[i * 3 + 2]);
    const Eigen::Matrix3d rs = q.toRotationMatrix() * s.asDiagonal();
    const Eigen::Matrix3d cov_world = rs * rs.transpose();
    const Eigen::Matrix3d cov_cam = r.transpose() * cov_world * r;
    Eigen::Matrix<double, 2, 3> j;
    j << k.fx / pc.z(), 0, -k.fx * pc.x() / (pc.z() * pc.z()), 0, k.fy / pc.z(), -k.fy * pc.y() / (pc.z() * pc.z());
    Eigen::Matrix2d cov2 = j * cov_cam * j.transpose();
    cov2 += splatstream::kCovarianceFloor * Eigen::Matrix2d::Identity();
    OracleSplat o;
    o.depth = pc.z();
    o.mean = {k.fx * pc.x() / pc.z() + k.cx, k.fy * pc.y() / pc.z() + k.cy};
    o.conic = cov2.inverse();
    o.opacity = p.opacities[i];
    o.color = {p.colors_dc[i * 3], p.colors_dc[i * 3 + 1], p.colors_dc[i * 3 + 2]};
    out.push_back(o);
  }
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.depth < b.depth; });
  return out;
}

/// Row-major RGB in [0, 1].
inline std::vector<double> oracle_render(const splatstream::ActivatedPrimitives& p,
                                         const splatstream::CameraPose& pose, const splatstream::Intrinsics& k,
                                         const Eigen::Vector3d& background = Eigen::Vector3d::Zero()) {
  const auto splats = oracle_splats(p, pose, k);
  std::vector<double> img(static_cast<std::size_t>(k.width) * k.height * 3);
  for (int y = 0; y < k.height; ++y)
    for (int x = 0; x < k.width; ++x) {
      const Eigen::Vector2d px(x + 0.5, y + 0.5);
      Eigen::Vector3d c = Eigen::Vector3d::Zero();
      double tr = 1.0;
      for (const auto& s : splats) {
        const Eigen::Vector2d d = px - s.mean;
        const double alpha = std::min(0.99, s.opacity * std::exp(-0.5 * d.dot(s.conic * d)));
        c += tr * alpha * s.color;
        tr *= 1.0 - alpha;
      }
      c += tr * background;
      for (int ch = 0; ch < 3; ++ch) img[(static_cast<std::size_t>(y) * k.width + x) * 3 + ch] = c[ch];
    }
  return img;
}

}  // namespace test
