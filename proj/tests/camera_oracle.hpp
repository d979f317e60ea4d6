#pragma once

// Independent projection oracle: explicit homogeneous matrices in Eigen.

#include <Eigen/Dense>
#include <Eigen/Geometry>

namespace test {

inline Eigen::Matrix4d camera_to_world(double azimuth, double elevation, const Eigen::Vector3d& t) {
  const Eigen::Matrix3d r = (Eigen::AngleAxisd(azimuth, Eigen::Vector3d::UnitY()) *
                             Eigen::AngleAxisd(elevation, Eigen::Vector3d::UnitX()))
                                .toRotationMatrix();
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = r;
  m.topRightCorner<3, 1>() = t;
  return m;
}

/// (u, v, depth) of a world point through P = K [I | 0] inverse(camera_to_world).
inline Eigen::Vector3d oracle_project(double azimuth, double elevation, const Eigen::Vector3d& t,
                                      const Eigen::Vector3d& p, double fx, double fy, double cx, double cy) {
  const Eigen::Matrix4d view = camera_to_world(azimuth, elevation, t).inverse();
  const Eigen::Vector4d pc = view * p.homogeneous();
  Eigen::Matrix3d k;
  k << fx, 0, cx, 0, fy, cy, 0, 0, 1;
  const Eigen::Vector3d uvw = k * pc.head<3>();
  return {uvw.x() / uvw.z(), uvw.y() / uvw.z(), pc.z()};
}

}  // namespace test
