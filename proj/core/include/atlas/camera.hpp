#pragma once

#include <Eigen/Core>

#include "atlas/errors.hpp"
#include "atlas/geometry.hpp"

namespace atlas {

// Calibrated pinhole camera. T_body_camera maps camera-frame points into the
// body frame.
struct PinholeCamera {
  double fx = 400.0;
  double fy = 400.0;
  double cx = 320.0;
  double cy = 240.0;
  RigidTransform T_body_camera;

  // p_camera must have positive depth.
  Eigen::Vector2d project(const Eigen::Vector3d& p_camera) const {
    if (p_camera.z() <= 0.0) {
      throw BehindCamera("projection of point with non-positive depth");
    }
    return {fx * p_camera.x() / p_camera.z() + cx,
            fy * p_camera.y() / p_camera.z() + cy};
  }

  bool in_front(const Eigen::Vector3d& p_camera) const { return p_camera.z() > 0.0; }

  // Unit bearing in the camera frame for pixel (u, v).
  Eigen::Vector3d bearing(const Eigen::Vector2d& uv) const {
    return Eigen::Vector3d((uv.x() - cx) / fx, (uv.y() - cy) / fy, 1.0).normalized();
  }
};

}  // namespace atlas
