#pragma once

#include <array>
#include <vector>

#include "atlas/geometry.hpp"

namespace atlas {

struct BearingPointPair {
  Eigen::Vector3d bearing;  // unit vector in the camera frame
  Eigen::Vector3d point;    // world frame
};

// Three-point resection (Grunert). Returns up to four camera poses
// (world <- camera) whose reprojections hit all three bearings within
// 1e-9 rad. Throws DegenerateConfiguration for collinear points or
// coincident bearings.
std::vector<RigidTransform> p3p_minimal(const std::array<BearingPointPair, 3>& obs);

}  // namespace atlas
