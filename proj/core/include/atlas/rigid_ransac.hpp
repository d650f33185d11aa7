#pragma once

#include <cstdint>
#include <vector>

#include "atlas/geometry.hpp"

namespace atlas {

struct PointCorrespondence {
  Eigen::Vector3d target;  // point in the frame we map INTO
  Eigen::Vector3d source;  // point in the frame we map FROM
};

struct RansacConfig {
  double inlier_radius_m = 0.2;
  int min_inliers = 15;
  int max_iterations = 2000;
  double success_probability = 0.99;
  std::uint64_t seed = 7;
};

struct AlignmentResult {
  RigidTransform transform;  // target <- source
  int inlier_count = 0;
  int total_matches = 0;
  std::vector<int> inlier_indices;
};

// Closed-form least-squares rigid fit (orthogonal alignment, no scale) so
// that target ~= T * source. Throws InsufficientCorrespondences (< 3 pairs)
// and DegenerateConfiguration (rank-deficient cross-covariance).
RigidTransform fit_rigid_transform(const std::vector<Eigen::Vector3d>& source,
                                   const std::vector<Eigen::Vector3d>& target);

// Seeded RANSAC over minimal 3-point fits; the winning model is refit on all
// inliers. The iteration count adapts with the standard inlier-probability
// formula. Throws InsufficientCorrespondences, NoConsensus.
AlignmentResult estimate_rigid_transform_ransac(
    const std::vector<PointCorrespondence>& correspondences,
    const RansacConfig& config);

}  // namespace atlas
