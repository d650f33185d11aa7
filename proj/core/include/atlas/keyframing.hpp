#pragma once

#include <vector>

#include "atlas/map.hpp"

namespace atlas {

// Keyframe selection thresholds. A frame is kept as soon as ANY trigger
// fires relative to the last kept frame.
struct KeyframeCriteria {
  double max_translation_m = 0.25;
  double max_rotation_rad = 0.15;
  int max_consecutive_removed = 4;
  int min_coobserved_landmarks = 20;
  bool use_coobservation = true;
};

// Greedy forward scan over the mission chain; first and last vertex are
// always kept. Throws EmptyMission.
std::vector<VertexId> select_keyframes(const Mission& mission, const Map& map,
                                       const KeyframeCriteria& criteria);

// Number of landmarks observed by both vertices.
int coobserved_landmark_count(const Map& map, VertexId a, VertexId b);

// Deletes non-kept vertices and composes their odometry edges (covariances
// propagated to the composed frame and summed). Throws InvalidKeptSet.
void apply_keyframing(Map& map, MissionId mission_id,
                      const std::vector<VertexId>& kept);

// Convenience: select + apply over every mission; returns removed count.
std::size_t keyframe_map(Map& map, const KeyframeCriteria& criteria);

// First-order covariance composition for chained relative poses:
// cov(A∘B) = Ad(B⁻¹) cov(A) Ad(B⁻¹)ᵀ + cov(B), with [rot; trans] ordering.
Matrix6d compose_edge_covariance(const RigidTransform& T_b, const Matrix6d& cov_a,
                                 const Matrix6d& cov_b);

}  // namespace atlas
