#include "atlas/keyframing.hpp"

#include <algorithm>
#include <set>

#include "atlas/errors.hpp"

namespace atlas {

int coobserved_landmark_count(const Map& map, VertexId a, VertexId b) {
  std::set<LandmarkId> seen_a;
  for (const VisualFrame& f : map.vertex(a).frames) {
    for (LandmarkId lid : f.landmark_refs) {
      if (lid != kInvalidId) {
        seen_a.insert(lid);
      }
    }
  }
  int count = 0;
  std::set<LandmarkId> counted;
  for (const VisualFrame& f : map.vertex(b).frames) {
    for (LandmarkId lid : f.landmark_refs) {
      if (lid != kInvalidId && seen_a.count(lid) && counted.insert(lid).second) {
        ++count;
      }
    }
  }
  return count;
}

std::vector<VertexId> select_keyframes(const Mission& mission, const Map& map,
                                       const KeyframeCriteria& criteria) {
  if (mission.vertex_ids.empty()) {
    throw EmptyMission("mission " + std::to_string(mission.id) + " has no vertices");
  }
  std::vector<VertexId> kept;
  kept.push_back(mission.vertex_ids.front());
  int removed_since_kept = 0;
  for (std::size_t i = 1; i + 1 < mission.vertex_ids.size(); ++i) {
    const VertexId last_kept = kept.back();
    const VertexId candidate = mission.vertex_ids[i];
    const RigidTransform T_rel = map.vertex(last_kept).T_mission_body.inverse() *
                                 map.vertex(candidate).T_mission_body;
    const bool trigger_translation =
        T_rel.translation().norm() > criteria.max_translation_m;
    const bool trigger_rotation =
        log_rotation(T_rel.rotation()).norm() > criteria.max_rotation_rad;
    const bool trigger_gap = removed_since_kept == criteria.max_consecutive_removed;
    const bool trigger_coobs =
        criteria.use_coobservation &&
        coobserved_landmark_count(map, last_kept, candidate) <
            criteria.min_coobserved_landmarks;
    if (trigger_translation || trigger_rotation || trigger_gap || trigger_coobs) {
      kept.push_back(candidate);
      removed_since_kept = 0;
    } else {
      ++removed_since_kept;
    }
  }
  if (mission.vertex_ids.size() > 1) {
    kept.push_back(mission.vertex_ids.back());
  }
  return kept;
}

Matrix6d compose_edge_covariance(const RigidTransform& T_b, const Matrix6d& cov_a,
                                 const Matrix6d& cov_b) {
  // Adjoint of B⁻¹ maps a perturbation of A into the composed frame.
  const RigidTransform T_b_inv = T_b.inverse();
  const Eigen::Matrix3d R = T_b_inv.rotation_matrix();
  Matrix6d adj = Matrix6d::Zero();
  adj.block<3, 3>(0, 0) = R;
  adj.block<3, 3>(3, 3) = R;
  adj.block<3, 3>(3, 0) = skew(T_b_inv.translation()) * R;
  return adj * cov_a * adj.transpose() + cov_b;
}

void apply_keyframing(Map& map, MissionId mission_id,
                      const std::vector<VertexId>& kept) {
  const Mission& mission = map.mission(mission_id);
  if (mission.vertex_ids.empty()) {
    throw EmptyMission("mission " + std::to_string(mission_id) + " has no vertices");
  }
  const std::set<VertexId> kept_set(kept.begin(), kept.end());
  const std::set<VertexId> chain_set(mission.vertex_ids.begin(),
                                     mission.vertex_ids.end());
  for (VertexId id : kept) {
    if (!chain_set.count(id)) {
      throw InvalidKeptSet("kept vertex " + std::to_string(id) +
                           " is not in mission " + std::to_string(mission_id));
    }
  }
  if (!kept_set.count(mission.vertex_ids.front()) ||
      !kept_set.count(mission.vertex_ids.back())) {
    throw InvalidKeptSet("kept set must contain both mission endpoints");
  }

  // Compose runs of edges between surviving neighbours, then drop vertices.
  const std::vector<VertexId> chain = mission.vertex_ids;
  std::vector<OdometryEdge> stitched;
  std::size_t i = 0;
  while (i + 1 < chain.size()) {
    OdometryEdge composed = map.edges().at(chain[i]);
    std::size_t j = i + 1;
    while (!kept_set.count(chain[j])) {
      const OdometryEdge& next = map.edges().at(chain[j]);
      composed.covariance =
          compose_edge_covariance(next.T_from_to, composed.covariance, next.covariance);
      composed.T_from_to = composed.T_from_to * next.T_from_to;
      composed.to_vertex = next.to_vertex;
      ++j;
    }
    stitched.push_back(composed);
    i = j;
  }

  for (VertexId id : chain) {
    if (!kept_set.count(id)) {
      map.remove_vertex(id);
    }
  }
  for (const OdometryEdge& e : stitched) {
    map.add_edge(e);
  }
}

std::size_t keyframe_map(Map& map, const KeyframeCriteria& criteria) {
  std::size_t removed = 0;
  std::vector<MissionId> mission_ids;
  for (const auto& [id, m] : map.missions()) {
    mission_ids.push_back(id);
  }
  for (MissionId mid : mission_ids) {
    const Mission& m = map.mission(mid);
    const std::size_t before = m.vertex_ids.size();
    const auto kept = select_keyframes(m, map, criteria);
    apply_keyframing(map, mid, kept);
    removed += before - kept.size();
  }
  return removed;
}

}  // namespace atlas
