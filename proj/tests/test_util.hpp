#pragma once

#include <cmath>
#include <map>
#include <vector>

#include "atlas/map.hpp"
#include "atlas/session_log.hpp"
#include "atlas/synth.hpp"

namespace atlas::testutil {

// Ingests every session log of a synthetic world into a fresh map.
// Returned vector holds the mission ids in session order.
inline Map ingest_world(const SynthWorld& world, std::vector<MissionId>* missions = nullptr) {
  Map map;
  for (const SessionLog& log : world.logs) {
    const MissionId mid = ingest_session(log, map);
    if (missions) {
      missions->push_back(mid);
    }
  }
  return map;
}

// Estimated global pose and matching true pose for every surviving vertex,
// matched per session by timestamp.
inline void matched_poses(const Map& map, const GroundTruth& truth,
                          std::vector<RigidTransform>* estimated,
                          std::vector<RigidTransform>* true_poses) {
  std::size_t session = 0;
  for (const auto& [mid, mission] : map.missions()) {
    std::map<double, const RigidTransform*> by_ts;
    for (std::size_t k = 0; k < truth.timestamps[session].size(); ++k) {
      by_ts[truth.timestamps[session][k]] = &truth.true_poses[session][k];
    }
    for (VertexId vid : mission.vertex_ids) {
      const auto it = by_ts.find(map.vertex(vid).timestamp);
      if (it != by_ts.end()) {
        estimated->push_back(map.global_vertex_pose(vid));
        true_poses->push_back(*it->second);
      }
    }
    ++session;
  }
}

// Joint ATE over all sessions (one rigid alignment for the whole map).
inline double map_ate(const Map& map, const GroundTruth& truth) {
  std::vector<RigidTransform> est, tru;
  matched_poses(map, truth, &est, &tru);
  return evaluate_ate(est, tru);
}

// Raw-odometry baseline: each mission aligned to truth independently (the
// per-session best case for unanchored dead-reckoning), errors pooled.
inline double per_mission_ate(const Map& map, const GroundTruth& truth) {
  double sum_sq = 0.0;
  std::size_t count = 0;
  std::size_t session = 0;
  for (const auto& [mid, mission] : map.missions()) {
    Map single;  // reuse matched_poses by restricting to one mission
    std::vector<RigidTransform> est, tru;
    std::map<double, const RigidTransform*> by_ts;
    for (std::size_t k = 0; k < truth.timestamps[session].size(); ++k) {
      by_ts[truth.timestamps[session][k]] = &truth.true_poses[session][k];
    }
    for (VertexId vid : mission.vertex_ids) {
      const auto it = by_ts.find(map.vertex(vid).timestamp);
      if (it != by_ts.end()) {
        est.push_back(map.global_vertex_pose(vid));
        tru.push_back(*it->second);
      }
    }
    const double rmse = evaluate_ate(est, tru);
    sum_sq += rmse * rmse * static_cast<double>(est.size());
    count += est.size();
    ++session;
  }
  return std::sqrt(sum_sq / static_cast<double>(count));
}

}  // namespace atlas::testutil
