#include "atlas/alignment.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <numeric>
#include <set>

#include "atlas/errors.hpp"

namespace atlas {

BuiltIndex build_map_index(const Map& map, const IndexConfig& config,
                           bool anchored_missions_only) {
  std::vector<BinaryDescriptor> sample;
  for (const auto& [id, l] : map.landmarks()) {
    if (l.quality == LandmarkQuality::Bad || l.backlinks.empty()) {
      continue;
    }
    if (anchored_missions_only && !map.mission(map.landmark_mission(id)).anchored) {
      continue;
    }
    const Backlink& link = l.backlinks.front();
    sample.push_back(
        map.vertex(link.vertex_id).frames.at(link.frame_idx).descriptors.at(
            link.keypoint_idx));
  }
  BuiltIndex built;
  built.projection = train_projection(sample, config.target_dim);
  auto entries = index_entries_from_map(map, built.projection, anchored_missions_only);
  IndexConfig cfg = config;
  cfg.codebook_size =
      std::min<int>(cfg.codebook_size, static_cast<int>(entries.size()));
  built.index = InvertedMultiIndex::build(entries, cfg);
  return built;
}

namespace {

// 3D-3D pairs between a query mission's own landmarks and matched landmarks
// of the anchored map. Source points live in the query mission frame, target
// points in the global frame.
std::vector<PointCorrespondence> collect_mission_correspondences(
    const Map& map, MissionId query_mission, const BuiltIndex& built,
    const LoopEngineConfig& config) {
  std::vector<PointCorrespondence> pairs;
  std::set<std::pair<LandmarkId, LandmarkId>> seen;
  for (VertexId vid : map.mission(query_mission).vertex_ids) {
    const Vertex& v = map.vertex(vid);
    for (std::size_t f = 0; f < v.frames.size(); ++f) {
      const auto matches =
          query_frame_matches(v.frames[f], vid, static_cast<int>(f), built.index,
                              built.projection, map, config.match, query_mission);
      for (const Match2D3D& m : matches) {
        const LandmarkId own =
            v.frames[m.frame_idx].landmark_refs[m.keypoint_idx];
        if (own == kInvalidId ||
            map.landmark(own).quality == LandmarkQuality::Bad) {
          continue;
        }
        if (!seen.insert({own, m.landmark_id}).second) {
          continue;
        }
        pairs.push_back({map.global_landmark_position(m.landmark_id),
                         map.landmark(own).p_mission});
      }
    }
  }
  return pairs;
}

}  // namespace

AlignReport align_missions(Map& map, const LoopEngineConfig& config) {
  AlignReport report;
  std::vector<MissionId> pending;
  for (const auto& [id, m] : map.missions()) {
    if (!m.anchored) {
      pending.push_back(id);
    }
  }
  if (pending.empty()) {
    return report;
  }

  bool progress = true;
  while (!pending.empty() && progress) {
    progress = false;
    ++report.rounds;
    const BuiltIndex built =
        build_map_index(map, config.index, /*anchored_missions_only=*/true);
    for (auto it = pending.begin(); it != pending.end();) {
      const MissionId mid = *it;
      const auto pairs = collect_mission_correspondences(map, mid, built, config);
      bool anchored = false;
      if (static_cast<int>(pairs.size()) >= std::max(3, config.ransac.min_inliers)) {
        try {
          const AlignmentResult result =
              estimate_rigid_transform_ransac(pairs, config.ransac);
          Mission& m = map.mission(mid);
          m.T_global_mission = result.transform;
          m.anchored = true;
          anchored = true;
        } catch (const NoConsensus&) {
        }
      }
      if (anchored) {
        report.newly_anchored.push_back(mid);
        it = pending.erase(it);
        progress = true;
        break;  // rebuild the index so the new mission becomes queryable
      }
      ++it;
    }
  }
  report.unanchored = pending;
  return report;
}

std::size_t merge_duplicate_landmarks(Map& map, const LoopEngineConfig& config) {
  if (map.landmarks().empty()) {
    return 0;
  }
  BuiltIndex built;
  try {
    built = build_map_index(map, config.index, /*anchored_missions_only=*/true);
  } catch (const InsufficientSample&) {
    return 0;
  }

  // Union-find over landmark ids keyed by matched duplicate pairs.
  std::map<LandmarkId, LandmarkId> parent;
  std::function<LandmarkId(LandmarkId)> find = [&](LandmarkId x) {
    auto it = parent.find(x);
    if (it == parent.end() || it->second == x) {
      return x;
    }
    const LandmarkId root = find(it->second);
    parent[x] = root;
    return root;
  };
  auto unite = [&](LandmarkId a, LandmarkId b) {
    const LandmarkId ra = find(a), rb = find(b);
    if (ra == rb) {
      return;
    }
    // Lower id survives.
    if (ra < rb) {
      parent[rb] = ra;
    } else {
      parent[ra] = rb;
    }
  };

  const double radius2 = config.merge_radius_m * config.merge_radius_m;
  for (const auto& [vid, v] : map.vertices()) {
    const MissionId own_mission = v.mission_id;
    if (!map.mission(own_mission).anchored) {
      continue;
    }
    for (std::size_t f = 0; f < v.frames.size(); ++f) {
      const auto matches =
          query_frame_matches(v.frames[f], vid, static_cast<int>(f), built.index,
                              built.projection, map, config.match, own_mission);
      for (const Match2D3D& m : matches) {
        const LandmarkId own = v.frames[m.frame_idx].landmark_refs[m.keypoint_idx];
        if (own == kInvalidId || own == m.landmark_id ||
            map.landmark(own).quality == LandmarkQuality::Bad) {
          continue;
        }
        const Eigen::Vector3d pa = map.global_landmark_position(own);
        const Eigen::Vector3d pb = map.global_landmark_position(m.landmark_id);
        if ((pa - pb).squaredNorm() <= radius2) {
          unite(own, m.landmark_id);
        }
      }
    }
  }

  // Apply merges: every component collapses onto its lowest id.
  std::map<LandmarkId, std::vector<LandmarkId>> components;
  for (const auto& [id, p] : parent) {
    const LandmarkId root = find(id);
    if (root != id) {
      components[root].push_back(id);
    }
  }
  std::size_t merged = 0;
  for (const auto& [target, sources] : components) {
    Landmark& keep = map.landmark(target);
    for (LandmarkId src : sources) {
      const Landmark victim = map.landmark(src);  // copy: we mutate below
      for (const Backlink& link : victim.backlinks) {
        map.vertex(link.vertex_id)
            .frames.at(link.frame_idx)
            .landmark_refs.at(link.keypoint_idx) = target;
        keep.backlinks.push_back(link);
      }
      // Erase without touching the re-pointed keypoints.
      Landmark& doomed = map.landmark(src);
      doomed.backlinks.clear();
      map.remove_landmark(src);
      ++merged;
    }
  }
  return merged;
}

}  // namespace atlas
