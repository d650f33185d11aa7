#pragma once

#include <vector>

#include "atlas/map.hpp"
#include "atlas/multi_index.hpp"

namespace atlas {

struct Match2D3D {
  VertexId vertex_id;  // kInvalidId for detached query frames
  int frame_idx;
  int keypoint_idx;
  LandmarkId landmark_id;
  double distance;  // projected-space distance
};

struct MatchConfig {
  int num_neighbors = 3;
  double match_threshold = 4.0;  // projected-space distance gate
  int min_covisibility_cluster = 2;
};

// Per-keypoint k-NN retrieval with a distance gate, followed by the
// covisibility filter. Matches into exclude_mission's landmarks are skipped
// (used when querying a mission against the rest of the map). Throws
// IndexNotBuilt.
std::vector<Match2D3D> query_frame_matches(const VisualFrame& frame,
                                           VertexId vertex_id, int frame_idx,
                                           const InvertedMultiIndex& index,
                                           const DescriptorProjection& projection,
                                           const Map& map, const MatchConfig& config,
                                           MissionId exclude_mission = kInvalidId);

// Groups matches into clusters where two matches are linked iff their
// landmarks share at least one observer vertex; clusters smaller than
// min_cluster_size are dropped.
std::vector<Match2D3D> covisibility_filter(const std::vector<Match2D3D>& matches,
                                           const Map& map, int min_cluster_size);

}  // namespace atlas
