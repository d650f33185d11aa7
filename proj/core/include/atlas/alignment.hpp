#pragma once

#include <vector>

#include "atlas/matching.hpp"
#include "atlas/multi_index.hpp"
#include "atlas/rigid_ransac.hpp"

namespace atlas {

struct LoopEngineConfig {
  MatchConfig match;
  RansacConfig ransac;
  IndexConfig index;
  double merge_radius_m = 0.3;
};

struct AlignReport {
  int rounds = 0;
  std::vector<MissionId> newly_anchored;
  std::vector<MissionId> unanchored;  // missions that never found overlap
};

// Builds a retrieval index over the projected descriptors of all Good (or
// unevaluated) landmarks; sample for projection training is drawn from the
// same landmarks.
struct BuiltIndex {
  DescriptorProjection projection;
  InvertedMultiIndex index;
};
BuiltIndex build_map_index(const Map& map, const IndexConfig& config,
                           bool anchored_missions_only = false);

// Rigidly anchors every unanchored mission against the already-anchored part
// of the map via descriptor matches and 3D-3D RANSAC. Pairwise probing
// repeats round by round, so chains with limited overlap anchor eventually.
// Missions that never anchor are reported, not fatal.
AlignReport align_missions(Map& map, const LoopEngineConfig& config);

// Merges cross-mission duplicate landmarks: a confirmed descriptor match
// whose two landmarks sit within merge_radius in the global frame collapses
// them onto the lower id, transferring backlinks. Returns the merge count.
std::size_t merge_duplicate_landmarks(Map& map, const LoopEngineConfig& config);

}  // namespace atlas
