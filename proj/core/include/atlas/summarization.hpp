#pragma once

#include <cstddef>
#include <vector>

#include "atlas/map.hpp"

namespace atlas {

struct SummarizeConfig {
  std::size_t target_landmark_count = 0;
  int min_cover = 30;  // observations per keyframe the selection tries to keep
};

struct SummarizeResult {
  std::size_t retained = 0;
  std::size_t deleted = 0;
  // Target was at or above the available count; nothing was deleted.
  bool target_exceeds_available = false;
  std::vector<LandmarkId> selected;  // greedy order
};

// Greedy coverage-maximizing landmark selection. Each round picks the
// landmark observing the most keyframes still covered by fewer than
// min_cover selected landmarks (ties: lower id) until the target is reached
// or every keyframe is saturated. Unselected non-Bad landmarks are deleted
// together with their observations; Bad landmarks stay flagged in storage.
SummarizeResult summarize(Map& map, const SummarizeConfig& config);

}  // namespace atlas
