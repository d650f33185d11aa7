#include "atlas/summarization.hpp"

#include <algorithm>
#include <map>
#include <set>

namespace atlas {

SummarizeResult summarize(Map& map, const SummarizeConfig& config) {
  SummarizeResult result;

  std::vector<LandmarkId> candidates;
  std::map<LandmarkId, std::set<VertexId>> observers;
  for (const auto& [id, l] : map.landmarks()) {
    if (l.quality == LandmarkQuality::Bad) {
      continue;
    }
    candidates.push_back(id);
    for (const Backlink& b : l.backlinks) {
      observers[id].insert(b.vertex_id);
    }
  }

  if (config.target_landmark_count >= candidates.size()) {
    result.retained = candidates.size();
    result.target_exceeds_available = true;
    result.selected = candidates;
    return result;
  }

  std::map<VertexId, int> coverage;
  std::set<LandmarkId> remaining(candidates.begin(), candidates.end());
  while (result.selected.size() < config.target_landmark_count && !remaining.empty()) {
    LandmarkId best = kInvalidId;
    int best_score = -1;
    for (LandmarkId id : remaining) {  // ascending ids: first max wins ties
      int score = 0;
      for (VertexId vid : observers[id]) {
        if (coverage[vid] < config.min_cover) {
          ++score;
        }
      }
      if (score > best_score) {
        best_score = score;
        best = id;
      }
    }
    if (best_score <= 0) {
      break;  // every keyframe reachable from the pool is saturated
    }
    for (VertexId vid : observers[best]) {
      ++coverage[vid];
    }
    result.selected.push_back(best);
    remaining.erase(best);
  }

  for (LandmarkId id : remaining) {
    map.remove_landmark(id);
    ++result.deleted;
  }
  result.retained = result.selected.size();
  return result;
}

}  // namespace atlas
