#include "atlas/matching.hpp"

#include <algorithm>
#include <map>
#include <numeric>

#include "atlas/errors.hpp"

namespace atlas {

std::vector<Match2D3D> query_frame_matches(const VisualFrame& frame,
                                           VertexId vertex_id, int frame_idx,
                                           const InvertedMultiIndex& index,
                                           const DescriptorProjection& projection,
                                           const Map& map, const MatchConfig& config,
                                           MissionId exclude_mission) {
  if (!index.built()) {
    throw IndexNotBuilt("query_frame_matches on an unbuilt index");
  }
  const int probe_cells = std::max(8, index.codebook_size() / 2);
  std::vector<Match2D3D> matches;
  for (std::size_t k = 0; k < frame.descriptors.size(); ++k) {
    const ProjectedDescriptor q = project(frame.descriptors[k], projection);
    for (const KnnResult& r : index.query_knn(q, config.num_neighbors, probe_cells)) {
      if (r.distance >= config.match_threshold) {
        continue;
      }
      if (!map.has_landmark(r.landmark_id) ||
          map.landmark(r.landmark_id).quality == LandmarkQuality::Bad) {
        continue;
      }
      if (exclude_mission != kInvalidId &&
          map.landmark_mission(r.landmark_id) == exclude_mission) {
        continue;
      }
      matches.push_back({vertex_id, frame_idx, static_cast<int>(k), r.landmark_id,
                         r.distance});
    }
  }
  return covisibility_filter(matches, map, config.min_covisibility_cluster);
}

namespace {

class UnionFind {
 public:
  explicit UnionFind(std::size_t n) : parent_(n) {
    std::iota(parent_.begin(), parent_.end(), 0);
  }
  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  void unite(std::size_t a, std::size_t b) { parent_[find(a)] = find(b); }

 private:
  std::vector<std::size_t> parent_;
};

}  // namespace

std::vector<Match2D3D> covisibility_filter(const std::vector<Match2D3D>& matches,
                                           const Map& map, int min_cluster_size) {
  if (matches.empty()) {
    return {};
  }
  UnionFind uf(matches.size());

  // Two matches are linked when some vertex observes both landmarks. Matches
  // to the same landmark are trivially linked through any of its observers.
  std::map<VertexId, std::vector<std::size_t>> observers;
  for (std::size_t i = 0; i < matches.size(); ++i) {
    for (const Backlink& link : map.landmark(matches[i].landmark_id).backlinks) {
      observers[link.vertex_id].push_back(i);
    }
  }
  for (const auto& [vid, idxs] : observers) {
    for (std::size_t j = 1; j < idxs.size(); ++j) {
      uf.unite(idxs[0], idxs[j]);
    }
  }

  std::map<std::size_t, int> cluster_size;
  for (std::size_t i = 0; i < matches.size(); ++i) {
    ++cluster_size[uf.find(i)];
  }
  std::vector<Match2D3D> kept;
  for (std::size_t i = 0; i < matches.size(); ++i) {
    if (cluster_size[uf.find(i)] >= min_cluster_size) {
      kept.push_back(matches[i]);
    }
  }
  return kept;
}

}  // namespace atlas
