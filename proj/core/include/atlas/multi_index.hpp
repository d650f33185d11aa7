#pragma once

#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include "atlas/map.hpp"
#include "atlas/projection.hpp"

namespace atlas {

struct IndexEntry {
  LandmarkId landmark_id;
  ProjectedDescriptor descriptor;
};

struct IndexConfig {
  int target_dim = 16;
  int codebook_size = 16;  // K centroids per half-space
  int kmeans_max_iters = 25;
  std::uint64_t seed = 1;
};

struct KnnResult {
  LandmarkId landmark_id;
  double distance;
};

// Two-codebook product-quantization index over projected descriptors. Cells
// are centroid pairs; queries enumerate cells in ascending combined
// centroid-distance order (multi-sequence traversal). Immutable after build.
class InvertedMultiIndex {
 public:
  InvertedMultiIndex() = default;

  // Trains one K-means codebook per half of the projected vector and files
  // every entry into its nearest centroid-pair cell. Deterministic under the
  // configured seed. Throws EmptyInput; K must not exceed the entry count.
  static InvertedMultiIndex build(const std::vector<IndexEntry>& entries,
                                  const IndexConfig& config);

  // Ranked by exact projected distance, ties broken by landmark id. May
  // return fewer than k. probe_cells = K*K reproduces exhaustive search.
  std::vector<KnnResult> query_knn(const ProjectedDescriptor& query, int k,
                                   int probe_cells) const;

  bool built() const { return codebook_size_ > 0; }
  int codebook_size() const { return codebook_size_; }
  int dim() const { return dim_; }
  std::size_t entry_count() const;
  const std::vector<std::vector<IndexEntry>>& cells() const { return cells_; }
  const Eigen::MatrixXd& codebook_first() const { return codebook1_; }
  const Eigen::MatrixXd& codebook_second() const { return codebook2_; }

  // Nearest centroid per half for a full-dimension vector; exposes the cell
  // assignment rule for verification.
  std::pair<int, int> cell_of(const ProjectedDescriptor& v) const;

  void save(const std::filesystem::path& file,
            const DescriptorProjection& projection) const;
  static InvertedMultiIndex load(const std::filesystem::path& file,
                                 DescriptorProjection* projection);

 private:
  int dim_ = 0;
  int split_ = 0;  // first half = [0, split), second = [split, dim)
  int codebook_size_ = 0;
  Eigen::MatrixXd codebook1_;  // split x K
  Eigen::MatrixXd codebook2_;  // (dim-split) x K
  std::vector<std::vector<IndexEntry>> cells_;  // K*K, cell (i,j) at i*K+j
};

// Builds index entries from every Good (or Unevaluated) landmark of the map
// using the descriptor of each backlink observation's keypoint; one entry per
// landmark, descriptor taken from its first backlink.
std::vector<IndexEntry> index_entries_from_map(const Map& map,
                                               const DescriptorProjection& projection,
                                               bool anchored_missions_only = false);

}  // namespace atlas
