#include "atlas/multi_index.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <queue>
#include <random>
#include <set>

#include "atlas/errors.hpp"

namespace atlas {

namespace {

// Deterministic Lloyd iterations; empty clusters are re-seeded on the point
// farthest from its centroid.
Eigen::MatrixXd kmeans(const Eigen::MatrixXd& points, int k, int max_iters,
                       std::mt19937_64& rng) {
  const int n = static_cast<int>(points.cols());
  const int dim = static_cast<int>(points.rows());

  std::vector<int> perm(n);
  for (int i = 0; i < n; ++i) {
    perm[i] = i;
  }
  std::shuffle(perm.begin(), perm.end(), rng);
  Eigen::MatrixXd centroids(dim, k);
  for (int c = 0; c < k; ++c) {
    centroids.col(c) = points.col(perm[c]);
  }

  std::vector<int> assignment(n, -1);
  for (int iter = 0; iter < max_iters; ++iter) {
    bool changed = false;
    for (int i = 0; i < n; ++i) {
      int best = 0;
      double best_d = (points.col(i) - centroids.col(0)).squaredNorm();
      for (int c = 1; c < k; ++c) {
        const double d = (points.col(i) - centroids.col(c)).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (assignment[i] != best) {
        assignment[i] = best;
        changed = true;
      }
    }
    if (!changed && iter > 0) {
      break;
    }
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(dim, k);
    std::vector<int> counts(k, 0);
    for (int i = 0; i < n; ++i) {
      sums.col(assignment[i]) += points.col(i);
      ++counts[assignment[i]];
    }
    for (int c = 0; c < k; ++c) {
      if (counts[c] > 0) {
        centroids.col(c) = sums.col(c) / counts[c];
      } else {
        // Re-seed on the point currently worst represented.
        int worst = 0;
        double worst_d = -1.0;
        for (int i = 0; i < n; ++i) {
          const double d = (points.col(i) - centroids.col(assignment[i])).squaredNorm();
          if (d > worst_d) {
            worst_d = d;
            worst = i;
          }
        }
        centroids.col(c) = points.col(worst);
      }
    }
  }
  return centroids;
}

int nearest_centroid(const Eigen::MatrixXd& centroids, const Eigen::VectorXd& v) {
  int best = 0;
  double best_d = (centroids.col(0) - v).squaredNorm();
  for (int c = 1; c < centroids.cols(); ++c) {
    const double d = (centroids.col(c) - v).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

}  // namespace

InvertedMultiIndex InvertedMultiIndex::build(const std::vector<IndexEntry>& entries,
                                             const IndexConfig& config) {
  if (entries.empty()) {
    throw EmptyInput("cannot build an index over zero entries");
  }
  const int k = config.codebook_size;
  if (k < 1 || static_cast<std::size_t>(k) > entries.size()) {
    throw EmptyInput("codebook size " + std::to_string(k) +
                     " exceeds entry count " + std::to_string(entries.size()));
  }

  InvertedMultiIndex index;
  index.dim_ = static_cast<int>(entries.front().descriptor.size());
  index.split_ = index.dim_ / 2;
  index.codebook_size_ = k;

  const int n = static_cast<int>(entries.size());
  Eigen::MatrixXd half1(index.split_, n);
  Eigen::MatrixXd half2(index.dim_ - index.split_, n);
  for (int i = 0; i < n; ++i) {
    if (static_cast<int>(entries[i].descriptor.size()) != index.dim_) {
      throw LengthMismatch("mixed projected-descriptor dimensions in index input");
    }
    half1.col(i) = entries[i].descriptor.head(index.split_);
    half2.col(i) = entries[i].descriptor.tail(index.dim_ - index.split_);
  }

  std::mt19937_64 rng(config.seed);
  index.codebook1_ = kmeans(half1, k, config.kmeans_max_iters, rng);
  index.codebook2_ = kmeans(half2, k, config.kmeans_max_iters, rng);

  index.cells_.assign(static_cast<std::size_t>(k) * k, {});
  for (int i = 0; i < n; ++i) {
    const int c1 = nearest_centroid(index.codebook1_, half1.col(i));
    const int c2 = nearest_centroid(index.codebook2_, half2.col(i));
    index.cells_[static_cast<std::size_t>(c1) * k + c2].push_back(entries[i]);
  }
  return index;
}

std::pair<int, int> InvertedMultiIndex::cell_of(const ProjectedDescriptor& v) const {
  return {nearest_centroid(codebook1_, v.head(split_)),
          nearest_centroid(codebook2_, v.tail(dim_ - split_))};
}

std::size_t InvertedMultiIndex::entry_count() const {
  std::size_t n = 0;
  for (const auto& cell : cells_) {
    n += cell.size();
  }
  return n;
}

std::vector<KnnResult> InvertedMultiIndex::query_knn(const ProjectedDescriptor& query,
                                                     int k, int probe_cells) const {
  if (!built()) {
    throw IndexNotBuilt("query on an index that was never built");
  }
  const int K = codebook_size_;
  const Eigen::VectorXd q1 = query.head(split_);
  const Eigen::VectorXd q2 = query.tail(dim_ - split_);

  // Per-half centroid distances, sorted ascending (ties by centroid index).
  std::vector<std::pair<double, int>> d1(K), d2(K);
  for (int c = 0; c < K; ++c) {
    d1[c] = {(codebook1_.col(c) - q1).squaredNorm(), c};
    d2[c] = {(codebook2_.col(c) - q2).squaredNorm(), c};
  }
  std::sort(d1.begin(), d1.end());
  std::sort(d2.begin(), d2.end());

  // Multi-sequence traversal over the sorted grid.
  struct Node {
    double cost;
    int i, j;
    bool operator>(const Node& other) const {
      if (cost != other.cost) return cost > other.cost;
      if (i != other.i) return i > other.i;
      return j > other.j;
    }
  };
  std::priority_queue<Node, std::vector<Node>, std::greater<Node>> frontier;
  std::set<std::pair<int, int>> pushed;
  frontier.push({d1[0].first + d2[0].first, 0, 0});
  pushed.insert({0, 0});

  // Candidates carry squared distances until the final top-k cut.
  std::vector<KnnResult> candidates;
  int visited = 0;
  while (!frontier.empty() && visited < probe_cells) {
    const Node node = frontier.top();
    frontier.pop();
    ++visited;
    const std::size_t cell_idx =
        static_cast<std::size_t>(d1[node.i].second) * K + d2[node.j].second;
    for (const IndexEntry& e : cells_[cell_idx]) {
      candidates.push_back({e.landmark_id, (e.descriptor - query).squaredNorm()});
    }
    if (node.i + 1 < K && !pushed.count({node.i + 1, node.j})) {
      frontier.push({d1[node.i + 1].first + d2[node.j].first, node.i + 1, node.j});
      pushed.insert({node.i + 1, node.j});
    }
    if (node.j + 1 < K && !pushed.count({node.i, node.j + 1})) {
      frontier.push({d1[node.i].first + d2[node.j + 1].first, node.i, node.j + 1});
      pushed.insert({node.i, node.j + 1});
    }
  }

  const auto by_distance = [](const KnnResult& a, const KnnResult& b) {
    if (a.distance != b.distance) return a.distance < b.distance;
    return a.landmark_id < b.landmark_id;
  };
  if (static_cast<int>(candidates.size()) > k) {
    std::nth_element(candidates.begin(), candidates.begin() + k, candidates.end(),
                     by_distance);
    candidates.resize(k);
  }
  std::sort(candidates.begin(), candidates.end(), by_distance);
  for (KnnResult& c : candidates) {
    c.distance = std::sqrt(c.distance);
  }
  return candidates;
}

namespace {

void write_matrix(std::ofstream& out, const Eigen::MatrixXd& m) {
  const std::uint64_t rows = m.rows(), cols = m.cols();
  out.write(reinterpret_cast<const char*>(&rows), 8);
  out.write(reinterpret_cast<const char*>(&cols), 8);
  for (std::uint64_t c = 0; c < cols; ++c) {
    for (std::uint64_t r = 0; r < rows; ++r) {
      const double v = m(r, c);
      out.write(reinterpret_cast<const char*>(&v), 8);
    }
  }
}

Eigen::MatrixXd read_matrix(std::ifstream& in) {
  std::uint64_t rows = 0, cols = 0;
  in.read(reinterpret_cast<char*>(&rows), 8);
  in.read(reinterpret_cast<char*>(&cols), 8);
  if (!in) {
    throw CorruptBlob("index.bin: truncated matrix header");
  }
  Eigen::MatrixXd m(rows, cols);
  for (std::uint64_t c = 0; c < cols; ++c) {
    for (std::uint64_t r = 0; r < rows; ++r) {
      double v;
      in.read(reinterpret_cast<char*>(&v), 8);
      m(r, c) = v;
    }
  }
  if (!in) {
    throw CorruptBlob("index.bin: truncated matrix payload");
  }
  return m;
}

}  // namespace

void InvertedMultiIndex::save(const std::filesystem::path& file,
                              const DescriptorProjection& projection) const {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw IoFailure("cannot write " + file.string());
  }
  const std::uint64_t magic = 0x78646d69736c7461ull;  // "atlsimdx"
  out.write(reinterpret_cast<const char*>(&magic), 8);
  const std::uint64_t dims[3] = {static_cast<std::uint64_t>(dim_),
                                 static_cast<std::uint64_t>(split_),
                                 static_cast<std::uint64_t>(codebook_size_)};
  out.write(reinterpret_cast<const char*>(dims), sizeof(dims));
  write_matrix(out, projection.mean);
  write_matrix(out, projection.basis);
  write_matrix(out, codebook1_);
  write_matrix(out, codebook2_);
  const std::uint64_t num_cells = cells_.size();
  out.write(reinterpret_cast<const char*>(&num_cells), 8);
  for (const auto& cell : cells_) {
    const std::uint64_t n = cell.size();
    out.write(reinterpret_cast<const char*>(&n), 8);
    for (const IndexEntry& e : cell) {
      out.write(reinterpret_cast<const char*>(&e.landmark_id), 8);
      for (int i = 0; i < dim_; ++i) {
        const double v = e.descriptor[i];
        out.write(reinterpret_cast<const char*>(&v), 8);
      }
    }
  }
  if (!out) {
    throw IoFailure("write failed: " + file.string());
  }
}

InvertedMultiIndex InvertedMultiIndex::load(const std::filesystem::path& file,
                                            DescriptorProjection* projection) {
  std::ifstream in(file, std::ios::binary);
  if (!in) {
    throw IoFailure("cannot read " + file.string());
  }
  std::uint64_t magic = 0;
  in.read(reinterpret_cast<char*>(&magic), 8);
  if (magic != 0x78646d69736c7461ull) {
    throw CorruptBlob("index.bin: bad magic");
  }
  std::uint64_t dims[3];
  in.read(reinterpret_cast<char*>(dims), sizeof(dims));
  if (!in) {
    throw CorruptBlob("index.bin: truncated header");
  }
  InvertedMultiIndex index;
  index.dim_ = static_cast<int>(dims[0]);
  index.split_ = static_cast<int>(dims[1]);
  index.codebook_size_ = static_cast<int>(dims[2]);
  DescriptorProjection proj;
  proj.mean = read_matrix(in);
  proj.basis = read_matrix(in);
  if (projection) {
    *projection = std::move(proj);
  }
  index.codebook1_ = read_matrix(in);
  index.codebook2_ = read_matrix(in);
  std::uint64_t num_cells = 0;
  in.read(reinterpret_cast<char*>(&num_cells), 8);
  index.cells_.resize(num_cells);
  for (auto& cell : index.cells_) {
    std::uint64_t n = 0;
    in.read(reinterpret_cast<char*>(&n), 8);
    if (!in) {
      throw CorruptBlob("index.bin: truncated cell header");
    }
    cell.resize(n);
    for (IndexEntry& e : cell) {
      in.read(reinterpret_cast<char*>(&e.landmark_id), 8);
      e.descriptor.resize(index.dim_);
      for (int i = 0; i < index.dim_; ++i) {
        double v;
        in.read(reinterpret_cast<char*>(&v), 8);
        e.descriptor[i] = v;
      }
    }
  }
  if (!in) {
    throw CorruptBlob("index.bin: truncated cells");
  }
  return index;
}

std::vector<IndexEntry> index_entries_from_map(const Map& map,
                                               const DescriptorProjection& projection,
                                               bool anchored_missions_only) {
  std::vector<IndexEntry> entries;
  for (const auto& [id, l] : map.landmarks()) {
    if (l.quality == LandmarkQuality::Bad || l.backlinks.empty()) {
      continue;
    }
    if (anchored_missions_only &&
        !map.mission(map.landmark_mission(id)).anchored) {
      continue;
    }
    const Backlink& link = l.backlinks.front();
    const VisualFrame& frame = map.vertex(link.vertex_id).frames.at(link.frame_idx);
    entries.push_back({id, project(frame.descriptors.at(link.keypoint_idx), projection)});
  }
  return entries;
}

}  // namespace atlas
