#include "atlas/map.hpp"

#include <algorithm>
#include <set>

#include <Eigen/Eigenvalues>

#include "atlas/errors.hpp"

namespace atlas {

namespace {
template <typename MapT>
typename MapT::mapped_type& get_or_throw(MapT& container, std::uint64_t id,
                                         const char* kind) {
  auto it = container.find(id);
  if (it == container.end()) {
    throw Error(std::string("unknown ") + kind + " id " + std::to_string(id));
  }
  return it->second;
}
}  // namespace

Mission& Map::mission(MissionId id) { return get_or_throw(missions_, id, "mission"); }
const Mission& Map::mission(MissionId id) const {
  return get_or_throw(const_cast<std::map<MissionId, Mission>&>(missions_), id, "mission");
}
Vertex& Map::vertex(VertexId id) { return get_or_throw(vertices_, id, "vertex"); }
const Vertex& Map::vertex(VertexId id) const {
  return get_or_throw(const_cast<std::map<VertexId, Vertex>&>(vertices_), id, "vertex");
}
Landmark& Map::landmark(LandmarkId id) { return get_or_throw(landmarks_, id, "landmark"); }
const Landmark& Map::landmark(LandmarkId id) const {
  return get_or_throw(const_cast<std::map<LandmarkId, Landmark>&>(landmarks_), id, "landmark");
}

MissionId Map::add_mission(const RigidTransform& baseframe, bool anchored) {
  Mission m;
  m.id = next_mission_id_++;
  m.T_global_mission = baseframe;
  m.anchored = anchored;
  missions_.emplace(m.id, m);
  return m.id;
}

VertexId Map::add_vertex(MissionId mission_id, double timestamp,
                         const RigidTransform& T_mission_body) {
  Vertex v;
  v.id = next_vertex_id_++;
  v.mission_id = mission_id;
  v.timestamp = timestamp;
  v.T_mission_body = T_mission_body;
  mission(mission_id).vertex_ids.push_back(v.id);
  const VertexId id = v.id;
  vertices_.emplace(id, std::move(v));
  return id;
}

LandmarkId Map::add_landmark(const Eigen::Vector3d& p_mission, VertexId host_vertex) {
  Landmark l;
  l.id = next_landmark_id_++;
  l.p_mission = p_mission;
  l.host_vertex_id = host_vertex;
  const LandmarkId id = l.id;
  landmarks_.emplace(id, std::move(l));
  return id;
}

void Map::add_edge(const OdometryEdge& edge) { edges_[edge.from_vertex] = edge; }

void Map::add_observation(LandmarkId landmark_id, const Backlink& link) {
  Landmark& l = landmark(landmark_id);
  l.backlinks.push_back(link);
  Vertex& v = vertex(link.vertex_id);
  v.frames.at(link.frame_idx).landmark_refs.at(link.keypoint_idx) = landmark_id;
}

void Map::remove_edge(VertexId from_vertex) { edges_.erase(from_vertex); }

void Map::remove_landmark(LandmarkId id) {
  auto it = landmarks_.find(id);
  if (it == landmarks_.end()) {
    return;
  }
  for (const Backlink& link : it->second.backlinks) {
    auto vit = vertices_.find(link.vertex_id);
    if (vit != vertices_.end()) {
      vit->second.frames.at(link.frame_idx).landmark_refs.at(link.keypoint_idx) =
          kInvalidId;
    }
  }
  landmarks_.erase(it);
}

void Map::remove_vertex(VertexId id) {
  auto it = vertices_.find(id);
  if (it == vertices_.end()) {
    return;
  }
  Vertex& v = it->second;

  std::set<LandmarkId> touched;
  for (std::size_t f = 0; f < v.frames.size(); ++f) {
    for (std::size_t k = 0; k < v.frames[f].landmark_refs.size(); ++k) {
      const LandmarkId lid = v.frames[f].landmark_refs[k];
      if (lid == kInvalidId) {
        continue;
      }
      Landmark& l = landmark(lid);
      const Backlink link{id, static_cast<int>(f), static_cast<int>(k)};
      std::erase(l.backlinks, link);
      touched.insert(lid);
    }
  }
  for (LandmarkId lid : touched) {
    Landmark& l = landmark(lid);
    if (l.backlinks.empty()) {
      landmarks_.erase(lid);
    } else if (l.host_vertex_id == id) {
      // Re-host on the first surviving observer, keeping the position fixed
      // in the (shared) mission frame.
      l.host_vertex_id = l.backlinks.front().vertex_id;
    }
  }

  edges_.erase(id);
  for (auto eit = edges_.begin(); eit != edges_.end();) {
    if (eit->second.to_vertex == id) {
      eit = edges_.erase(eit);
    } else {
      ++eit;
    }
  }

  Mission& m = mission(v.mission_id);
  std::erase(m.vertex_ids, id);
  vertices_.erase(it);
}

MissionId Map::reference_mission_id() const {
  if (missions_.empty()) {
    throw Error("reference_mission_id: empty map");
  }
  return missions_.begin()->first;
}

RigidTransform Map::global_vertex_pose(VertexId id) const {
  const Vertex& v = vertex(id);
  return mission(v.mission_id).T_global_mission * v.T_mission_body;
}

MissionId Map::landmark_mission(LandmarkId id) const {
  return vertex(landmark(id).host_vertex_id).mission_id;
}

Eigen::Vector3d Map::global_landmark_position(LandmarkId id) const {
  const Landmark& l = landmark(id);
  const MissionId mid = vertex(l.host_vertex_id).mission_id;
  return mission(mid).T_global_mission * l.p_mission;
}

std::size_t Map::descriptor_count() const {
  std::size_t n = 0;
  for (const auto& [id, v] : vertices_) {
    for (const VisualFrame& f : v.frames) {
      n += f.descriptors.size();
    }
  }
  return n;
}

void Map::insert_mission(Mission m) {
  next_mission_id_ = std::max(next_mission_id_, m.id + 1);
  missions_[m.id] = std::move(m);
}
void Map::insert_vertex(Vertex v) {
  next_vertex_id_ = std::max(next_vertex_id_, v.id + 1);
  vertices_[v.id] = std::move(v);
}
void Map::insert_landmark(Landmark l) {
  next_landmark_id_ = std::max(next_landmark_id_, l.id + 1);
  landmarks_[l.id] = std::move(l);
}
void Map::set_next_ids(std::uint64_t mission, std::uint64_t vertex,
                       std::uint64_t landmark) {
  next_mission_id_ = mission;
  next_vertex_id_ = vertex;
  next_landmark_id_ = landmark;
}

IntegrityReport Map::check_integrity() const {
  IntegrityReport report;
  auto add = [&report](const std::string& invariant, const std::string& detail) {
    report.violations.push_back({invariant, detail});
  };

  for (const auto& [mid, m] : missions_) {
    double prev_ts = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < m.vertex_ids.size(); ++i) {
      const VertexId vid = m.vertex_ids[i];
      auto vit = vertices_.find(vid);
      if (vit == vertices_.end()) {
        add("mission_vertex_exists",
            "mission " + std::to_string(mid) + " references missing vertex " +
                std::to_string(vid));
        continue;
      }
      const Vertex& v = vit->second;
      if (v.mission_id != mid) {
        add("vertex_mission_backref", "vertex " + std::to_string(vid));
      }
      if (v.timestamp <= prev_ts) {
        add("monotonic_timestamps", "vertex " + std::to_string(vid));
      }
      prev_ts = v.timestamp;
      if (i + 1 < m.vertex_ids.size()) {
        auto eit = edges_.find(vid);
        if (eit == edges_.end() || eit->second.to_vertex != m.vertex_ids[i + 1]) {
          add("mission_chain_connected",
              "no odometry edge " + std::to_string(vid) + " -> " +
                  std::to_string(m.vertex_ids[i + 1]));
        }
      }
    }
  }

  for (const auto& [vid, v] : vertices_) {
    if (std::abs(v.T_mission_body.rotation().norm() - 1.0) > 1e-9) {
      add("unit_quaternion", "vertex " + std::to_string(vid));
    }
    for (std::size_t f = 0; f < v.frames.size(); ++f) {
      const VisualFrame& frame = v.frames[f];
      if (frame.keypoints.size() != frame.descriptors.size() ||
          frame.keypoints.size() != frame.landmark_refs.size()) {
        add("parallel_frame_arrays",
            "vertex " + std::to_string(vid) + " frame " + std::to_string(f));
        continue;
      }
      for (std::size_t k = 0; k < frame.landmark_refs.size(); ++k) {
        if (descriptor_bits_ > 0 && frame.descriptors[k].size() != descriptor_bits_) {
          add("descriptor_length", "vertex " + std::to_string(vid) + " keypoint " +
                                       std::to_string(k));
        }
        const LandmarkId lid = frame.landmark_refs[k];
        if (lid == kInvalidId) {
          continue;
        }
        auto lit = landmarks_.find(lid);
        if (lit == landmarks_.end()) {
          add("landmark_ref_exists",
              "vertex " + std::to_string(vid) + " references missing landmark " +
                  std::to_string(lid));
          continue;
        }
        const Backlink link{vid, static_cast<int>(f), static_cast<int>(k)};
        const auto count =
            std::count(lit->second.backlinks.begin(), lit->second.backlinks.end(), link);
        if (count != 1) {
          add("backlink_bidirectional",
              "landmark " + std::to_string(lid) + " has " + std::to_string(count) +
                  " backlinks for vertex " + std::to_string(vid) + " keypoint " +
                  std::to_string(k));
        }
      }
    }
  }

  for (const auto& [lid, l] : landmarks_) {
    if (!has_vertex(l.host_vertex_id)) {
      add("landmark_host_exists", "landmark " + std::to_string(lid));
    }
    std::set<Backlink> seen;
    for (const Backlink& link : l.backlinks) {
      if (!seen.insert(link).second) {
        add("backlink_unique", "landmark " + std::to_string(lid));
        continue;
      }
      auto vit = vertices_.find(link.vertex_id);
      if (vit == vertices_.end()) {
        add("backlink_vertex_exists", "landmark " + std::to_string(lid));
        continue;
      }
      const Vertex& v = vit->second;
      if (link.frame_idx < 0 ||
          static_cast<std::size_t>(link.frame_idx) >= v.frames.size() ||
          link.keypoint_idx < 0 ||
          static_cast<std::size_t>(link.keypoint_idx) >=
              v.frames[link.frame_idx].landmark_refs.size() ||
          v.frames[link.frame_idx].landmark_refs[link.keypoint_idx] != lid) {
        add("backlink_bidirectional",
            "landmark " + std::to_string(lid) + " backlink to vertex " +
                std::to_string(link.vertex_id) + " is not mirrored");
      }
    }
  }

  for (const auto& [from, e] : edges_) {
    if (e.from_vertex != from) {
      add("edge_key", "edge from " + std::to_string(from));
    }
    if (!has_vertex(e.from_vertex) || !has_vertex(e.to_vertex)) {
      add("edge_vertices_exist", "edge from " + std::to_string(from));
      continue;
    }
    if (vertex(e.from_vertex).mission_id != vertex(e.to_vertex).mission_id) {
      add("edge_single_mission", "edge from " + std::to_string(from));
    }
    if ((e.covariance - e.covariance.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
      add("covariance_symmetric", "edge from " + std::to_string(from));
    } else {
      Eigen::SelfAdjointEigenSolver<Matrix6d> es(e.covariance);
      if (es.eigenvalues().minCoeff() <= 0.0) {
        add("covariance_positive_definite", "edge from " + std::to_string(from));
      }
    }
  }

  return report;
}

}  // namespace atlas
