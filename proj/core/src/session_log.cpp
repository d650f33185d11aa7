#include "atlas/session_log.hpp"

#include <istream>
#include <ostream>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "atlas/errors.hpp"

namespace atlas {

namespace {

RigidTransform read_pose(std::istringstream& ss, const std::string& line) {
  double tx, ty, tz, qw, qx, qy, qz;
  if (!(ss >> tx >> ty >> tz >> qw >> qx >> qy >> qz)) {
    throw MalformedLog("bad pose fields in line: " + line);
  }
  return RigidTransform(Eigen::Quaterniond(qw, qx, qy, qz),
                        Eigen::Vector3d(tx, ty, tz));
}

void write_pose(std::ostream& out, const RigidTransform& T) {
  const auto& t = T.translation();
  const auto& q = T.rotation();
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%.17g %.17g %.17g %.17g %.17g %.17g %.17g",
                t.x(), t.y(), t.z(), q.w(), q.x(), q.y(), q.z());
  out << buf;
}

}  // namespace

SessionLog parse_session_log(std::istream& in) {
  SessionLog log;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) {
      line.erase(hash);
    }
    std::istringstream ss(line);
    std::string kind;
    if (!(ss >> kind)) {
      continue;  // blank line
    }
    const std::string where = " (line " + std::to_string(line_no) + ")";
    if (kind == "V") {
      double ts;
      if (!(ss >> ts)) {
        throw MalformedLog("bad V record" + where);
      }
      if (!log.vertices.empty() && ts <= log.vertices.back().timestamp) {
        throw NonMonotonicTimestamps("timestamp not increasing" + where);
      }
      log.vertices.push_back({ts, read_pose(ss, line)});
    } else if (kind == "O") {
      SessionLog::LogEdge e;
      if (!(ss >> e.from >> e.to)) {
        throw MalformedLog("bad O record" + where);
      }
      e.T_from_to = read_pose(ss, line);
      for (int r = 0; r < 6; ++r) {
        for (int c = 0; c < 6; ++c) {
          if (!(ss >> e.covariance(r, c))) {
            throw MalformedLog("bad O covariance" + where);
          }
        }
      }
      if (e.from < 0 || e.to < 0) {
        throw MalformedLog("negative vertex index in O record" + where);
      }
      log.edges.push_back(e);
    } else if (kind == "K") {
      SessionLog::LogKeypoint k;
      std::string hex;
      if (!(ss >> k.vertex >> k.frame >> k.keypoint.uv.x() >> k.keypoint.uv.y() >>
            k.keypoint.sigma_px >> hex)) {
        throw MalformedLog("bad K record" + where);
      }
      if (log.descriptor_bits == 0) {
        log.descriptor_bits = static_cast<int>(hex.size()) * 4;
      }
      k.descriptor = BinaryDescriptor::from_hex(hex, log.descriptor_bits);
      k.landmark_id = -1;
      std::int64_t lid;
      if (ss >> lid) {
        k.landmark_id = lid;
      }
      log.keypoints.push_back(std::move(k));
    } else if (kind == "L") {
      std::int64_t id;
      Eigen::Vector3d p;
      if (!(ss >> id >> p.x() >> p.y() >> p.z())) {
        throw MalformedLog("bad L record" + where);
      }
      log.landmarks[id] = p;
    } else {
      throw MalformedLog("unknown record kind '" + kind + "'" + where);
    }
  }
  if (log.vertices.empty()) {
    throw MalformedLog("session log contains no vertices");
  }
  const int n = static_cast<int>(log.vertices.size());
  for (const auto& e : log.edges) {
    if (e.from >= n || e.to >= n || e.to != e.from + 1) {
      throw MalformedLog("O record does not connect consecutive vertices");
    }
  }
  for (const auto& k : log.keypoints) {
    if (k.vertex < 0 || k.vertex >= n || k.frame < 0) {
      throw MalformedLog("K record references unknown vertex");
    }
  }
  return log;
}

void write_session_log(const SessionLog& log, std::ostream& out) {
  char buf[128];
  for (const auto& v : log.vertices) {
    std::snprintf(buf, sizeof(buf), "V %.17g ", v.timestamp);
    out << buf;
    write_pose(out, v.T_mission_body);
    out << '\n';
  }
  for (const auto& e : log.edges) {
    out << "O " << e.from << ' ' << e.to << ' ';
    write_pose(out, e.T_from_to);
    for (int r = 0; r < 6; ++r) {
      for (int c = 0; c < 6; ++c) {
        std::snprintf(buf, sizeof(buf), " %.17g", e.covariance(r, c));
        out << buf;
      }
    }
    out << '\n';
  }
  for (const auto& k : log.keypoints) {
    std::snprintf(buf, sizeof(buf), "K %d %d %.17g %.17g %.17g ", k.vertex, k.frame,
                  k.keypoint.uv.x(), k.keypoint.uv.y(), k.keypoint.sigma_px);
    out << buf << k.descriptor.to_hex();
    if (k.landmark_id >= 0) {
      out << ' ' << k.landmark_id;
    }
    out << '\n';
  }
  for (const auto& [id, p] : log.landmarks) {
    std::snprintf(buf, sizeof(buf), "L %lld %.17g %.17g %.17g",
                  static_cast<long long>(id), p.x(), p.y(), p.z());
    out << buf << '\n';
  }
}

Eigen::Vector3d triangulate_rays(const std::vector<Eigen::Vector3d>& origins,
                                 const std::vector<Eigen::Vector3d>& directions,
                                 double fallback_depth) {
  Eigen::Matrix3d A = Eigen::Matrix3d::Zero();
  Eigen::Vector3d b = Eigen::Vector3d::Zero();
  for (std::size_t i = 0; i < origins.size(); ++i) {
    const Eigen::Vector3d d = directions[i].normalized();
    const Eigen::Matrix3d P = Eigen::Matrix3d::Identity() - d * d.transpose();
    A += P;
    b += P * origins[i];
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(A);
  if (origins.size() < 2 || es.eigenvalues().minCoeff() < 1e-8) {
    return origins.front() + fallback_depth * directions.front().normalized();
  }
  return A.ldlt().solve(b);
}

namespace {

Eigen::Vector3d triangulate_log_landmark(const SessionLog& log,
                                         const std::vector<const SessionLog::LogKeypoint*>& obs,
                                         const std::vector<PinholeCamera>& cameras) {
  std::vector<Eigen::Vector3d> origins, directions;
  origins.reserve(obs.size());
  directions.reserve(obs.size());
  for (const auto* k : obs) {
    const PinholeCamera& cam =
        cameras[std::min<std::size_t>(k->frame, cameras.size() - 1)];
    const RigidTransform T_mission_camera =
        log.vertices[k->vertex].T_mission_body * cam.T_body_camera;
    origins.push_back(T_mission_camera.translation());
    directions.push_back(T_mission_camera.rotation() * cam.bearing(k->keypoint.uv));
  }
  return triangulate_rays(origins, directions);
}

}  // namespace

MissionId ingest_session(const SessionLog& log, Map& map,
                         std::map<std::int64_t, LandmarkId>* log_to_map_landmarks) {
  if (map.empty()) {
    if (map.descriptor_bits() == 0 && log.descriptor_bits > 0) {
      map.set_descriptor_bits(log.descriptor_bits);
    }
    if (map.cameras().empty()) {
      map.set_cameras({PinholeCamera{}});
    }
  }
  if (log.descriptor_bits > 0 && map.descriptor_bits() > 0 &&
      log.descriptor_bits != map.descriptor_bits()) {
    throw DescriptorLengthMismatch(
        "log descriptors have " + std::to_string(log.descriptor_bits) +
        " bits, map expects " + std::to_string(map.descriptor_bits()));
  }

  const bool first_mission = map.empty();
  const MissionId mission_id =
      map.add_mission(RigidTransform::Identity(), /*anchored=*/first_mission);

  std::vector<VertexId> vertex_ids;
  vertex_ids.reserve(log.vertices.size());
  for (const auto& v : log.vertices) {
    vertex_ids.push_back(map.add_vertex(mission_id, v.timestamp, v.T_mission_body));
  }
  for (const auto& e : log.edges) {
    OdometryEdge edge;
    edge.from_vertex = vertex_ids[e.from];
    edge.to_vertex = vertex_ids[e.to];
    edge.T_from_to = e.T_from_to;
    edge.covariance = 0.5 * (e.covariance + e.covariance.transpose());
    map.add_edge(edge);
  }

  // Keypoints: group per (vertex, frame) preserving log order, remembering
  // the in-frame index each tracked observation landed on.
  struct TrackedObs {
    const SessionLog::LogKeypoint* k;
    int keypoint_idx;
  };
  std::map<std::int64_t, std::vector<TrackedObs>> tracked;
  for (const auto& k : log.keypoints) {
    Vertex& v = map.vertex(vertex_ids[k.vertex]);
    if (static_cast<int>(v.frames.size()) <= k.frame) {
      v.frames.resize(k.frame + 1);
    }
    VisualFrame& frame = v.frames[k.frame];
    frame.keypoints.push_back(k.keypoint);
    frame.descriptors.push_back(k.descriptor);
    frame.landmark_refs.push_back(kInvalidId);
    if (k.landmark_id >= 0) {
      tracked[k.landmark_id].push_back(
          {&k, static_cast<int>(frame.keypoints.size()) - 1});
    }
  }

  if (log_to_map_landmarks) {
    log_to_map_landmarks->clear();
  }
  for (const auto& [log_id, obs] : tracked) {
    Eigen::Vector3d p_mission;
    auto lit = log.landmarks.find(log_id);
    if (lit != log.landmarks.end()) {
      p_mission = lit->second;
    } else {
      std::vector<const SessionLog::LogKeypoint*> raw;
      raw.reserve(obs.size());
      for (const auto& o : obs) {
        raw.push_back(o.k);
      }
      p_mission = triangulate_log_landmark(log, raw, map.cameras());
    }
    const VertexId host = vertex_ids[obs.front().k->vertex];
    const LandmarkId lid = map.add_landmark(p_mission, host);
    for (const auto& o : obs) {
      map.add_observation(lid, Backlink{vertex_ids[o.k->vertex], o.k->frame,
                                        o.keypoint_idx});
    }
    if (log_to_map_landmarks) {
      (*log_to_map_landmarks)[log_id] = lid;
    }
  }
  return mission_id;
}

MissionId ingest_session(std::istream& in, Map& map,
                         std::map<std::int64_t, LandmarkId>* log_to_map_landmarks) {
  return ingest_session(parse_session_log(in), map, log_to_map_landmarks);
}

}  // namespace atlas
