#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <vector>

#include "atlas/map.hpp"

namespace atlas {

// Line-oriented session log, the output contract of the (external) VIO
// frontend. Record kinds:
//   V ts tx ty tz qw qx qy qz
//   O from to tx ty tz qw qx qy qz c11..c66
//   K vertex frame u v sigma hex_descriptor [landmark_id]
//   L id x y z
// Vertices are referenced by their V-record index; '#' starts a comment.
struct SessionLog {
  struct LogVertex {
    double timestamp;
    RigidTransform T_mission_body;
  };
  struct LogEdge {
    int from;
    int to;
    RigidTransform T_from_to;
    Matrix6d covariance;
  };
  struct LogKeypoint {
    int vertex;
    int frame;
    Keypoint keypoint;
    BinaryDescriptor descriptor;
    std::int64_t landmark_id;  // -1 when untracked
  };

  std::vector<LogVertex> vertices;
  std::vector<LogEdge> edges;
  std::vector<LogKeypoint> keypoints;
  std::map<std::int64_t, Eigen::Vector3d> landmarks;  // optional positions
  int descriptor_bits = 0;
};

// Throws MalformedLog / NonMonotonicTimestamps on schema violations.
SessionLog parse_session_log(std::istream& in);

void write_session_log(const SessionLog& log, std::ostream& out);

// Appends the log as a new unanchored mission (the first mission of an empty
// map becomes the anchored reference). Landmark positions missing from the
// log are triangulated from their observations. If log_to_map_landmarks is
// non-null it receives the log-id -> map-id mapping.
MissionId ingest_session(const SessionLog& log, Map& map,
                         std::map<std::int64_t, LandmarkId>* log_to_map_landmarks = nullptr);

MissionId ingest_session(std::istream& in, Map& map,
                         std::map<std::int64_t, LandmarkId>* log_to_map_landmarks = nullptr);

// Linear least-squares intersection of observation rays; falls back to a
// point at fallback_depth along the first ray when the system is degenerate.
Eigen::Vector3d triangulate_rays(const std::vector<Eigen::Vector3d>& origins,
                                 const std::vector<Eigen::Vector3d>& directions,
                                 double fallback_depth = 10.0);

}  // namespace atlas
