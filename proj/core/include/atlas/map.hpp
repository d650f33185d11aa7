#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "atlas/camera.hpp"
#include "atlas/descriptor.hpp"
#include "atlas/geometry.hpp"

namespace atlas {

using MissionId = std::uint64_t;
using VertexId = std::uint64_t;
using LandmarkId = std::uint64_t;

constexpr std::uint64_t kInvalidId = ~std::uint64_t{0};

struct Keypoint {
  Eigen::Vector2d uv;
  double sigma_px = 1.0;
};

// Per-camera observation set of one vertex. The three vectors run parallel.
struct VisualFrame {
  std::vector<Keypoint> keypoints;
  std::vector<BinaryDescriptor> descriptors;
  std::vector<LandmarkId> landmark_refs;  // kInvalidId means untracked
};

struct Vertex {
  VertexId id = kInvalidId;
  MissionId mission_id = kInvalidId;
  double timestamp = 0.0;            // seconds, monotonic within mission
  RigidTransform T_mission_body;     // mission <- body
  std::vector<VisualFrame> frames;
};

struct Backlink {
  VertexId vertex_id = kInvalidId;
  int frame_idx = 0;
  int keypoint_idx = 0;

  bool operator==(const Backlink&) const = default;
  auto operator<=>(const Backlink&) const = default;
};

enum class LandmarkQuality : std::uint8_t { Unevaluated = 0, Good = 1, Bad = 2 };

struct Landmark {
  LandmarkId id = kInvalidId;
  Eigen::Vector3d p_mission = Eigen::Vector3d::Zero();  // host mission frame
  VertexId host_vertex_id = kInvalidId;
  std::vector<Backlink> backlinks;
  LandmarkQuality quality = LandmarkQuality::Unevaluated;
};

struct OdometryEdge {
  VertexId from_vertex = kInvalidId;
  VertexId to_vertex = kInvalidId;
  RigidTransform T_from_to;
  Matrix6d covariance = Matrix6d::Identity();  // [rot rad²; trans m²]
};

struct Mission {
  MissionId id = kInvalidId;
  RigidTransform T_global_mission;  // baseframe, global <- mission
  bool anchored = false;
  std::vector<VertexId> vertex_ids;  // chain order
};

struct IntegrityViolation {
  std::string invariant;
  std::string detail;
};

struct IntegrityReport {
  std::vector<IntegrityViolation> violations;
  bool clean() const { return violations.empty(); }
};

// The single mutable artifact every pipeline stage transforms. Single-writer:
// stages take exclusive mutation access; concurrent reads are safe once
// mutation ends.
class Map {
 public:
  Map() = default;

  // Descriptor bit-length is fixed map-wide at first ingestion.
  int descriptor_bits() const { return descriptor_bits_; }
  void set_descriptor_bits(int bits) { descriptor_bits_ = bits; }

  const std::vector<PinholeCamera>& cameras() const { return cameras_; }
  void set_cameras(std::vector<PinholeCamera> cameras) { cameras_ = std::move(cameras); }

  const std::map<MissionId, Mission>& missions() const { return missions_; }
  const std::map<VertexId, Vertex>& vertices() const { return vertices_; }
  const std::map<LandmarkId, Landmark>& landmarks() const { return landmarks_; }
  // Odometry edges keyed by their from-vertex (one outgoing edge per vertex).
  const std::map<VertexId, OdometryEdge>& edges() const { return edges_; }

  bool empty() const { return missions_.empty(); }

  Mission& mission(MissionId id);
  const Mission& mission(MissionId id) const;
  Vertex& vertex(VertexId id);
  const Vertex& vertex(VertexId id) const;
  Landmark& landmark(LandmarkId id);
  const Landmark& landmark(LandmarkId id) const;
  bool has_vertex(VertexId id) const { return vertices_.count(id) > 0; }
  bool has_landmark(LandmarkId id) const { return landmarks_.count(id) > 0; }

  MissionId add_mission(const RigidTransform& baseframe, bool anchored);
  VertexId add_vertex(MissionId mission_id, double timestamp,
                      const RigidTransform& T_mission_body);
  LandmarkId add_landmark(const Eigen::Vector3d& p_mission, VertexId host_vertex);
  void add_edge(const OdometryEdge& edge);

  // Creates the bidirectional keypoint<->landmark association.
  void add_observation(LandmarkId landmark_id, const Backlink& link);

  // Removes a vertex, its observations and incident edges. Landmarks left
  // without backlinks are deleted. Chain edges are NOT re-stitched; that is
  // keyframing's job.
  void remove_vertex(VertexId id);
  void remove_edge(VertexId from_vertex);
  void remove_landmark(LandmarkId id);

  // Mission that failed to anchor etc. Reference = lowest mission id.
  MissionId reference_mission_id() const;

  RigidTransform global_vertex_pose(VertexId id) const;
  Eigen::Vector3d global_landmark_position(LandmarkId id) const;
  MissionId landmark_mission(LandmarkId id) const;

  std::size_t descriptor_count() const;

  IntegrityReport check_integrity() const;

  // Raw mutation hooks used by serialization and tests.
  void insert_mission(Mission m);
  void insert_vertex(Vertex v);
  void insert_landmark(Landmark l);
  void set_next_ids(std::uint64_t mission, std::uint64_t vertex, std::uint64_t landmark);
  std::uint64_t next_mission_id() const { return next_mission_id_; }
  std::uint64_t next_vertex_id() const { return next_vertex_id_; }
  std::uint64_t next_landmark_id() const { return next_landmark_id_; }

 private:
  int descriptor_bits_ = 0;
  std::vector<PinholeCamera> cameras_;
  std::map<MissionId, Mission> missions_;
  std::map<VertexId, Vertex> vertices_;
  std::map<LandmarkId, Landmark> landmarks_;
  std::map<VertexId, OdometryEdge> edges_;
  std::uint64_t next_mission_id_ = 0;
  std::uint64_t next_vertex_id_ = 0;
  std::uint64_t next_landmark_id_ = 0;
};

}  // namespace atlas
