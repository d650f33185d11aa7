#include <doctest.h>

#include "atlas/map.hpp"
#include "test_util.hpp"

using namespace atlas;

namespace {

// Two-vertex mission with one landmark observed from both vertices.
Map tiny_map() {
  Map map;
  map.set_descriptor_bits(64);
  map.set_cameras({PinholeCamera{}});
  const MissionId mid = map.add_mission(RigidTransform::Identity(), true);
  const VertexId a = map.add_vertex(mid, 0.0, RigidTransform::Identity());
  const VertexId b = map.add_vertex(
      mid, 1.0,
      RigidTransform(Eigen::Quaterniond::Identity(), Eigen::Vector3d(1, 0, 0)));
  OdometryEdge edge;
  edge.from_vertex = a;
  edge.to_vertex = b;
  edge.T_from_to =
      RigidTransform(Eigen::Quaterniond::Identity(), Eigen::Vector3d(1, 0, 0));
  map.add_edge(edge);
  for (VertexId v : {a, b}) {
    VisualFrame frame;
    frame.keypoints.push_back({Eigen::Vector2d(320, 240), 1.0});
    frame.descriptors.push_back(BinaryDescriptor(64));
    frame.landmark_refs.push_back(kInvalidId);
    map.vertex(v).frames.push_back(frame);
  }
  const LandmarkId lid = map.add_landmark(Eigen::Vector3d(0.5, 0, 5), a);
  map.add_observation(lid, {a, 0, 0});
  map.add_observation(lid, {b, 0, 0});
  return map;
}

}  // namespace

TEST_CASE("empty map has a clean integrity report") {
  CHECK(Map{}.check_integrity().clean());
}

TEST_CASE("hand-built and freshly ingested maps pass integrity") {
  CHECK(tiny_map().check_integrity().clean());

  WorldConfig cfg;
  cfg.landmark_count = 120;
  cfg.session_count = 2;
  cfg.trajectory_length_m = 40.0;
  cfg.keyframe_spacing_m = 1.0;
  cfg.descriptor_bits = 64;
  const Map map = testutil::ingest_world(generate_world(cfg));
  CHECK(map.check_integrity().clean());
  CHECK(map.missions().size() == 2);
}

TEST_CASE("a deleted backlink is reported against the landmark") {
  Map map = tiny_map();
  const LandmarkId lid = map.landmarks().begin()->first;
  map.landmark(lid).backlinks.pop_back();
  const IntegrityReport report = map.check_integrity();
  REQUIRE(!report.clean());
  bool mentions = false;
  for (const auto& v : report.violations) {
    mentions |= v.detail.find(std::to_string(lid)) != std::string::npos;
  }
  CHECK(mentions);
}

TEST_CASE("backlink count equals referencing keypoint count") {
  const Map map = tiny_map();
  for (const auto& [lid, l] : map.landmarks()) {
    std::size_t refs = 0;
    for (const auto& [vid, v] : map.vertices()) {
      for (const VisualFrame& f : v.frames) {
        for (LandmarkId r : f.landmark_refs) {
          refs += (r == lid) ? 1 : 0;
        }
      }
    }
    CHECK(refs == l.backlinks.size());
  }
}

TEST_CASE("remove_vertex drops observations, edges and orphaned landmarks") {
  Map map = tiny_map();
  const VertexId a = map.missions().begin()->second.vertex_ids.front();
  const VertexId b = map.missions().begin()->second.vertex_ids.back();
  map.remove_vertex(b);
  CHECK(map.vertices().size() == 1);
  CHECK(map.edges().empty());
  CHECK(map.landmarks().size() == 1);  // still observed from a
  CHECK(map.check_integrity().clean());
  map.remove_vertex(a);
  CHECK(map.landmarks().empty());
}

TEST_CASE("remove_landmark clears the keypoint references") {
  Map map = tiny_map();
  const LandmarkId lid = map.landmarks().begin()->first;
  map.remove_landmark(lid);
  for (const auto& [vid, v] : map.vertices()) {
    for (const VisualFrame& f : v.frames) {
      for (LandmarkId r : f.landmark_refs) {
        CHECK(r == kInvalidId);
      }
    }
  }
  CHECK(map.check_integrity().clean());
}

TEST_CASE("global poses compose baseframe and mission pose") {
  Map map = tiny_map();
  Mission& m = map.mission(map.reference_mission_id());
  m.T_global_mission =
      RigidTransform(Eigen::Quaterniond(Eigen::AngleAxisd(0.5, Eigen::Vector3d::UnitZ())),
                     Eigen::Vector3d(10, 0, 0));
  const VertexId b = m.vertex_ids.back();
  const Eigen::Vector3d expected =
      m.T_global_mission * map.vertex(b).T_mission_body.translation();
  CHECK((map.global_vertex_pose(b).translation() - expected).norm() < 1e-12);
  const LandmarkId lid = map.landmarks().begin()->first;
  CHECK((map.global_landmark_position(lid) -
         m.T_global_mission * map.landmark(lid).p_mission)
            .norm() < 1e-12);
}
