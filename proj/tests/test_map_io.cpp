#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "atlas/errors.hpp"
#include "atlas/map_io.hpp"
#include "test_util.hpp"

using namespace atlas;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("atlas_test_" + name);
  fs::remove_all(dir);
  return dir;
}

void check_equal(const Map& a, const Map& b) {
  CHECK(a.descriptor_bits() == b.descriptor_bits());
  REQUIRE(a.cameras().size() == b.cameras().size());
  for (std::size_t i = 0; i < a.cameras().size(); ++i) {
    CHECK(a.cameras()[i].fx == b.cameras()[i].fx);
    CHECK(a.cameras()[i].cx == b.cameras()[i].cx);
    CHECK(a.cameras()[i].T_body_camera.translation() ==
          b.cameras()[i].T_body_camera.translation());
  }
  REQUIRE(a.missions().size() == b.missions().size());
  for (const auto& [mid, m] : a.missions()) {
    const Mission& n = b.mission(mid);
    CHECK(m.anchored == n.anchored);
    CHECK(m.vertex_ids == n.vertex_ids);
    CHECK(m.T_global_mission.translation() == n.T_global_mission.translation());
    CHECK(m.T_global_mission.rotation().coeffs() ==
          n.T_global_mission.rotation().coeffs());
  }
  REQUIRE(a.vertices().size() == b.vertices().size());
  for (const auto& [vid, v] : a.vertices()) {
    const Vertex& w = b.vertex(vid);
    CHECK(v.mission_id == w.mission_id);
    CHECK(v.timestamp == w.timestamp);
    CHECK(v.T_mission_body.translation() == w.T_mission_body.translation());
    CHECK(v.T_mission_body.rotation().coeffs() ==
          w.T_mission_body.rotation().coeffs());
    REQUIRE(v.frames.size() == w.frames.size());
    for (std::size_t f = 0; f < v.frames.size(); ++f) {
      CHECK(v.frames[f].landmark_refs == w.frames[f].landmark_refs);
      REQUIRE(v.frames[f].keypoints.size() == w.frames[f].keypoints.size());
      for (std::size_t k = 0; k < v.frames[f].keypoints.size(); ++k) {
        CHECK(v.frames[f].keypoints[k].uv == w.frames[f].keypoints[k].uv);
        CHECK(v.frames[f].keypoints[k].sigma_px == w.frames[f].keypoints[k].sigma_px);
        CHECK(v.frames[f].descriptors[k].bytes() == w.frames[f].descriptors[k].bytes());
      }
    }
  }
  REQUIRE(a.landmarks().size() == b.landmarks().size());
  for (const auto& [lid, l] : a.landmarks()) {
    const Landmark& m = b.landmark(lid);
    CHECK(l.p_mission == m.p_mission);
    CHECK(l.host_vertex_id == m.host_vertex_id);
    CHECK(l.quality == m.quality);
    CHECK(l.backlinks == m.backlinks);
  }
  REQUIRE(a.edges().size() == b.edges().size());
  for (const auto& [from, e] : a.edges()) {
    const OdometryEdge& f = b.edges().at(from);
    CHECK(e.to_vertex == f.to_vertex);
    CHECK(e.T_from_to.translation() == f.T_from_to.translation());
    CHECK(e.covariance == f.covariance);
  }
  CHECK(a.next_mission_id() == b.next_mission_id());
  CHECK(a.next_vertex_id() == b.next_vertex_id());
  CHECK(a.next_landmark_id() == b.next_landmark_id());
}

}  // namespace

TEST_CASE("empty map round trips") {
  const fs::path dir = temp_dir("empty");
  save_map(Map{}, dir);
  check_equal(Map{}, load_map(dir));
  fs::remove_all(dir);
}

TEST_CASE("multi-session synthetic map round trips bit-identically") {
  WorldConfig cfg;
  cfg.landmark_count = 150;
  cfg.session_count = 3;
  cfg.trajectory_length_m = 40.0;
  cfg.keyframe_spacing_m = 1.0;
  cfg.descriptor_bits = 128;
  cfg.sigma_translation_m = 0.01;
  cfg.sigma_rotation_rad = 0.002;
  cfg.pixel_noise_sigma_px = 0.5;
  Map map = testutil::ingest_world(generate_world(cfg));
  map.landmark(map.landmarks().begin()->first).quality = LandmarkQuality::Bad;

  const fs::path dir = temp_dir("synth");
  save_map(map, dir);
  const Map loaded = load_map(dir);
  check_equal(map, loaded);
  CHECK(loaded.check_integrity().clean());

  // Saving the loaded map reproduces the same bytes.
  const fs::path dir2 = temp_dir("synth2");
  save_map(loaded, dir2);
  for (const char* blob :
       {"manifest", "vertices.bin", "edges.bin", "landmarks.bin", "descriptors.bin"}) {
    CHECK(crc32_file(dir / blob) == crc32_file(dir2 / blob));
  }
  fs::remove_all(dir);
  fs::remove_all(dir2);
}

TEST_CASE("truncated blob is detected as corrupt") {
  WorldConfig cfg;
  cfg.landmark_count = 50;
  cfg.session_count = 1;
  cfg.trajectory_length_m = 30.0;
  cfg.keyframe_spacing_m = 1.0;
  cfg.descriptor_bits = 64;
  const Map map = testutil::ingest_world(generate_world(cfg));
  const fs::path dir = temp_dir("trunc");
  save_map(map, dir);
  for (const char* blob : {"descriptors.bin", "vertices.bin", "landmarks.bin"}) {
    const auto size = fs::file_size(dir / blob);
    fs::resize_file(dir / blob, size / 2);
    CHECK_THROWS_AS(load_map(dir), CorruptBlob);
    save_map(map, dir);  // restore
  }
  fs::remove_all(dir);
}

TEST_CASE("unsupported manifest version is rejected") {
  const fs::path dir = temp_dir("version");
  save_map(Map{}, dir);
  std::ifstream in(dir / "manifest");
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  in.close();
  text.replace(text.find("format_version 1"), 16, "format_version 9");
  std::ofstream(dir / "manifest", std::ios::trunc) << text;
  CHECK_THROWS_AS(load_map(dir), UnsupportedVersion);
  fs::remove_all(dir);
}

TEST_CASE("atomic save replaces the directory and keeps index.bin") {
  WorldConfig cfg;
  cfg.landmark_count = 40;
  cfg.session_count = 1;
  cfg.trajectory_length_m = 30.0;
  cfg.keyframe_spacing_m = 1.0;
  cfg.descriptor_bits = 64;
  Map map = testutil::ingest_world(generate_world(cfg));
  const fs::path dir = temp_dir("atomic");
  save_map_atomic(map, dir);
  std::ofstream(dir / "index.bin", std::ios::binary) << "stub";
  map.remove_landmark(map.landmarks().begin()->first);
  save_map_atomic(map, dir);
  CHECK(fs::exists(dir / "index.bin"));
  CHECK(!fs::exists(dir.string() + ".tmp"));
  CHECK(!fs::exists(dir.string() + ".old"));
  check_equal(map, load_map(dir));
  fs::remove_all(dir);
}

TEST_CASE("load rejects a missing directory") {
  CHECK_THROWS_AS(load_map(temp_dir("missing")), IoFailure);
}
