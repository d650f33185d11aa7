#include <doctest.h>

#include <random>
#include <set>

#include "atlas/alignment.hpp"
#include "atlas/errors.hpp"
#include "atlas/localization.hpp"
#include "test_util.hpp"

using namespace atlas;

namespace {

// Scene with landmarks in general position in front of a camera at T_world_cam.
struct ResectionScene {
  PinholeCamera camera;
  RigidTransform T_world_camera;
  std::vector<Eigen::Vector3d> world_points;
  std::vector<Eigen::Vector2d> pixels;
};

ResectionScene make_scene(int n, std::uint64_t seed) {
  ResectionScene s;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  s.T_world_camera = RigidTransform(
      Eigen::Quaterniond(Eigen::AngleAxisd(0.4, Eigen::Vector3d(0.3, 1, 0.2).normalized())),
      Eigen::Vector3d(2, -1, 0.5));
  std::uniform_real_distribution<double> ux(-2.0, 2.0), uz(3.0, 12.0);
  while (static_cast<int>(s.world_points.size()) < n) {
    const Eigen::Vector3d p_camera(ux(rng), ux(rng) * 0.7, uz(rng));
    Eigen::Vector2d px;
    try {
      px = s.camera.project(p_camera);
    } catch (const BehindCamera&) {
      continue;
    }
    if (px.x() < 0 || px.x() > 640 || px.y() < 0 || px.y() > 480) continue;
    s.world_points.push_back(s.T_world_camera * p_camera);
    s.pixels.push_back(px);
  }
  return s;
}

// Map whose landmarks are the scene points; returns parallel landmark ids.
Map scene_map(const ResectionScene& s, std::vector<LandmarkId>* lids) {
  Map map;
  map.set_descriptor_bits(8);
  map.set_cameras({s.camera});
  const MissionId mid = map.add_mission(RigidTransform::Identity(), true);
  const VertexId host = map.add_vertex(mid, 0.0, RigidTransform::Identity());
  map.vertex(host).frames.push_back({});
  for (const Eigen::Vector3d& p : s.world_points) {
    lids->push_back(map.add_landmark(p, host));
  }
  return map;
}

// Query frame + matches against the scene map; outlier_indices get wrong pixels.
std::pair<VisualFrame, std::vector<Match2D3D>> scene_query(
    const ResectionScene& s, const std::vector<LandmarkId>& lids,
    const std::set<int>& outliers = {}) {
  VisualFrame frame;
  std::vector<Match2D3D> matches;
  for (std::size_t i = 0; i < s.pixels.size(); ++i) {
    Eigen::Vector2d px = s.pixels[i];
    if (outliers.count(static_cast<int>(i))) {
      px += Eigen::Vector2d(90.0 + 7.0 * i, -60.0 - 3.0 * i);
    }
    frame.keypoints.push_back({px, 1.0});
    frame.descriptors.push_back(BinaryDescriptor(8));
    frame.landmark_refs.push_back(kInvalidId);
    matches.push_back({kInvalidId, 0, static_cast<int>(i), lids[i], 0.5});
  }
  return {frame, matches};
}

}  // namespace

TEST_CASE("three-point resection recovers a synthesized pose") {
  const ResectionScene s = make_scene(3, 21);
  std::array<BearingPointPair, 3> obs;
  for (int i = 0; i < 3; ++i) {
    obs[i] = {s.camera.bearing(s.pixels[i]), s.world_points[i]};
  }
  const auto candidates = p3p_minimal(obs);
  REQUIRE(!candidates.empty());
  double best = 1e9;
  for (const RigidTransform& T : candidates) {
    best = std::min(best, T.translation_distance_to(s.T_world_camera) +
                              T.rotation_angle_to(s.T_world_camera));
  }
  CHECK(best < 1e-9);
}

TEST_CASE("collinear resection points are rejected") {
  std::array<BearingPointPair, 3> obs;
  for (int i = 0; i < 3; ++i) {
    const Eigen::Vector3d p(i * 1.0, 0, 5);
    obs[i] = {p.normalized(), p};
  }
  CHECK_THROWS_AS(p3p_minimal(obs), DegenerateConfiguration);
}

TEST_CASE("an equilateral triangle ahead of the camera yields valid poses") {
  PinholeCamera cam;
  std::array<BearingPointPair, 3> obs;
  const double r = 1.5;
  // Slightly off-center so the configuration is not rotationally symmetric
  // about the optical axis (a repeated-root case with genuine ambiguity).
  const Eigen::Vector3d center(0.4, 0.25, 6.0);
  for (int i = 0; i < 3; ++i) {
    const double a = 2.0 * M_PI * i / 3.0;
    const Eigen::Vector3d p =
        center + Eigen::Vector3d(r * std::cos(a), r * std::sin(a), 0.3 * i);
    obs[i] = {p.normalized(), p};
  }
  const auto candidates = p3p_minimal(obs);
  REQUIRE(!candidates.empty());
  // The identity pose must be among the candidates (bearings taken in the
  // world frame itself).
  double best = 1e9;
  for (const RigidTransform& T : candidates) {
    best = std::min(best, T.translation().norm() +
                              T.rotation_angle_to(RigidTransform::Identity()));
  }
  CHECK(best < 1e-9);
  // All returned poses must reproduce the observations.
  for (const RigidTransform& T : candidates) {
    for (const auto& [bearing, point] : obs) {
      const Eigen::Vector3d in_cam = T.inverse() * point;
      CHECK(in_cam.normalized().dot(bearing) > 1.0 - 1e-9);
    }
  }

  // Fully symmetric triangle: every returned pose still reproduces the rays.
  std::array<BearingPointPair, 3> sym;
  for (int i = 0; i < 3; ++i) {
    const double a = 2.0 * M_PI * i / 3.0;
    const Eigen::Vector3d p(r * std::cos(a), r * std::sin(a), 6.0);
    sym[i] = {p.normalized(), p};
  }
  for (const RigidTransform& T : p3p_minimal(sym)) {
    for (const auto& [bearing, point] : sym) {
      const Eigen::Vector3d in_cam = T.inverse() * point;
      CHECK(in_cam.normalized().dot(bearing) > 1.0 - 1e-9);
    }
  }
}

TEST_CASE("pnp on noiseless matches is exact with every match an inlier") {
  const ResectionScene s = make_scene(50, 22);
  std::vector<LandmarkId> lids;
  const Map map = scene_map(s, &lids);
  const auto [frame, matches] = scene_query(s, lids);

  const RigidTransform T_world_body =
      s.T_world_camera * s.camera.T_body_camera.inverse();
  PnpConfig cfg;
  const LocalizationResult r = pnp_ransac(matches, frame, s.camera, map, cfg);
  REQUIRE(r.status == LocalizationStatus::Localized);
  CHECK(r.inlier_count == 50);
  CHECK(r.total_matches == 50);
  CHECK(r.T_global_body.translation_distance_to(T_world_body) < 1e-6);
  CHECK(r.T_global_body.rotation_angle_to(T_world_body) < 1e-6);

  // Reprojection RMSE of the accepted inliers stays under the gate.
  double sq = 0.0;
  const RigidTransform T_cam_world =
      (r.T_global_body * s.camera.T_body_camera).inverse();
  for (int idx : r.inlier_indices) {
    const Eigen::Vector2d proj =
        s.camera.project(T_cam_world * s.world_points[matches[idx].keypoint_idx]);
    sq += (proj - frame.keypoints[matches[idx].keypoint_idx].uv).squaredNorm();
  }
  CHECK(std::sqrt(sq / r.inlier_count) < cfg.inlier_px);
}

TEST_CASE("pnp rejects 40 percent outliers and labels them exactly") {
  const ResectionScene s = make_scene(50, 23);
  std::vector<LandmarkId> lids;
  const Map map = scene_map(s, &lids);
  std::set<int> outliers;
  std::mt19937_64 rng(24);
  while (outliers.size() < 20) {
    outliers.insert(static_cast<int>(rng() % 50));
  }
  const auto [frame, matches] = scene_query(s, lids, outliers);

  const RigidTransform T_world_body =
      s.T_world_camera * s.camera.T_body_camera.inverse();
  const LocalizationResult r = pnp_ransac(matches, frame, s.camera, map, {});
  REQUIRE(r.status == LocalizationStatus::Localized);
  CHECK(r.T_global_body.translation_distance_to(T_world_body) < 1e-4);
  CHECK(r.T_global_body.rotation_angle_to(T_world_body) < 1e-4);
  CHECK(r.inlier_count == 30);
  for (int idx : r.inlier_indices) {
    CHECK(!outliers.count(matches[idx].keypoint_idx));
  }
}

TEST_CASE("too few matches yields NotLocalized") {
  const ResectionScene s = make_scene(5, 25);
  std::vector<LandmarkId> lids;
  const Map map = scene_map(s, &lids);
  const auto [frame, matches] = scene_query(s, lids);
  const LocalizationResult r = pnp_ransac(matches, frame, s.camera, map, {});
  CHECK(r.status == LocalizationStatus::NotLocalized);
}

TEST_CASE("pnp is deterministic for a fixed seed") {
  const ResectionScene s = make_scene(60, 26);
  std::vector<LandmarkId> lids;
  const Map map = scene_map(s, &lids);
  std::set<int> outliers = {1, 5, 9, 13, 17, 21, 25, 29, 33, 37};
  const auto [frame, matches] = scene_query(s, lids, outliers);
  const LocalizationResult a = pnp_ransac(matches, frame, s.camera, map, {});
  const LocalizationResult b = pnp_ransac(matches, frame, s.camera, map, {});
  REQUIRE(a.status == b.status);
  CHECK(a.inlier_indices == b.inlier_indices);
  CHECK((a.T_global_body.translation() - b.T_global_body.translation()).norm() == 0.0);
  CHECK(a.T_global_body.rotation_angle_to(b.T_global_body) == 0.0);
}

TEST_CASE("full query pipeline relocalizes frames of a known session") {
  WorldConfig wc;
  wc.landmark_count = 400;
  wc.session_count = 1;
  wc.trajectory_length_m = 60.0;
  wc.keyframe_spacing_m = 1.0;
  wc.descriptor_clusters = 400;  // one cluster per landmark: unique descriptors
  wc.bit_flip_rate = 0.0;
  const SynthWorld world = generate_world(wc);
  Map map = testutil::ingest_world(world);
  const BuiltIndex built = build_map_index(map, {});

  LocalizeConfig cfg;
  int localized = 0;
  for (std::size_t k = 0; k < map.mission(map.reference_mission_id()).vertex_ids.size();
       k += 7) {
    const VertexId vid = map.mission(map.reference_mission_id()).vertex_ids[k];
    const Vertex& v = map.vertex(vid);
    if (v.frames.empty() || v.frames[0].keypoints.size() < 15) continue;
    double secs = -1.0;
    const LocalizationResult r = localize_frame(
        v.frames[0], map.cameras()[0], map, built.index, built.projection, cfg, &secs);
    CHECK(secs >= 0.0);
    if (r.status != LocalizationStatus::Localized) continue;
    ++localized;
    const RigidTransform truth = map.global_vertex_pose(vid);
    CHECK(r.T_global_body.translation_distance_to(truth) < 0.05);
    CHECK(r.T_global_body.rotation_angle_to(truth) < 0.5 * M_PI / 180.0);
  }
  CHECK(localized >= 5);
}

TEST_CASE("random descriptors do not localize") {
  WorldConfig wc;
  wc.landmark_count = 200;
  wc.session_count = 1;
  wc.trajectory_length_m = 40.0;
  wc.keyframe_spacing_m = 1.0;
  wc.descriptor_clusters = 200;
  const SynthWorld world = generate_world(wc);
  Map map = testutil::ingest_world(world);
  const BuiltIndex built = build_map_index(map, {});

  std::mt19937_64 rng(27);
  std::bernoulli_distribution coin(0.5);
  std::uniform_real_distribution<double> ux(10.0, 630.0), uy(10.0, 470.0);
  VisualFrame frame;
  for (int i = 0; i < 60; ++i) {
    frame.keypoints.push_back({Eigen::Vector2d(ux(rng), uy(rng)), 1.0});
    BinaryDescriptor d(map.descriptor_bits());
    for (int b = 0; b < map.descriptor_bits(); ++b) d.set_bit(b, coin(rng));
    frame.descriptors.push_back(d);
    frame.landmark_refs.push_back(kInvalidId);
  }
  const LocalizationResult r = localize_frame(frame, map.cameras()[0], map,
                                              built.index, built.projection, {});
  CHECK(r.status == LocalizationStatus::NotLocalized);
}
