#include <doctest.h>

#include <random>
#include <set>

#include "atlas/errors.hpp"
#include "atlas/pose_graph.hpp"
#include "test_util.hpp"

using namespace atlas;

namespace {

// Straight-line mission whose odometry accumulates a constant per-edge drift;
// true poses advance 1 m in x per step.
struct DriftedChain {
  Map map;
  MissionId mid;
  std::vector<RigidTransform> true_poses;
};

DriftedChain make_drifted_chain(int n, const Vector6d& drift_per_edge) {
  DriftedChain out;
  out.mid = out.map.add_mission(RigidTransform::Identity(), true);
  RigidTransform noisy;
  VertexId prev = kInvalidId;
  for (int k = 0; k < n; ++k) {
    out.true_poses.emplace_back(Eigen::Quaterniond::Identity(),
                                Eigen::Vector3d(k, 0, 0));
    const VertexId v = out.map.add_vertex(out.mid, k, noisy);
    if (prev != kInvalidId) {
      OdometryEdge e;
      e.from_vertex = prev;
      e.to_vertex = v;
      e.T_from_to = RigidTransform(Eigen::Quaterniond::Identity(),
                                   Eigen::Vector3d(1, 0, 0))
                        .retract(drift_per_edge);
      e.covariance = Matrix6d::Identity() * 1e-4;
      out.map.add_edge(e);
    }
    prev = v;
    if (k + 1 < n) {
      noisy = noisy * RigidTransform(Eigen::Quaterniond::Identity(),
                                     Eigen::Vector3d(1, 0, 0))
                          .retract(drift_per_edge);
    }
  }
  return out;
}

LoopConstraint make_closure(VertexId from, VertexId to,
                            const RigidTransform& true_from, const RigidTransform& true_to) {
  LoopConstraint c;
  c.from_vertex = from;
  c.to_vertex = to;
  c.relative_pose = true_from.inverse() * true_to;
  c.covariance = Matrix6d::Identity() * 1e-4;
  return c;
}

}  // namespace

TEST_CASE("no loop constraints leaves consistent odometry untouched") {
  DriftedChain chain = make_drifted_chain(20, Vector6d::Zero());
  const auto before = chain.map.vertices();
  std::vector<LoopConstraint> none;
  const RelaxStats stats = relax(chain.map, none, {});
  CHECK(stats.final_cost <= stats.initial_cost);
  for (const auto& [vid, v] : chain.map.vertices()) {
    CHECK(v.T_mission_body.rotation_angle_to(before.at(vid).T_mission_body) < 1e-12);
    CHECK((v.T_mission_body.translation() -
           before.at(vid).T_mission_body.translation())
              .norm() < 1e-12);
  }
}

TEST_CASE("a correct closure repairs accumulated drift") {
  Vector6d drift = Vector6d::Zero();
  drift[4] = 0.01;  // 1 cm sideways per metre, ~1 m over 100 m
  DriftedChain chain = make_drifted_chain(101, drift);
  const auto& ids = chain.map.mission(chain.mid).vertex_ids;
  const double before_err =
      (chain.map.vertex(ids.back()).T_mission_body.translation() -
       chain.true_poses.back().translation())
          .norm();
  CHECK(before_err > 0.9);

  std::vector<LoopConstraint> constraints = {make_closure(
      ids.front(), ids.back(), chain.true_poses.front(),
      chain.true_poses.back())};
  const RelaxStats stats = relax(chain.map, constraints, {});
  CHECK(stats.final_cost <= stats.initial_cost);
  CHECK(stats.switch_values[0] >= 0.9);
  const double after_err =
      (chain.map.vertex(ids.back()).T_mission_body.translation() -
       chain.true_poses.back().translation())
          .norm();
  CHECK(after_err <= 0.1 * before_err);
}

TEST_CASE("a false closure is switched off") {
  Vector6d drift = Vector6d::Zero();
  drift[4] = 0.01;
  // Reference run: correct closure only.
  DriftedChain ref = make_drifted_chain(101, drift);
  const auto ref_ids = ref.map.mission(ref.mid).vertex_ids;
  std::vector<LoopConstraint> good = {make_closure(
      ref_ids.front(), ref_ids.back(), ref.true_poses.front(),
      ref.true_poses.back())};
  relax(ref.map, good, {});

  // Same graph plus a 50 m bogus closure.
  DriftedChain chain = make_drifted_chain(101, drift);
  const auto& ids = chain.map.mission(chain.mid).vertex_ids;
  std::vector<LoopConstraint> constraints = {
      make_closure(ids.front(), ids.back(), chain.true_poses.front(),
                   chain.true_poses.back()),
      make_closure(ids.front(), ids[50], chain.true_poses.front(),
                   RigidTransform(Eigen::Quaterniond::Identity(),
                                  chain.true_poses[50].translation() +
                                      Eigen::Vector3d(0, 50, 0)))};
  const RelaxStats stats = relax(chain.map, constraints, {});
  CHECK(stats.switch_values[0] >= 0.9);
  CHECK(stats.switch_values[1] <= 0.1);
  // Trajectory within 5% of the outlier-free solution.
  for (std::size_t k = 0; k < ids.size(); ++k) {
    const Eigen::Vector3d a = chain.map.vertex(ids[k]).T_mission_body.translation();
    const Eigen::Vector3d b = ref.map.vertex(ref_ids[k]).T_mission_body.translation();
    CHECK((a - b).norm() <= 0.05 * (1.0 + b.norm()));
  }
}

TEST_CASE("switch prior weight controls robustness: large w approaches non-robust") {
  Vector6d drift = Vector6d::Zero();
  drift[4] = 0.005;
  double prev_dev = 2.0;
  for (const double w : {10.0, 1000.0, 100000.0}) {
    DriftedChain chain = make_drifted_chain(51, drift);
    const auto& ids = chain.map.mission(chain.mid).vertex_ids;
    LoopConstraint c = make_closure(ids.front(), ids.back(),
                                    chain.true_poses.front(),
                                    chain.true_poses.back());
    c.switch_prior_weight = w;
    std::vector<LoopConstraint> constraints = {c};
    const RelaxStats stats = relax(chain.map, constraints, {});
    const double dev = std::abs(1.0 - stats.switch_values[0]);
    CHECK(dev <= prev_dev + 1e-12);
    prev_dev = dev;
  }
  CHECK(prev_dev < 1e-3);
}

TEST_CASE("gauge invariance: a rigidly shifted problem yields shifted output") {
  Vector6d drift = Vector6d::Zero();
  drift[1] = 0.002;
  drift[3] = 0.01;

  DriftedChain a = make_drifted_chain(40, drift);
  const auto a_ids = a.map.mission(a.mid).vertex_ids;
  std::vector<LoopConstraint> ca = {make_closure(a_ids.front(), a_ids.back(),
                                                 a.true_poses.front(),
                                                 a.true_poses.back())};
  relax(a.map, ca, {});

  const RigidTransform G(
      Eigen::Quaterniond(Eigen::AngleAxisd(0.7, Eigen::Vector3d(1, 1, 0).normalized())),
      Eigen::Vector3d(5, -3, 2));
  DriftedChain b = make_drifted_chain(40, drift);
  const auto b_ids = b.map.mission(b.mid).vertex_ids;
  for (VertexId v : b_ids) {
    b.map.vertex(v).T_mission_body = G * b.map.vertex(v).T_mission_body;
  }
  std::vector<LoopConstraint> cb = {make_closure(b_ids.front(), b_ids.back(),
                                                 b.true_poses.front(),
                                                 b.true_poses.back())};
  relax(b.map, cb, {});
  for (std::size_t k = 0; k < a_ids.size(); ++k) {
    const RigidTransform expected = G * a.map.vertex(a_ids[k]).T_mission_body;
    const RigidTransform& got = b.map.vertex(b_ids[k]).T_mission_body;
    CHECK(got.rotation_angle_to(expected) < 1e-9);
    CHECK((got.translation() - expected.translation()).norm() < 1e-9);
  }
}

TEST_CASE("a broken mission chain raises DisconnectedGraph") {
  DriftedChain chain = make_drifted_chain(10, Vector6d::Zero());
  const auto& ids = chain.map.mission(chain.mid).vertex_ids;
  chain.map.remove_edge(ids[4]);
  std::vector<LoopConstraint> none;
  CHECK_THROWS_AS(relax(chain.map, none, {}), DisconnectedGraph);
}

TEST_CASE("loop constraints from a revisited area match ground truth") {
  WorldConfig cfg;
  cfg.landmark_count = 300;
  cfg.session_count = 2;
  cfg.trajectory_length_m = 50.0;
  cfg.keyframe_spacing_m = 1.0;
  cfg.descriptor_bits = 128;
  cfg.descriptor_clusters = 300;
  cfg.bit_flip_rate = 0.0;
  const SynthWorld world = generate_world(cfg);
  std::vector<MissionId> missions;
  Map map = testutil::ingest_world(world, &missions);
  {
    LoopEngineConfig engine;
    align_missions(map, engine);
  }
  const auto constraints = build_loop_constraints(map, {});
  REQUIRE(!constraints.empty());
  // Deduplicated per vertex pair.
  std::set<std::pair<VertexId, VertexId>> pairs;
  for (const LoopConstraint& c : constraints) {
    CHECK(pairs.insert({c.from_vertex, c.to_vertex}).second);
  }
  // Noiseless world: each constraint agrees with the current global poses.
  int consistent = 0;
  for (const LoopConstraint& c : constraints) {
    const RigidTransform est = map.global_vertex_pose(c.from_vertex).inverse() *
                               map.global_vertex_pose(c.to_vertex);
    if ((est.translation() - c.relative_pose.translation()).norm() < 0.05) {
      ++consistent;
    }
  }
  CHECK(consistent == static_cast<int>(constraints.size()));
}

TEST_CASE("single consistent mission yields no loop constraints") {
  WorldConfig cfg;
  cfg.landmark_count = 100;
  cfg.session_count = 1;
  cfg.trajectory_length_m = 30.0;
  cfg.keyframe_spacing_m = 1.0;
  cfg.descriptor_bits = 64;
  Map map = testutil::ingest_world(generate_world(cfg));
  // All matches resolve to the querying mission itself and are excluded.
  CHECK(build_loop_constraints(map, {}).empty());
}
