#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "atlas/camera.hpp"
#include "atlas/session_log.hpp"

namespace atlas {

// Synthetic world generator configuration. All randomness derives from seed.
struct WorldConfig {
  int landmark_count = 300;
  double area_extent_m = 60.0;  // diameter of the landmark wall
  int session_count = 3;
  double trajectory_length_m = 120.0;
  double keyframe_spacing_m = 0.5;
  double sigma_rotation_rad = 0.0;  // odometry noise per edge
  double sigma_translation_m = 0.0;
  double pixel_noise_sigma_px = 0.0;
  int descriptor_clusters = 64;
  double bit_flip_rate = 0.02;  // per-landmark flips off its cluster center
  int descriptor_bits = 256;
  std::uint64_t seed = 1;
};

struct GroundTruth {
  PinholeCamera camera;
  std::vector<Eigen::Vector3d> landmark_positions;  // global frame
  std::vector<std::vector<double>> timestamps;      // [session][vertex]
  std::vector<std::vector<RigidTransform>> true_poses;  // global <- body
  std::vector<RigidTransform> T_global_session;          // true baseframes
  // Per session: log landmark id -> index into landmark_positions.
  std::vector<std::map<std::int64_t, int>> landmark_correspondences;
};

struct SynthWorld {
  std::vector<SessionLog> logs;
  GroundTruth truth;
};

// Deterministic multi-session world: planar loop trajectories (full 6-DoF
// state) circling inside a cylindrical wall of landmarks, session logs with
// integrated noisy odometry, pixel observations projected from the true
// poses, and per-landmark descriptors drawn from cluster centers with bit
// flips. Throws InvalidConfig.
SynthWorld generate_world(const WorldConfig& config);

// Position RMSE after least-squares rigid alignment of the estimate onto the
// truth. Throws CountMismatch / EmptyInput.
double evaluate_ate(const std::vector<RigidTransform>& estimated,
                    const std::vector<RigidTransform>& truth);

}  // namespace atlas
