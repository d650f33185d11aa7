#include "atlas/synth.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "atlas/errors.hpp"
#include "atlas/rigid_ransac.hpp"

namespace atlas {

namespace {

void validate(const WorldConfig& c) {
  if (c.landmark_count <= 0 || c.session_count <= 0 || c.descriptor_clusters <= 0 ||
      c.descriptor_bits <= 0 || c.descriptor_bits % 8 != 0) {
    throw InvalidConfig("generate_world: counts must be positive (bits: multiple of 8)");
  }
  if (c.sigma_rotation_rad < 0.0 || c.sigma_translation_m < 0.0 ||
      c.pixel_noise_sigma_px < 0.0 || c.bit_flip_rate < 0.0 || c.bit_flip_rate > 1.0) {
    throw InvalidConfig("generate_world: noise parameters out of range");
  }
  if (c.keyframe_spacing_m <= 0.0 || c.trajectory_length_m <= c.keyframe_spacing_m ||
      c.area_extent_m <= 0.0) {
    throw InvalidConfig("generate_world: invalid geometry");
  }
  const double loop_radius = c.trajectory_length_m / (2.0 * std::numbers::pi);
  if (loop_radius > 0.9 * c.area_extent_m / 2.0) {
    throw InvalidConfig("generate_world: trajectory does not fit the area");
  }
}

BinaryDescriptor random_descriptor(int bits, std::mt19937_64& rng) {
  BinaryDescriptor d(bits);
  std::bernoulli_distribution coin(0.5);
  for (int b = 0; b < bits; ++b) {
    if (coin(rng)) {
      d.set_bit(b, true);
    }
  }
  return d;
}

// Body orientation at loop angle theta: camera looks radially outward at the
// landmark wall, x along the direction of travel, right-handed.
Eigen::Matrix3d loop_orientation(double theta) {
  const Eigen::Vector3d outward(std::cos(theta), std::sin(theta), 0.0);
  const Eigen::Vector3d travel(-std::sin(theta), std::cos(theta), 0.0);
  Eigen::Matrix3d R;
  R.col(0) = travel;
  R.col(1) = Eigen::Vector3d::UnitZ();
  R.col(2) = outward;
  return R;
}

}  // namespace

SynthWorld generate_world(const WorldConfig& config) {
  validate(config);
  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  SynthWorld world;
  GroundTruth& truth = world.truth;
  truth.camera = PinholeCamera{};

  // Landmarks on a jittered cylindrical wall around the loop.
  const double wall_radius = config.area_extent_m / 2.0;
  truth.landmark_positions.reserve(config.landmark_count);
  for (int i = 0; i < config.landmark_count; ++i) {
    const double angle = 2.0 * std::numbers::pi * unit(rng);
    const double radius = wall_radius * (0.9 + 0.2 * unit(rng));
    const double height = -4.0 + 8.0 * unit(rng);
    truth.landmark_positions.emplace_back(radius * std::cos(angle),
                                          radius * std::sin(angle), height);
  }

  std::vector<BinaryDescriptor> centers;
  for (int k = 0; k < config.descriptor_clusters; ++k) {
    centers.push_back(random_descriptor(config.descriptor_bits, rng));
  }
  std::vector<BinaryDescriptor> landmark_descriptors;
  for (int i = 0; i < config.landmark_count; ++i) {
    BinaryDescriptor d = centers[i % config.descriptor_clusters];
    for (int b = 0; b < config.descriptor_bits; ++b) {
      if (unit(rng) < config.bit_flip_rate) {
        d.set_bit(b, !d.bit(b));
      }
    }
    landmark_descriptors.push_back(std::move(d));
  }

  const double loop_radius = config.trajectory_length_m / (2.0 * std::numbers::pi);
  const int steps = std::max(
      2, static_cast<int>(std::lround(config.trajectory_length_m /
                                      config.keyframe_spacing_m)));
  const double sigma_r = std::max(config.sigma_rotation_rad, 1e-6);
  const double sigma_t = std::max(config.sigma_translation_m, 1e-6);
  Matrix6d edge_cov = Matrix6d::Identity();
  edge_cov.topLeftCorner<3, 3>() *= sigma_r * sigma_r;
  edge_cov.bottomRightCorner<3, 3>() *= sigma_t * sigma_t;

  for (int s = 0; s < config.session_count; ++s) {
    const double theta0 = 2.0 * std::numbers::pi * s / (3.0 * config.session_count);
    const double radius_s = loop_radius * (1.0 - 0.06 * s);
    const double height_s = 0.2 * s;

    std::vector<RigidTransform> poses;
    std::vector<double> timestamps;
    for (int k = 0; k <= steps; ++k) {
      const double theta = theta0 + 2.0 * std::numbers::pi * k / steps;
      const Eigen::Vector3d position(radius_s * std::cos(theta),
                                     radius_s * std::sin(theta), height_s);
      poses.emplace_back(loop_orientation(theta), position);
      timestamps.push_back(k * config.keyframe_spacing_m);  // 1 m/s
    }

    SessionLog log;
    log.descriptor_bits = config.descriptor_bits;
    const RigidTransform T_global_session = poses.front();
    std::vector<RigidTransform> noisy;  // session frame
    noisy.push_back(RigidTransform::Identity());
    for (std::size_t k = 0; k + 1 < poses.size(); ++k) {
      const RigidTransform rel_true = poses[k].inverse() * poses[k + 1];
      Vector6d delta;
      for (int d = 0; d < 3; ++d) delta[d] = config.sigma_rotation_rad * gauss(rng);
      for (int d = 3; d < 6; ++d) delta[d] = config.sigma_translation_m * gauss(rng);
      const RigidTransform rel_noisy = rel_true.retract(delta);
      noisy.push_back(noisy.back() * rel_noisy);
      log.edges.push_back({static_cast<int>(k), static_cast<int>(k + 1), rel_noisy,
                           edge_cov});
    }
    for (std::size_t k = 0; k < poses.size(); ++k) {
      log.vertices.push_back({timestamps[k], noisy[k]});
    }

    // Observations projected from the TRUE poses; per-session log landmark
    // ids assigned in order of first sighting.
    std::map<int, std::int64_t> true_to_log;
    std::map<std::int64_t, int> log_to_true;
    std::int64_t next_log_id = 0;
    for (std::size_t k = 0; k < poses.size(); ++k) {
      const RigidTransform T_body_global = poses[k].inverse();
      for (int j = 0; j < config.landmark_count; ++j) {
        const Eigen::Vector3d p_cam =
            truth.camera.T_body_camera.inverse() *
            (T_body_global * truth.landmark_positions[j]);
        if (p_cam.z() < 2.0 || p_cam.z() > 1.9 * wall_radius) {
          continue;
        }
        const Eigen::Vector2d uv_true = truth.camera.project(p_cam);
        if (uv_true.x() < 10.0 || uv_true.x() > 630.0 || uv_true.y() < 10.0 ||
            uv_true.y() > 470.0) {
          continue;
        }
        auto it = true_to_log.find(j);
        std::int64_t log_id;
        if (it == true_to_log.end()) {
          log_id = next_log_id++;
          true_to_log[j] = log_id;
          log_to_true[log_id] = j;
          // Landmark position in the (noisy) session frame, attached to the
          // first vertex that sees it so the log stays locally consistent.
          log.landmarks[log_id] =
              noisy[k] * (T_body_global * truth.landmark_positions[j]);
        } else {
          log_id = it->second;
        }
        Keypoint kp;
        kp.uv = uv_true + config.pixel_noise_sigma_px *
                              Eigen::Vector2d(gauss(rng), gauss(rng));
        kp.sigma_px = std::max(config.pixel_noise_sigma_px, 1.0);
        log.keypoints.push_back({static_cast<int>(k), 0, kp,
                                 landmark_descriptors[j], log_id});
      }
    }

    world.logs.push_back(std::move(log));
    truth.timestamps.push_back(std::move(timestamps));
    truth.true_poses.push_back(std::move(poses));
    truth.T_global_session.push_back(T_global_session);
    truth.landmark_correspondences.push_back(std::move(log_to_true));
  }
  return world;
}

double evaluate_ate(const std::vector<RigidTransform>& estimated,
                    const std::vector<RigidTransform>& truth) {
  if (estimated.size() != truth.size()) {
    throw CountMismatch("evaluate_ate: pose counts differ");
  }
  if (estimated.empty()) {
    throw EmptyInput("evaluate_ate: no poses");
  }
  std::vector<Eigen::Vector3d> source, target;
  for (std::size_t i = 0; i < estimated.size(); ++i) {
    source.push_back(estimated[i].translation());
    target.push_back(truth[i].translation());
  }
  RigidTransform align;
  try {
    align = fit_rigid_transform(source, target);
  } catch (const Error&) {
    // Degenerate point sets: fall back to centroid alignment.
    Eigen::Vector3d cs = Eigen::Vector3d::Zero(), ct = Eigen::Vector3d::Zero();
    for (std::size_t i = 0; i < source.size(); ++i) {
      cs += source[i];
      ct += target[i];
    }
    cs /= static_cast<double>(source.size());
    ct /= static_cast<double>(target.size());
    align = RigidTransform(Eigen::Quaterniond::Identity(), ct - cs);
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < source.size(); ++i) {
    sum += (align * source[i] - target[i]).squaredNorm();
  }
  return std::sqrt(sum / static_cast<double>(source.size()));
}

}  // namespace atlas
