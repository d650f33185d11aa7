#include "atlas/localization.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>
#include <set>

#include <Eigen/Cholesky>

#include "atlas/errors.hpp"
#include "atlas/residuals.hpp"

namespace atlas {

namespace {

// Pixel reprojection error of one 2D-3D match under a pose hypothesis;
// points behind the camera count as infinitely wrong.
double reprojection_error_px(const Eigen::Vector3d& p_global,
                             const Eigen::Vector2d& observed_px,
                             const RigidTransform& T_global_body,
                             const PinholeCamera& camera) {
  const Eigen::Vector3d p_cam =
      camera.T_body_camera.inverse() * (T_global_body.inverse() * p_global);
  if (!camera.in_front(p_cam)) {
    return std::numeric_limits<double>::infinity();
  }
  return (camera.project(p_cam) - observed_px).norm();
}

std::vector<int> classify_inliers(const std::vector<Match2D3D>& matches,
                                  const VisualFrame& frame,
                                  const PinholeCamera& camera, const Map& map,
                                  const RigidTransform& T_global_body,
                                  double inlier_px) {
  std::vector<int> inliers;
  for (int i = 0; i < static_cast<int>(matches.size()); ++i) {
    const Match2D3D& m = matches[i];
    const double err = reprojection_error_px(
        map.global_landmark_position(m.landmark_id),
        frame.keypoints.at(m.keypoint_idx).uv, T_global_body, camera);
    if (err < inlier_px) {
      inliers.push_back(i);
    }
  }
  return inliers;
}

// Independent support of an inlier set. Duplicate landmarks (unmerged
// cross-mission copies) and repeated matches of one keypoint must not count
// as extra evidence, so support is the smaller of the distinct keypoint and
// distinct landmark counts.
int support_count(const std::vector<Match2D3D>& matches,
                  const std::vector<int>& inliers) {
  std::set<int> keypoints;
  std::set<LandmarkId> landmarks;
  for (int i : inliers) {
    keypoints.insert(matches[i].keypoint_idx);
    landmarks.insert(matches[i].landmark_id);
  }
  return static_cast<int>(std::min(keypoints.size(), landmarks.size()));
}

// Damped Gauss-Newton on the body pose over the inlier set.
RigidTransform refine_pose(const std::vector<Match2D3D>& matches,
                           const std::vector<int>& inliers, const VisualFrame& frame,
                           const PinholeCamera& camera, const Map& map,
                           RigidTransform T_global_body, int iterations) {
  const RigidTransform identity;
  double damping = 1e-9;
  auto cost_of = [&](const RigidTransform& T) {
    double cost = 0.0;
    for (int i : inliers) {
      const double err = reprojection_error_px(
          map.global_landmark_position(matches[i].landmark_id),
          frame.keypoints.at(matches[i].keypoint_idx).uv, T, camera);
      cost += std::isfinite(err) ? err * err : 1e12;
    }
    return cost;
  };
  double cost = cost_of(T_global_body);
  for (int iter = 0; iter < iterations; ++iter) {
    Matrix6d H = Matrix6d::Zero();
    Vector6d g = Vector6d::Zero();
    for (int i : inliers) {
      const Match2D3D& m = matches[i];
      const Keypoint& kp = frame.keypoints.at(m.keypoint_idx);
      try {
        const auto r = reprojection_residual(
            map.global_landmark_position(m.landmark_id), T_global_body, identity,
            camera, kp.uv, /*sigma_px=*/1.0);
        H += r.J_pose.transpose() * r.J_pose;
        g += r.J_pose.transpose() * r.residual;
      } catch (const BehindCamera&) {
      }
    }
    bool accepted = false;
    for (int retry = 0; retry < 6 && !accepted; ++retry) {
      Matrix6d Hd = H;
      Hd.diagonal().array() += damping * (1.0 + Hd.diagonal().array());
      const Vector6d dx = Hd.ldlt().solve(-g);
      const RigidTransform trial = T_global_body.retract(dx);
      const double new_cost = cost_of(trial);
      if (new_cost <= cost) {
        T_global_body = trial;
        cost = new_cost;
        damping = std::max(1e-12, damping * 0.3);
        accepted = true;
      } else {
        damping *= 10.0;
      }
    }
    if (!accepted) {
      break;
    }
  }
  return T_global_body;
}

}  // namespace

LocalizationResult pnp_ransac(const std::vector<Match2D3D>& matches,
                              const VisualFrame& frame, const PinholeCamera& camera,
                              const Map& map, const PnpConfig& config) {
  LocalizationResult result;
  result.total_matches = static_cast<int>(matches.size());
  if (static_cast<int>(matches.size()) < 3 ||
      static_cast<int>(matches.size()) < config.min_inliers) {
    return result;
  }

  std::mt19937_64 rng(config.seed);
  std::uniform_int_distribution<int> pick(0, static_cast<int>(matches.size()) - 1);

  RigidTransform best_pose;
  std::size_t best_inliers = 0;
  int max_iterations = config.max_iterations;
  for (int iter = 0; iter < max_iterations; ++iter) {
    int ia = pick(rng), ib = pick(rng), ic = pick(rng);
    if (ia == ib || ib == ic || ia == ic) {
      continue;
    }
    const Match2D3D* sample[3] = {&matches[ia], &matches[ib], &matches[ic]};
    if (sample[0]->landmark_id == sample[1]->landmark_id ||
        sample[1]->landmark_id == sample[2]->landmark_id ||
        sample[0]->landmark_id == sample[2]->landmark_id) {
      continue;
    }
    std::array<BearingPointPair, 3> obs;
    for (int k = 0; k < 3; ++k) {
      obs[k].bearing = camera.bearing(frame.keypoints.at(sample[k]->keypoint_idx).uv);
      obs[k].point = map.global_landmark_position(sample[k]->landmark_id);
    }
    std::vector<RigidTransform> candidates;
    try {
      candidates = p3p_minimal(obs);
    } catch (const DegenerateConfiguration&) {
      continue;
    }
    for (const RigidTransform& T_global_camera : candidates) {
      const RigidTransform T_global_body =
          T_global_camera * camera.T_body_camera.inverse();
      const auto inliers = classify_inliers(matches, frame, camera, map,
                                            T_global_body, config.inlier_px);
      const std::size_t support =
          static_cast<std::size_t>(support_count(matches, inliers));
      if (support > best_inliers) {
        best_inliers = support;
        best_pose = T_global_body;
        const double w =
            static_cast<double>(best_inliers) / static_cast<double>(matches.size());
        const double denom = std::log(1.0 - std::min(0.999999, w * w * w));
        if (denom < 0.0) {
          max_iterations = std::min(
              max_iterations,
              iter + 1 +
                  static_cast<int>(std::ceil(
                      std::log(1.0 - config.success_probability) / denom)));
        }
      }
    }
  }

  if (static_cast<int>(best_inliers) < config.min_inliers) {
    return result;
  }
  auto inliers =
      classify_inliers(matches, frame, camera, map, best_pose, config.inlier_px);
  const RigidTransform refined = refine_pose(matches, inliers, frame, camera, map,
                                             best_pose, config.refine_iterations);
  inliers = classify_inliers(matches, frame, camera, map, refined, config.inlier_px);
  const int support = support_count(matches, inliers);
  if (support < config.min_inliers) {
    return result;
  }
  result.T_global_body = refined;
  result.inlier_count = support;
  result.inlier_indices = std::move(inliers);
  result.status = LocalizationStatus::Localized;
  return result;
}

LocalizationResult localize_frame(const VisualFrame& frame, const PinholeCamera& camera,
                                  const Map& map, const InvertedMultiIndex& index,
                                  const DescriptorProjection& projection,
                                  const LocalizeConfig& config,
                                  double* query_seconds) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto matches = query_frame_matches(frame, kInvalidId, 0, index, projection,
                                           map, config.match);
  LocalizationResult result = pnp_ransac(matches, frame, camera, map, config.pnp);
  if (query_seconds) {
    *query_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
  return result;
}

}  // namespace atlas
