#include "atlas/rigid_ransac.hpp"

#include <cmath>
#include <random>

#include <Eigen/SVD>

#include "atlas/errors.hpp"

namespace atlas {

RigidTransform fit_rigid_transform(const std::vector<Eigen::Vector3d>& source,
                                   const std::vector<Eigen::Vector3d>& target) {
  if (source.size() < 3 || source.size() != target.size()) {
    throw InsufficientCorrespondences("rigid fit needs >= 3 paired points");
  }
  const std::size_t n = source.size();
  Eigen::Vector3d mean_src = Eigen::Vector3d::Zero();
  Eigen::Vector3d mean_tgt = Eigen::Vector3d::Zero();
  for (std::size_t i = 0; i < n; ++i) {
    mean_src += source[i];
    mean_tgt += target[i];
  }
  mean_src /= static_cast<double>(n);
  mean_tgt /= static_cast<double>(n);

  Eigen::Matrix3d cross = Eigen::Matrix3d::Zero();
  for (std::size_t i = 0; i < n; ++i) {
    cross += (target[i] - mean_tgt) * (source[i] - mean_src).transpose();
  }

  Eigen::JacobiSVD<Eigen::Matrix3d> svd(cross,
                                        Eigen::ComputeFullU | Eigen::ComputeFullV);
  if (svd.singularValues()(1) < 1e-12 * std::max(1.0, svd.singularValues()(0))) {
    throw DegenerateConfiguration("rigid fit on (near-)collinear points");
  }
  Eigen::Matrix3d R = svd.matrixU() * svd.matrixV().transpose();
  if (R.determinant() < 0.0) {
    Eigen::Matrix3d flip = Eigen::Matrix3d::Identity();
    flip(2, 2) = -1.0;
    R = svd.matrixU() * flip * svd.matrixV().transpose();
  }
  return RigidTransform(R, mean_tgt - R * mean_src);
}

AlignmentResult estimate_rigid_transform_ransac(
    const std::vector<PointCorrespondence>& correspondences,
    const RansacConfig& config) {
  const int n = static_cast<int>(correspondences.size());
  if (n < 3) {
    throw InsufficientCorrespondences("RANSAC needs >= 3 correspondences, got " +
                                      std::to_string(n));
  }

  std::mt19937_64 rng(config.seed);
  std::uniform_int_distribution<int> pick(0, n - 1);
  const double radius2 = config.inlier_radius_m * config.inlier_radius_m;

  std::vector<int> best_inliers;
  int max_iterations = config.max_iterations;
  for (int iter = 0; iter < max_iterations; ++iter) {
    int a = pick(rng), b = pick(rng), c = pick(rng);
    if (a == b || b == c || a == c) {
      continue;
    }
    RigidTransform model;
    try {
      model = fit_rigid_transform(
          {correspondences[a].source, correspondences[b].source,
           correspondences[c].source},
          {correspondences[a].target, correspondences[b].target,
           correspondences[c].target});
    } catch (const DegenerateConfiguration&) {
      continue;
    }

    std::vector<int> inliers;
    for (int i = 0; i < n; ++i) {
      const Eigen::Vector3d mapped = model * correspondences[i].source;
      if ((mapped - correspondences[i].target).squaredNorm() <= radius2) {
        inliers.push_back(i);
      }
    }
    if (inliers.size() > best_inliers.size()) {
      best_inliers = std::move(inliers);
      // Standard adaptive bound: N = log(1-p) / log(1 - w^3).
      const double w = static_cast<double>(best_inliers.size()) / n;
      const double denom = std::log(std::max(1e-12, 1.0 - w * w * w));
      if (denom < 0.0) {
        const int needed = static_cast<int>(
            std::ceil(std::log(1.0 - config.success_probability) / denom));
        max_iterations = std::min(max_iterations, std::max(iter + 1, needed));
      }
      if (best_inliers.size() == static_cast<std::size_t>(n)) {
        break;
      }
    }
  }

  if (static_cast<int>(best_inliers.size()) < std::max(3, config.min_inliers)) {
    throw NoConsensus("RANSAC found only " + std::to_string(best_inliers.size()) +
                      " inliers, need " + std::to_string(config.min_inliers));
  }

  std::vector<Eigen::Vector3d> src, tgt;
  src.reserve(best_inliers.size());
  tgt.reserve(best_inliers.size());
  for (int i : best_inliers) {
    src.push_back(correspondences[i].source);
    tgt.push_back(correspondences[i].target);
  }
  AlignmentResult result;
  result.transform = fit_rigid_transform(src, tgt);

  // Re-classify against the refit model.
  result.inlier_indices.clear();
  for (int i = 0; i < n; ++i) {
    const Eigen::Vector3d mapped = result.transform * correspondences[i].source;
    if ((mapped - correspondences[i].target).squaredNorm() <= radius2) {
      result.inlier_indices.push_back(i);
    }
  }
  result.inlier_count = static_cast<int>(result.inlier_indices.size());
  result.total_matches = n;
  return result;
}

}  // namespace atlas
