#pragma once

#include <cstdint>
#include <vector>

#include "atlas/camera.hpp"
#include "atlas/map.hpp"
#include "atlas/matching.hpp"
#include "atlas/p3p.hpp"

namespace atlas {

enum class LocalizationStatus { Localized, NotLocalized };

struct LocalizationResult {
  RigidTransform T_global_body;  // meaningful only when Localized
  // Independent support: distinct keypoints and distinct landmarks both
  // counted, the smaller reported (duplicate matches are not extra evidence).
  int inlier_count = 0;
  int total_matches = 0;
  LocalizationStatus status = LocalizationStatus::NotLocalized;
  std::vector<int> inlier_indices;  // into the match list
};

struct PnpConfig {
  double inlier_px = 3.0;
  int min_inliers = 12;
  int max_iterations = 1000;
  double success_probability = 0.99;
  std::uint64_t seed = 7;
  int refine_iterations = 10;
};

struct LocalizeConfig {
  MatchConfig match;
  PnpConfig pnp;
};

// Seeded RANSAC over the three-point resection, inliers by reprojection
// error < inlier_px, winner refit by damped Gauss-Newton on all inliers.
// Returns NotLocalized (never throws) when no model reaches min_inliers.
LocalizationResult pnp_ransac(const std::vector<Match2D3D>& matches,
                              const VisualFrame& frame, const PinholeCamera& camera,
                              const Map& map, const PnpConfig& config);

// Full query pipeline: project descriptors -> k-NN retrieval ->
// covisibility filter -> PnP RANSAC. query_seconds is wall-clock.
LocalizationResult localize_frame(const VisualFrame& frame, const PinholeCamera& camera,
                                  const Map& map, const InvertedMultiIndex& index,
                                  const DescriptorProjection& projection,
                                  const LocalizeConfig& config,
                                  double* query_seconds = nullptr);

}  // namespace atlas
