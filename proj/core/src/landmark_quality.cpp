#include "atlas/landmark_quality.hpp"

#include <cmath>
#include <set>
#include <vector>

#include "atlas/errors.hpp"

namespace atlas {

const char* to_string(QualityReason reason) {
  switch (reason) {
    case QualityReason::Passed:
      return "Passed";
    case QualityReason::TooFewObservers:
      return "TooFewObservers";
    case QualityReason::LowDisparity:
      return "LowDisparity";
    case QualityReason::TooFar:
      return "TooFar";
  }
  return "?";
}

QualityVerdict evaluate_landmark(const Landmark& landmark, const Map& map,
                                 const QualityThresholds& thresholds) {
  // Geometry in the host mission frame; all observers of a landmark belong
  // to missions, but rays only make sense in one consistent frame, so work
  // globally.
  const Eigen::Vector3d p_global = map.global_landmark_position(landmark.id);

  std::set<VertexId> observer_set;
  for (const Backlink& link : landmark.backlinks) {
    if (!map.has_vertex(link.vertex_id)) {
      throw DanglingBacklink("landmark " + std::to_string(landmark.id) +
                             " backlink to missing vertex " +
                             std::to_string(link.vertex_id));
    }
    observer_set.insert(link.vertex_id);
  }

  if (static_cast<int>(observer_set.size()) < thresholds.min_observers) {
    return {LandmarkQuality::Bad, QualityReason::TooFewObservers};
  }

  std::vector<Eigen::Vector3d> rays;
  double min_distance = std::numeric_limits<double>::infinity();
  for (VertexId vid : observer_set) {
    const Eigen::Vector3d origin = map.global_vertex_pose(vid).translation();
    const Eigen::Vector3d ray = p_global - origin;
    min_distance = std::min(min_distance, ray.norm());
    rays.push_back(ray.normalized());
  }

  double max_angle = 0.0;
  for (std::size_t i = 0; i < rays.size(); ++i) {
    for (std::size_t j = i + 1; j < rays.size(); ++j) {
      const double c = std::clamp(rays[i].dot(rays[j]), -1.0, 1.0);
      max_angle = std::max(max_angle, std::acos(c));
    }
  }
  if (max_angle < thresholds.min_disparity_deg * M_PI / 180.0) {
    return {LandmarkQuality::Bad, QualityReason::LowDisparity};
  }

  if (min_distance > thresholds.max_distance_m) {
    return {LandmarkQuality::Bad, QualityReason::TooFar};
  }
  return {LandmarkQuality::Good, QualityReason::Passed};
}

QualityCounts filter_landmarks(Map& map, const QualityThresholds& thresholds) {
  QualityCounts counts;
  std::vector<std::pair<LandmarkId, LandmarkQuality>> verdicts;
  verdicts.reserve(map.landmarks().size());
  for (const auto& [id, l] : map.landmarks()) {
    const QualityVerdict v = evaluate_landmark(l, map, thresholds);
    verdicts.emplace_back(id, v.quality);
    if (v.quality == LandmarkQuality::Good) {
      ++counts.good;
    } else {
      ++counts.bad;
    }
  }
  for (const auto& [id, q] : verdicts) {
    map.landmark(id).quality = q;
  }
  return counts;
}

}  // namespace atlas
