#pragma once

#include <string>

#include "atlas/map.hpp"

namespace atlas {

struct QualityThresholds {
  int min_observers = 4;              // distinct observer vertices
  double min_disparity_deg = 5.0;     // max pairwise observation-ray angle
  double max_distance_m = 50.0;       // closest observer distance
};

enum class QualityReason {
  Passed,
  TooFewObservers,
  LowDisparity,
  TooFar,
};

struct QualityVerdict {
  LandmarkQuality quality;
  QualityReason reason;
};

const char* to_string(QualityReason reason);

// Checks observer count, then disparity, then distance; the reason names the
// first failed test. Throws DanglingBacklink.
QualityVerdict evaluate_landmark(const Landmark& landmark, const Map& map,
                                 const QualityThresholds& thresholds);

struct QualityCounts {
  std::size_t good = 0;
  std::size_t bad = 0;
};

// Sets every landmark's quality flag. Bad landmarks are kept in storage but
// ignored by all downstream stages.
QualityCounts filter_landmarks(Map& map, const QualityThresholds& thresholds);

}  // namespace atlas
