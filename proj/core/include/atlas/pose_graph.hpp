#pragma once

#include <vector>

#include "atlas/alignment.hpp"
#include "atlas/map.hpp"
#include "atlas/residuals.hpp"

namespace atlas {

// Loop-closure constraint between two vertices, expressed on global poses:
// T_to ~= T_from * relative_pose. The switch scales the whitened residual
// and is pulled towards 1 by a quadratic prior; the optimizer drives it to 0
// for outlier closures.
struct LoopConstraint {
  VertexId from_vertex = kInvalidId;
  VertexId to_vertex = kInvalidId;
  RigidTransform relative_pose;
  Matrix6d covariance = Matrix6d::Identity();
  double switch_value = 1.0;
  double switch_prior_weight = 10.0;
};

struct LoopConstraintConfig {
  LoopEngineConfig engine;
  double sigma_rotation_rad = 0.01;
  double sigma_translation_m = 0.05;
  double switch_prior_weight = 10.0;
};

// One constraint per consensus set between a query vertex and the map vertex
// most covisible with the matched landmarks; duplicates per vertex pair are
// collapsed. Requires anchored missions; may be empty.
std::vector<LoopConstraint> build_loop_constraints(const Map& map,
                                                   const LoopConstraintConfig& config);

struct RelaxConfig {
  int max_iterations = 50;
  double relative_cost_tolerance = 1e-9;
  double initial_damping = 1e-6;
};

struct RelaxStats {
  double initial_cost = 0.0;
  double final_cost = 0.0;
  int iterations = 0;
  std::vector<double> switch_values;  // parallel to the input constraints
};

// Switchable-constraints pose-graph optimization over global vertex poses:
// minimizes sum |r_odom|²_Σ + s²|r_loop|²_Σ + w(1-s)² with Levenberg-
// Marquardt; the first vertex of the reference mission is the gauge (as is
// the first vertex of any component unreachable from it). Accepted steps
// never increase the cost; switches are clamped to [0,1]. Throws
// DisconnectedGraph when a mission chain is broken, SolverDiverged when no
// damping retry yields an acceptable first step.
RelaxStats relax(Map& map, std::vector<LoopConstraint>& constraints,
                 const RelaxConfig& config);

}  // namespace atlas
