#pragma once

#include <vector>

#include "atlas/map.hpp"
#include "atlas/residuals.hpp"

namespace atlas {

struct SolverConfig {
  int max_iterations = 30;
  double relative_cost_tolerance = 1e-9;
  double huber_threshold_px = 2.0;  // on the whitened residual norm
  double initial_damping = 1e-6;
  bool force_dense = false;  // dense normal equations are the reference path
};

struct IterationStat {
  int iteration;
  double cost;
  double seconds;
};

struct OptimizeStats {
  double initial_cost = 0.0;
  double final_cost = 0.0;
  int iterations = 0;
  std::size_t num_residuals = 0;
  std::size_t num_states = 0;
  std::vector<IterationStat> per_iteration;
};

// Full-batch weighted least-squares refinement of all vertex poses and Good
// landmark positions (Bad landmarks untouched; baseframes held fixed — the
// missions are already anchored). Cost = Huber-robustified reprojection
// terms + covariance-whitened relative-pose terms; the first vertex of the
// reference mission fixes the gauge. Throws NoResiduals, SolverDiverged.
OptimizeStats optimize_full_batch(Map& map, const SolverConfig& config);

// Single Gauss-Newton step for the current map state, used to cross-check
// the sparse path against the dense reference. Returns the state update.
Eigen::VectorXd solve_normal_equations_once(const Map& map, const SolverConfig& config,
                                            bool dense, double damping);

}  // namespace atlas
