#pragma once

#include "atlas/camera.hpp"
#include "atlas/geometry.hpp"
#include "atlas/map.hpp"

namespace atlas {

// Local parameterization everywhere: delta = [dtheta; dt] with
// R <- R * Exp(dtheta), t <- t + dt (see RigidTransform::retract).

struct ReprojectionResidual {
  Eigen::Vector2d residual;                     // (projected - observed) / sigma
  Eigen::Matrix<double, 2, 6> J_pose;           // wrt vertex pose (mission <- body)
  Eigen::Matrix<double, 2, 3> J_landmark;       // wrt global landmark position
  Eigen::Matrix<double, 2, 6> J_baseframe;      // wrt mission baseframe
};

// Throws BehindCamera when the landmark has non-positive depth.
ReprojectionResidual reprojection_residual(const Eigen::Vector3d& p_global,
                                           const RigidTransform& T_mission_body,
                                           const RigidTransform& T_global_mission,
                                           const PinholeCamera& camera,
                                           const Eigen::Vector2d& observed_px,
                                           double sigma_px);

struct RelativePoseResidual {
  Vector6d residual;  // whitened [Log(R_err); t_err]
  Matrix6d J_from;
  Matrix6d J_to;
};

// residual = W * [Log(R_m^T R_est); t_est - t_m] with T_est = T_from⁻¹ T_to
// and W the inverse Cholesky factor of the edge covariance.
RelativePoseResidual relative_pose_residual(const RigidTransform& measured_from_to,
                                            const Matrix6d& covariance,
                                            const RigidTransform& pose_from,
                                            const RigidTransform& pose_to);

// Unwhitened variant used by solvers that whiten themselves.
RelativePoseResidual relative_pose_residual_unwhitened(
    const RigidTransform& measured_from_to, const RigidTransform& pose_from,
    const RigidTransform& pose_to);

}  // namespace atlas
