#include "atlas/residuals.hpp"

#include <Eigen/Cholesky>

namespace atlas {

ReprojectionResidual reprojection_residual(const Eigen::Vector3d& p_global,
                                           const RigidTransform& T_mission_body,
                                           const RigidTransform& T_global_mission,
                                           const PinholeCamera& camera,
                                           const Eigen::Vector2d& observed_px,
                                           double sigma_px) {
  const Eigen::Matrix3d R_gm = T_global_mission.rotation_matrix();
  const Eigen::Matrix3d R_mb = T_mission_body.rotation_matrix();
  const Eigen::Matrix3d R_bc = camera.T_body_camera.rotation_matrix();

  const Eigen::Vector3d p_mission =
      R_gm.transpose() * (p_global - T_global_mission.translation());
  const Eigen::Vector3d p_body =
      R_mb.transpose() * (p_mission - T_mission_body.translation());
  const Eigen::Vector3d p_camera =
      R_bc.transpose() * (p_body - camera.T_body_camera.translation());
  if (p_camera.z() <= 0.0) {
    throw BehindCamera("landmark behind camera (z = " +
                       std::to_string(p_camera.z()) + ")");
  }

  const double inv_z = 1.0 / p_camera.z();
  Eigen::Matrix<double, 2, 3> J_proj;  // d(pixel)/d(p_camera)
  J_proj << camera.fx * inv_z, 0.0, -camera.fx * p_camera.x() * inv_z * inv_z,
      0.0, camera.fy * inv_z, -camera.fy * p_camera.y() * inv_z * inv_z;
  const double inv_sigma = 1.0 / sigma_px;
  J_proj *= inv_sigma;

  ReprojectionResidual out;
  out.residual = (camera.project(p_camera) - observed_px) * inv_sigma;

  // Right perturbation of the vertex pose: p_body shifts by
  // [p_body]x dtheta - R_mb^T dt.
  Eigen::Matrix<double, 3, 6> dpb_dpose;
  dpb_dpose.leftCols<3>() = skew(p_body);
  dpb_dpose.rightCols<3>() = -R_mb.transpose();
  out.J_pose = J_proj * R_bc.transpose() * dpb_dpose;

  // Same structure one frame up for the baseframe.
  Eigen::Matrix<double, 3, 6> dpm_dbase;
  dpm_dbase.leftCols<3>() = skew(p_mission);
  dpm_dbase.rightCols<3>() = -R_gm.transpose();
  out.J_baseframe = J_proj * R_bc.transpose() * R_mb.transpose() * dpm_dbase;

  out.J_landmark = J_proj * R_bc.transpose() * R_mb.transpose() * R_gm.transpose();
  return out;
}

RelativePoseResidual relative_pose_residual_unwhitened(
    const RigidTransform& measured_from_to, const RigidTransform& pose_from,
    const RigidTransform& pose_to) {
  const RigidTransform T_est = pose_from.inverse() * pose_to;
  const Eigen::Matrix3d R_a = pose_from.rotation_matrix();
  const Eigen::Matrix3d R_b = pose_to.rotation_matrix();
  const Eigen::Matrix3d R_m = measured_from_to.rotation_matrix();

  const Eigen::Vector3d rho =
      log_rotation(measured_from_to.rotation().conjugate() * T_est.rotation());
  const Eigen::Vector3d tau = T_est.translation() - measured_from_to.translation();
  (void)R_m;

  const Eigen::Matrix3d Jr_inv = right_jacobian_inverse(rho);
  const Eigen::Matrix3d R_ba = R_b.transpose() * R_a;

  RelativePoseResidual out;
  out.residual.head<3>() = rho;
  out.residual.tail<3>() = tau;

  out.J_from.setZero();
  out.J_from.block<3, 3>(0, 0) = -Jr_inv * R_ba;
  out.J_from.block<3, 3>(3, 0) = skew(T_est.translation());
  out.J_from.block<3, 3>(3, 3) = -R_a.transpose();

  out.J_to.setZero();
  out.J_to.block<3, 3>(0, 0) = Jr_inv;
  out.J_to.block<3, 3>(3, 3) = R_a.transpose();
  return out;
}

RelativePoseResidual relative_pose_residual(const RigidTransform& measured_from_to,
                                            const Matrix6d& covariance,
                                            const RigidTransform& pose_from,
                                            const RigidTransform& pose_to) {
  RelativePoseResidual out =
      relative_pose_residual_unwhitened(measured_from_to, pose_from, pose_to);
  // Whitening with the inverse Cholesky factor: cov = L L^T, r' = L^{-1} r.
  const Eigen::LLT<Matrix6d> llt(covariance);
  const Matrix6d L = llt.matrixL();
  out.residual = L.triangularView<Eigen::Lower>().solve(out.residual);
  out.J_from = L.triangularView<Eigen::Lower>().solve(out.J_from);
  out.J_to = L.triangularView<Eigen::Lower>().solve(out.J_to);
  return out;
}

}  // namespace atlas
