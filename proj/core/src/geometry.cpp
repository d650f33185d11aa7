#include "atlas/geometry.hpp"

#include <cmath>

namespace atlas {

Eigen::Matrix3d skew(const Eigen::Vector3d& v) {
  Eigen::Matrix3d m;
  m << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
  return m;
}

Eigen::Quaterniond exp_rotation(const Eigen::Vector3d& theta) {
  const double angle = theta.norm();
  double half_sinc;  // sin(angle/2) / angle
  if (angle < 1e-8) {
    half_sinc = 0.5 - angle * angle / 48.0;
  } else {
    half_sinc = std::sin(0.5 * angle) / angle;
  }
  Eigen::Quaterniond q(std::cos(0.5 * angle), half_sinc * theta.x(),
                       half_sinc * theta.y(), half_sinc * theta.z());
  q.normalize();
  return q;
}

Eigen::Vector3d log_rotation(const Eigen::Quaterniond& q_in) {
  Eigen::Quaterniond q = q_in.normalized();
  if (q.w() < 0.0) {
    q.coeffs() = -q.coeffs();
  }
  const Eigen::Vector3d v(q.x(), q.y(), q.z());
  const double sin_half = v.norm();
  const double cos_half = q.w();
  if (sin_half < 1e-10) {
    return 2.0 * v;  // first-order: angle ~ 2*sin(angle/2)
  }
  const double angle = 2.0 * std::atan2(sin_half, cos_half);
  return (angle / sin_half) * v;
}

Eigen::Matrix3d right_jacobian_inverse(const Eigen::Vector3d& theta) {
  const double angle = theta.norm();
  const Eigen::Matrix3d W = skew(theta);
  if (angle < 1e-6) {
    return Eigen::Matrix3d::Identity() + 0.5 * W + W * W / 12.0;
  }
  const double angle2 = angle * angle;
  const double coef =
      1.0 / angle2 - (1.0 + std::cos(angle)) / (2.0 * angle * std::sin(angle));
  return Eigen::Matrix3d::Identity() + 0.5 * W + coef * W * W;
}

Vector6d log_transform(const RigidTransform& T) {
  Vector6d out;
  out.head<3>() = log_rotation(T.rotation());
  out.tail<3>() = T.translation();
  return out;
}

}  // namespace atlas
