#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace atlas {

using Vector6d = Eigen::Matrix<double, 6, 1>;
using Matrix6d = Eigen::Matrix<double, 6, 6>;

Eigen::Matrix3d skew(const Eigen::Vector3d& v);

// Exponential map of so(3), returned as a unit quaternion.
Eigen::Quaterniond exp_rotation(const Eigen::Vector3d& theta);

// Logarithm map of SO(3): rotation vector with angle in [0, pi].
Eigen::Vector3d log_rotation(const Eigen::Quaterniond& q);

// Inverse of the right Jacobian of SO(3) at rotation vector theta.
Eigen::Matrix3d right_jacobian_inverse(const Eigen::Vector3d& theta);

// 6-DoF rigid transform: x_parent = R * x_child + t.
// The quaternion is renormalized on every construction and composition.
class RigidTransform {
 public:
  RigidTransform()
      : rotation_(Eigen::Quaterniond::Identity()),
        translation_(Eigen::Vector3d::Zero()) {}

  RigidTransform(const Eigen::Quaterniond& rotation,
                 const Eigen::Vector3d& translation)
      : rotation_(rotation.normalized()), translation_(translation) {}

  RigidTransform(const Eigen::Matrix3d& rotation,
                 const Eigen::Vector3d& translation)
      : rotation_(Eigen::Quaterniond(rotation).normalized()),
        translation_(translation) {}

  static RigidTransform Identity() { return RigidTransform(); }

  // Deserialization path: the quaternion is already unit-norm and must be
  // reproduced bit-identically, so renormalization is skipped.
  static RigidTransform from_normalized(const Eigen::Quaterniond& rotation,
                                        const Eigen::Vector3d& translation) {
    RigidTransform T;
    T.rotation_ = rotation;
    T.translation_ = translation;
    return T;
  }

  const Eigen::Quaterniond& rotation() const { return rotation_; }
  const Eigen::Vector3d& translation() const { return translation_; }
  Eigen::Vector3d& translation() { return translation_; }
  Eigen::Matrix3d rotation_matrix() const { return rotation_.toRotationMatrix(); }

  void set_rotation(const Eigen::Quaterniond& q) { rotation_ = q.normalized(); }

  RigidTransform inverse() const {
    const Eigen::Quaterniond qi = rotation_.conjugate();
    return RigidTransform(qi, qi * (-translation_));
  }

  RigidTransform operator*(const RigidTransform& other) const {
    return RigidTransform(rotation_ * other.rotation_,
                          rotation_ * other.translation_ + translation_);
  }

  Eigen::Vector3d operator*(const Eigen::Vector3d& point) const {
    return rotation_ * point + translation_;
  }

  // Right-perturbation retraction with delta = [dtheta; dt]:
  // R <- R * Exp(dtheta), t <- t + dt.
  RigidTransform retract(const Vector6d& delta) const {
    return RigidTransform(rotation_ * exp_rotation(delta.head<3>()),
                          translation_ + delta.tail<3>());
  }

  // Rotation angle of this⁻¹ ∘ other, in radians.
  double rotation_angle_to(const RigidTransform& other) const {
    return log_rotation(rotation_.conjugate() * other.rotation_).norm();
  }

  double translation_distance_to(const RigidTransform& other) const {
    return (translation_ - other.translation_).norm();
  }

 private:
  Eigen::Quaterniond rotation_;
  Eigen::Vector3d translation_;
};

// [Log(R); t] of the transform, rotation part first.
Vector6d log_transform(const RigidTransform& T);

}  // namespace atlas
