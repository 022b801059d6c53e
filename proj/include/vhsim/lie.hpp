#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>

namespace vhsim {

using Vector6d = Eigen::Matrix<double, 6, 1>;
using Matrix6d = Eigen::Matrix<double, 6, 6>;

/// Rotation and rigid-motion helpers. Twists are ordered (linear; angular)
/// everywhere in the code base, matching the rows of a frame Jacobian.
namespace lie {

/// Below this rotation angle the exponential and logarithm switch to series.
inline constexpr double kSmallAngle = 1e-8;

Eigen::Matrix3d hat(const Eigen::Vector3d& w);

/// Unit quaternion of the rotation vector `w`.
Eigen::Quaterniond so3_exp(const Eigen::Vector3d& w);

/// Rotation vector of `q`, angle in [0, pi].
Eigen::Vector3d so3_log(const Eigen::Quaterniond& q);
Eigen::Vector3d so3_log(const Eigen::Matrix3d& r);

/// Exponential of a twist xi = (v; w) expressed in the moving frame.
/// Returns the relative motion as rotation + translation.
struct RigidMotion {
  Eigen::Quaterniond rotation = Eigen::Quaterniond::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();
};
RigidMotion se3_exp(const Vector6d& xi);

/// Lie bracket [a, b] of se(3) in (linear; angular) ordering.
Vector6d se3_bracket(const Vector6d& a, const Vector6d& b);

/// Inverse of the left-trivialized dexp truncated after the third term,
/// sufficient for fourth-order Munthe-Kaas schemes:
///   dexpinv(u, v) = v - 1/2 [u, v] + 1/12 [u, [u, v]]
Vector6d dexpinv(const Vector6d& u, const Vector6d& v);

/// Adjoint of a rigid transform acting on (linear; angular) twists.
Matrix6d adjoint(const Eigen::Isometry3d& t);

/// Six-dimensional pose error (p_d - p; log(R_d R^T)) in world coordinates.
Vector6d pose_error(const Eigen::Isometry3d& desired, const Eigen::Isometry3d& current);

/// World-frame twist that moves `from` onto `to` in time `dt`.
Vector6d finite_twist(const Eigen::Isometry3d& from, const Eigen::Isometry3d& to, double dt);

Eigen::Isometry3d make_pose(const Eigen::Vector3d& position, const Eigen::Quaterniond& orientation);

}  // namespace lie
}  // namespace vhsim
