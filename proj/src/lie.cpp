#include "vhsim/lie.hpp"

#include <cmath>

namespace vhsim::lie {

Eigen::Matrix3d hat(const Eigen::Vector3d& w) {
  Eigen::Matrix3d m;
  m << 0.0, -w.z(), w.y(),
       w.z(), 0.0, -w.x(),
       -w.y(), w.x(), 0.0;
  return m;
}

Eigen::Quaterniond so3_exp(const Eigen::Vector3d& w) {
  const double theta = w.norm();
  double scale;
  double c;
  if (theta < kSmallAngle) {
    scale = 0.5 - theta * theta / 48.0;
    c = 1.0 - theta * theta / 8.0;
  } else {
    scale = std::sin(0.5 * theta) / theta;
    c = std::cos(0.5 * theta);
  }
  return Eigen::Quaterniond(c, scale * w.x(), scale * w.y(), scale * w.z());
}

Eigen::Vector3d so3_log(const Eigen::Quaterniond& q_in) {
  Eigen::Quaterniond q = q_in;
  if (q.w() < 0.0) q.coeffs() = -q.coeffs();
  const Eigen::Vector3d v = q.vec();
  const double s = v.norm();
  const double w = q.w();
  if (s < kSmallAngle) {
    // theta / s -> 2 / w as s -> 0
    return (2.0 / w) * (1.0 - s * s / (3.0 * w * w)) * v;
  }
  const double theta = 2.0 * std::atan2(s, w);
  return (theta / s) * v;
}

Eigen::Vector3d so3_log(const Eigen::Matrix3d& r) {
  return so3_log(Eigen::Quaterniond(r));
}

RigidMotion se3_exp(const Vector6d& xi) {
  const Eigen::Vector3d v = xi.head<3>();
  const Eigen::Vector3d w = xi.tail<3>();
  const double theta = w.norm();
  const Eigen::Matrix3d wx = hat(w);
  double a;
  double b;
  if (theta < kSmallAngle) {
    a = 0.5 - theta * theta / 24.0;
    b = 1.0 / 6.0 - theta * theta / 120.0;
  } else {
    const double t2 = theta * theta;
    a = (1.0 - std::cos(theta)) / t2;
    b = (theta - std::sin(theta)) / (t2 * theta);
  }
  const Eigen::Matrix3d left = Eigen::Matrix3d::Identity() + a * wx + b * wx * wx;
  RigidMotion m;
  m.rotation = so3_exp(w);
  m.translation = left * v;
  return m;
}

Vector6d se3_bracket(const Vector6d& a, const Vector6d& b) {
  const Eigen::Vector3d va = a.head<3>();
  const Eigen::Vector3d wa = a.tail<3>();
  const Eigen::Vector3d vb = b.head<3>();
  const Eigen::Vector3d wb = b.tail<3>();
  Vector6d out;
  out.head<3>() = wa.cross(vb) - wb.cross(va);
  out.tail<3>() = wa.cross(wb);
  return out;
}

Vector6d dexpinv(const Vector6d& u, const Vector6d& v) {
  const Vector6d uv = se3_bracket(u, v);
  return v - 0.5 * uv + (1.0 / 12.0) * se3_bracket(u, uv);
}

Matrix6d adjoint(const Eigen::Isometry3d& t) {
  const Eigen::Matrix3d r = t.linear();
  Matrix6d ad = Matrix6d::Zero();
  ad.topLeftCorner<3, 3>() = r;
  ad.topRightCorner<3, 3>() = hat(t.translation()) * r;
  ad.bottomRightCorner<3, 3>() = r;
  return ad;
}

Vector6d pose_error(const Eigen::Isometry3d& desired, const Eigen::Isometry3d& current) {
  Vector6d e;
  e.head<3>() = desired.translation() - current.translation();
  e.tail<3>() = so3_log(Eigen::Matrix3d(desired.linear() * current.linear().transpose()));
  return e;
}

Vector6d finite_twist(const Eigen::Isometry3d& from, const Eigen::Isometry3d& to, double dt) {
  return pose_error(to, from) / dt;
}

Eigen::Isometry3d make_pose(const Eigen::Vector3d& position, const Eigen::Quaterniond& orientation) {
  Eigen::Isometry3d t = Eigen::Isometry3d::Identity();
  t.linear() = orientation.normalized().toRotationMatrix();
  t.translation() = position;
  return t;
}

}  // namespace vhsim::lie
