#include "vhsim/guides.hpp"

#include <algorithm>
#include <cmath>

#include "vhsim/errors.hpp"

namespace vhsim {

namespace {

void check_gain(const Matrix6d& m, const std::string& where) {
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12) throw ConfigurationError(where + " must be symmetric");
  Eigen::SelfAdjointEigenSolver<Matrix6d> eig(m, Eigen::EigenvaluesOnly);
  if (eig.eigenvalues().minCoeff() < -1e-12) throw ConfigurationError(where + " must be positive semi-definite");
}

Eigen::MatrixXd guide_point_jacobian(const VirtualMechanism& mech, const std::vector<Eigen::Isometry3d>& frames,
                                     const Eigen::Vector3d& world_point) {
  const Eigen::Isometry3d& link = frames[static_cast<std::size_t>(mech.tool_frame.link)];
  return frame_jacobian(mech.chain, frames, mech.tool_frame.link, link.inverse() * world_point);
}

}  // namespace

void validate(const VirtualMechanism& mech) {
  const std::string where = "guide '" + mech.name + "'";
  const Eigen::MatrixXd& bv = mech.chain.damping();
  Eigen::LLT<Eigen::MatrixXd> llt(bv);
  if (bv.rows() == 0 || llt.info() != Eigen::Success) {
    throw ConfigurationError(where + ": mechanism damping B_v must be positive definite");
  }
  if (mech.tool_frame.link < 0 || mech.tool_frame.link >= static_cast<int>(mech.chain.links().size())) {
    throw ConfigurationError(where + ": tool frame refers to an invalid link");
  }
  check_gain(mech.coupling.stiffness, where + ": coupling stiffness");
  check_gain(mech.coupling.damping, where + ": coupling damping");
  if (std::abs(mech.ideal_axis.norm() - 1.0) > 1e-9 || std::abs(mech.tool_axis_local.norm() - 1.0) > 1e-9) {
    throw ConfigurationError(where + ": axes must have unit norm");
  }
}

bool is_inert(const GuideCoupling& coupling) {
  return coupling.stiffness.isZero(0.0) && coupling.damping.isZero(0.0);
}

CouplingGeometry coupling_geometry(const VirtualMechanism& mech, const KinematicChain& manikin,
                                   const SimState& manikin_state, const SimState& guide_state) {
  const auto manikin_frames = forward_kinematics(manikin, manikin_state);
  const auto guide_frames = forward_kinematics(mech.chain, guide_state);
  const FrameRef& mf = mech.coupling.manikin_frame;
  CouplingGeometry g;
  g.manikin_pose = frame_pose(manikin_frames, mf);
  g.tool_pose = frame_pose(guide_frames, mech.tool_frame);
  g.error = lie::pose_error(g.tool_pose, g.manikin_pose);
  g.manikin_jacobian = frame_jacobian(manikin, manikin_frames, mf.link, mf.point);
  g.guide_jacobian = guide_point_jacobian(mech, guide_frames, g.manikin_pose.translation());
  return g;
}

double coupling_potential(const VirtualMechanism& mech, const CouplingGeometry& geometry) {
  return 0.5 * geometry.error.dot(mech.coupling.stiffness * geometry.error);
}

GuideWrenches guide_wrenches(const VirtualMechanism& mech, const CouplingGeometry& geometry,
                             const Eigen::VectorXd& manikin_qdot, const Eigen::VectorXd& guide_qdot) {
  const Vector6d relative = geometry.guide_jacobian * guide_qdot - geometry.manikin_jacobian * manikin_qdot;
  GuideWrenches w;
  w.on_manikin = mech.coupling.stiffness * geometry.error + mech.coupling.damping * relative;
  w.on_guide = -w.on_manikin;
  return w;
}

SimState step_guide(const VirtualMechanism& mech, const SimState& guide_state, const Vector6d& manikin_wrench,
                    double dt, const std::optional<Eigen::Vector3d>& point) {
  const auto frames = forward_kinematics(mech.chain, guide_state);
  const Eigen::Vector3d p = point ? *point : frame_pose(frames, mech.tool_frame).translation();
  const Eigen::MatrixXd jv = guide_point_jacobian(mech, frames, p);
  Eigen::LLT<Eigen::MatrixXd> llt(mech.chain.damping());
  if (llt.info() != Eigen::Success) throw ConfigurationError("guide '" + mech.name + "': B_v is not definite");
  const Eigen::VectorXd qdot = llt.solve(jv.transpose() * (-manikin_wrench));
  return integrate(mech.chain, guide_state, qdot, dt);
}

double axis_error(const Eigen::Isometry3d& tool_pose, const Eigen::Vector3d& ideal_axis,
                  const Eigen::Vector3d& tool_axis_local) {
  const Eigen::Vector3d actual = tool_pose.linear() * tool_axis_local;
  // Same angle as acos of the clamped dot product, but atan2 keeps full
  // precision near 0 and pi.
  return std::atan2(actual.cross(ideal_axis).norm(), actual.dot(ideal_axis));
}

SimState reseat_guide(const VirtualMechanism& mech, const KinematicChain& manikin, const SimState& manikin_state,
                      const SimState& guide_state) {
  const Matrix6d& k = mech.coupling.stiffness;
  if (k.isZero(0.0)) return guide_state;
  const auto manikin_frames = forward_kinematics(manikin, manikin_state);
  const Eigen::Isometry3d target = frame_pose(manikin_frames, mech.coupling.manikin_frame);
  const int n = mech.chain.dof();

  auto potential = [&](const SimState& s) {
    const Vector6d e = lie::pose_error(frame_pose(forward_kinematics(mech.chain, s), mech.tool_frame), target);
    return 0.5 * e.dot(k * e);
  };

  SimState best = guide_state;
  double best_u = potential(best);
  double lambda = 1e-6 * std::max(1.0, k.diagonal().maxCoeff());
  for (int it = 0; it < 50 && best_u > 1e-24; ++it) {
    const auto frames = forward_kinematics(mech.chain, best);
    const Eigen::Isometry3d tool = frame_pose(frames, mech.tool_frame);
    const Vector6d e = lie::pose_error(tool, target);
    const Eigen::MatrixXd j = frame_jacobian(mech.chain, frames, mech.tool_frame.link, mech.tool_frame.point);
    const Eigen::MatrixXd h = j.transpose() * k * j + lambda * Eigen::MatrixXd::Identity(n, n);
    const Eigen::VectorXd step = -h.ldlt().solve(j.transpose() * (k * e));
    SimState candidate = retract(mech.chain, best, step);
    const auto& links = mech.chain.links();
    for (std::size_t i = 0; i < links.size(); ++i) {
      if (!links[i].limit || links[i].joint.kind == JointKind::floating_base) continue;
      double& q = candidate.joints[mech.chain.coordinate_index(static_cast<int>(i))];
      q = std::clamp(q, links[i].limit->lower, links[i].limit->upper);
    }
    const double u = potential(candidate);
    if (u < best_u) {
      best = candidate;
      best_u = u;
      lambda *= 0.5;
    } else {
      lambda *= 10.0;
    }
  }
  best.t = guide_state.t;
  return best;
}

}  // namespace vhsim
