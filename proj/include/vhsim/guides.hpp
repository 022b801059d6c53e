#pragma once

#include <optional>
#include <string>

#include <Eigen/Dense>

#include "vhsim/chain.hpp"
#include "vhsim/lie.hpp"

namespace vhsim {

/// Damped spring between a manikin frame and the guide's tool frame.
struct GuideCoupling {
  FrameRef manikin_frame;
  /// K_g, symmetric positive semi-definite.
  Matrix6d stiffness = Matrix6d::Zero();
  /// B_g, symmetric positive definite while the guide is active.
  Matrix6d damping = Matrix6d::Zero();
};

/// Auxiliary first-order mechanism (its chain's damping is B_v) whose tool
/// frame drags the manikin frame through the coupling.
struct VirtualMechanism {
  std::string name;
  KinematicChain chain;
  FrameRef tool_frame;
  GuideCoupling coupling;
  /// Reference axis in world coordinates used by axis_error reporting.
  Eigen::Vector3d ideal_axis = Eigen::Vector3d::UnitX();
  /// Axis of the coupled manikin frame, in that frame's coordinates.
  Eigen::Vector3d tool_axis_local = Eigen::Vector3d::UnitX();
};

/// B_v must be positive definite, coupling gains symmetric with K_g PSD and
/// B_g PSD. Throws ConfigurationError.
void validate(const VirtualMechanism& mech);

/// True when the coupling carries no stiffness and no damping.
bool is_inert(const GuideCoupling& coupling);

/// Kinematic quantities of one coupling, all at the manikin frame's origin.
struct CouplingGeometry {
  Eigen::Isometry3d manikin_pose = Eigen::Isometry3d::Identity();
  Eigen::Isometry3d tool_pose = Eigen::Isometry3d::Identity();
  /// (p_tool - p_manikin; log(R_tool R_manikin^T)).
  Vector6d error = Vector6d::Zero();
  /// 6 x n_manikin, twist of the manikin frame.
  Eigen::MatrixXd manikin_jacobian;
  /// 6 x n_guide, twist of the guide body point currently coincident with the
  /// manikin frame origin.
  Eigen::MatrixXd guide_jacobian;
};

CouplingGeometry coupling_geometry(const VirtualMechanism& mech, const KinematicChain& manikin,
                                   const SimState& manikin_state, const SimState& guide_state);

/// 1/2 e^T K_g e.
double coupling_potential(const VirtualMechanism& mech, const CouplingGeometry& geometry);

struct GuideWrenches {
  /// W = K_g e + B_g (v_guide - v_manikin), applied to the manikin.
  Vector6d on_manikin = Vector6d::Zero();
  /// -W, applied to the guide at the same point.
  Vector6d on_guide = Vector6d::Zero();
};

GuideWrenches guide_wrenches(const VirtualMechanism& mech, const CouplingGeometry& geometry,
                             const Eigen::VectorXd& manikin_qdot, const Eigen::VectorXd& guide_qdot);

/// Explicit guide update with the manikin-side wrench W held over the step:
/// qdot_v = B_v^-1 J_v^T (-W), integrated like any chain. The wrench acts at
/// `point` (world), by default the tool frame origin.
SimState step_guide(const VirtualMechanism& mech, const SimState& guide_state, const Vector6d& manikin_wrench,
                    double dt, const std::optional<Eigen::Vector3d>& point = std::nullopt);

/// Angle in [0, pi] between the world image of `tool_axis_local` and `ideal_axis`.
double axis_error(const Eigen::Isometry3d& tool_pose, const Eigen::Vector3d& ideal_axis,
                  const Eigen::Vector3d& tool_axis_local);

/// Moves the guide along its own coordinates (damped least squares, joint
/// limits respected) to reduce the coupling error. Used when a guide is
/// switched on so the spring does not start stretched. Never increases the
/// coupling potential.
SimState reseat_guide(const VirtualMechanism& mech, const KinematicChain& manikin, const SimState& manikin_state,
                      const SimState& guide_state);

}  // namespace vhsim
