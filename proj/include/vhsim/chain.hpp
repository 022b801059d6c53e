#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include "vhsim/lie.hpp"

namespace vhsim {

enum class JointKind { revolute, prismatic, floating_base };

struct JointSpec {
  JointKind kind = JointKind::revolute;
  /// Unit axis in the joint frame (ignored for the floating base).
  Eigen::Vector3d axis = Eigen::Vector3d::UnitZ();
};

struct JointLimit {
  double lower = 0.0;
  double upper = 0.0;
};

/// One rigid link and the joint that connects it to its parent.
///
/// The world frame of a link is `parent_frame * offset * joint_motion(q)`;
/// a link with `parent == -1` hangs from the world origin.
struct LinkSpec {
  std::string name;
  int parent = -1;
  Eigen::Isometry3d offset = Eigen::Isometry3d::Identity();
  /// Nominal length along the local x axis, in meters (rendering and tip probes).
  double length = 0.0;
  JointSpec joint;
  std::optional<JointLimit> limit;
};

/// Point probe rigidly attached to a link, tested against obstacles.
struct CollisionProbe {
  std::string name;
  int link = 0;
  Eigen::Vector3d point = Eigen::Vector3d::Zero();
};

/// A frame rigidly attached to a link: local origin and local orientation.
struct FrameRef {
  int link = 0;
  Eigen::Vector3d point = Eigen::Vector3d::Zero();
  Eigen::Quaterniond orientation = Eigen::Quaterniond::Identity();
};

/// Immutable tree-structured skeleton with its joint damping matrix B_a.
///
/// Velocity coordinates: the floating base (if any) contributes a body twist
/// (v; w) at indices 0..5, then each 1-DOF joint one entry in link order.
class KinematicChain {
 public:
  KinematicChain() = default;

  /// Validates topology, axes, limits and damping; throws ConfigurationError.
  KinematicChain(std::string name, std::vector<LinkSpec> links, Eigen::MatrixXd damping,
                 std::vector<CollisionProbe> probes = {});

  const std::string& name() const { return name_; }
  const std::vector<LinkSpec>& links() const { return links_; }
  const std::vector<CollisionProbe>& probes() const { return probes_; }
  const Eigen::MatrixXd& damping() const { return damping_; }

  /// Dimension of the generalized velocity.
  int dof() const { return dof_; }
  /// Number of scalar joint coordinates (excludes the floating base).
  int joint_count() const { return joint_count_; }
  bool has_floating_base() const { return floating_base_; }

  /// First velocity index of the joint driving `link`.
  int velocity_index(int link) const { return velocity_index_.at(link); }
  /// Index into SimState::joints for 1-DOF joints, -1 for the floating base.
  int coordinate_index(int link) const { return coordinate_index_.at(link); }

  /// Link index by name, or -1.
  int find_link(const std::string& name) const;
  int find_probe(const std::string& name) const;

  /// Returns a copy with a different damping matrix (validated).
  KinematicChain with_damping(Eigen::MatrixXd damping) const;

 private:
  std::string name_;
  std::vector<LinkSpec> links_;
  Eigen::MatrixXd damping_;
  std::vector<CollisionProbe> probes_;
  std::vector<int> velocity_index_;
  std::vector<int> coordinate_index_;
  int dof_ = 0;
  int joint_count_ = 0;
  bool floating_base_ = false;
};

/// Generalized coordinates of one chain at time t.
struct SimState {
  Eigen::Quaterniond base_orientation = Eigen::Quaterniond::Identity();
  Eigen::Vector3d base_position = Eigen::Vector3d::Zero();
  Eigen::VectorXd joints;
  double t = 0.0;
};

/// Zero configuration for `chain` at t = 0.
SimState make_state(const KinematicChain& chain);

/// World frame of every link, in link order.
std::vector<Eigen::Isometry3d> forward_kinematics(const KinematicChain& chain, const SimState& state);

/// World pose of a frame attached to a link, given precomputed link frames.
Eigen::Isometry3d frame_pose(const std::vector<Eigen::Isometry3d>& link_frames, const FrameRef& frame);

/// 6 x dof Jacobian mapping qdot to the (linear; angular) world twist of the
/// point `local_point` of `link`.
Eigen::MatrixXd frame_jacobian(const KinematicChain& chain, const SimState& state, int link,
                               const Eigen::Vector3d& local_point);

/// Same, reusing link frames already computed for `state`.
Eigen::MatrixXd frame_jacobian(const KinematicChain& chain, const std::vector<Eigen::Isometry3d>& link_frames,
                               int link, const Eigen::Vector3d& local_point);

/// Generalized velocity field used by the Lie-group integrator.
using VelocityField = std::function<Eigen::VectorXd(const SimState&)>;

/// Four-stage Runge-Kutta-Munthe-Kaas step for a state-dependent velocity.
/// The floating base is advanced on SE(3) through the exponential map; the
/// scalar joints follow the classical RK4 weights.
SimState integrate_rkmk4(const KinematicChain& chain, const SimState& state, const VelocityField& field,
                         double dt);

/// RKMK4 step with a velocity held constant over the step.
/// Throws NumericalFault on non-finite qdot (state is left untouched).
SimState integrate(const KinematicChain& chain, const SimState& state, const Eigen::VectorXd& qdot, double dt);

/// Retracts `state` along the generalized velocity direction `delta`
/// (state * exp(delta) on the base, plain addition on joints). Used by
/// finite-difference checks and small corrections.
SimState retract(const KinematicChain& chain, const SimState& state, const Eigen::VectorXd& delta);

}  // namespace vhsim
