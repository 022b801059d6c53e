#pragma once

#include <functional>
#include <string>

#include <Eigen/Dense>

#include "vhsim/chain.hpp"
#include "vhsim/dynamics.hpp"
#include "vhsim/lie.hpp"

namespace vhsim {

/// Operational-space PD target for one frame of the skeleton.
struct TaskTarget {
  std::string name;
  FrameRef frame;
  Eigen::Isometry3d desired_pose = Eigen::Isometry3d::Identity();
  Vector6d desired_twist = Vector6d::Zero();
  /// K (N/m, N m/rad), symmetric positive semi-definite.
  Matrix6d stiffness = Matrix6d::Zero();
  /// B_c (N s/m, N m s/rad), symmetric positive definite.
  Matrix6d damping = Matrix6d::Identity();
};

/// Throws ConfigurationError when K or B_c break their invariants.
void validate(const TaskTarget& target);

/// f = K err(x_d, x) + B_c (v_d - v), with the rotation-log orientation error.
Vector6d task_force(const TaskTarget& target, const Eigen::Isometry3d& pose, const Vector6d& twist);

/// Spring potential 1/2 err^T K err stored in the task at `pose`.
double task_potential(const TaskTarget& target, const Eigen::Isometry3d& pose);

/// Task as consumed by the implicit velocity solve.
ImplicitTask implicit_task(const TaskTarget& target, const Eigen::Isometry3d& pose, const Eigen::MatrixXd& jacobian);

/// Internal (posture) potential U(q) with gain alpha. Gradients are taken
/// along the generalized velocity directions, so they have chain.dof() entries.
struct InternalPotential {
  std::function<double(const SimState&)> evaluate;
  std::function<Eigen::VectorXd(const SimState&)> gradient;
  double alpha = 0.0;
};

/// U(q) = 1/2 (q - q_ref)^T diag(w) (q - q_ref) on the scalar joints; the
/// floating base (if any) is left free.
InternalPotential quadratic_posture(const KinematicChain& chain, Eigen::VectorXd reference, Eigen::VectorXd weights,
                                    double alpha);

/// Which inner product the null-space projection is orthogonal in.
enum class ProjectionMetric {
  /// Orthogonal in the metric induced by B_a^-1. B_a^-1 Pi^T is then
  /// symmetric positive semi-definite for every B_a (production default).
  damping,
  /// Plain Euclidean orthogonal projector I - (J B_a^-1)^+ (J B_a^-1).
  /// Agrees with `damping` when B_a is a multiple of the identity.
  euclidean,
};

/// Pi^T projecting torques into Ker(J1 B_a^-1). Snapshot for one (q, J1).
struct Projection {
  Eigen::MatrixXd matrix;
  Eigen::MatrixXd source_jacobian;
  ProjectionMetric metric = ProjectionMetric::damping;
};

/// Moore-Penrose pseudo-inverse by SVD; singular values below
/// `relative_cutoff * sigma_max` are treated as zero.
Eigen::MatrixXd pseudo_inverse(const Eigen::MatrixXd& m, double relative_cutoff = 1e-10);

/// Builds Pi^T for the task Jacobian J1 (k x n). Throws SingularityError if
/// B_a is not invertible.
Projection build_internal_projection(const Eigen::MatrixXd& j1, const Eigen::MatrixXd& damping,
                                     ProjectionMetric metric = ProjectionMetric::damping);

/// Gamma_int = -alpha Pi^T dU/dq.
TorqueVector internal_torque(const InternalPotential& potential, const Projection& projection, const SimState& state);

/// ||Pi^T g - g|| / max(||g||, 1e-15) with g = dU/dq; zero when the
/// potential is self-projective at `state`.
double self_projectivity_residual(const InternalPotential& potential, const Projection& projection,
                                  const SimState& state);

}  // namespace vhsim
