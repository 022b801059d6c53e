#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "vhsim/chain.hpp"

namespace vhsim {

enum class TorqueSource { task, internal, constraint, guide, external };

/// Joint torques Gamma (N m or N) tagged with their origin.
struct TorqueVector {
  Eigen::VectorXd values;
  TorqueSource source = TorqueSource::external;
};

/// One damped-spring task as seen by the velocity solve: the wrench
/// K * error + B_c * (desired_twist - J qdot) acts through `jacobian`.
/// Dimensions are k x n, k x k, k x k, k and k (k = 6 for a full frame).
struct ImplicitTask {
  Eigen::MatrixXd jacobian;
  Eigen::MatrixXd stiffness;
  Eigen::MatrixXd damping;
  Eigen::VectorXd error;
  Eigen::VectorXd desired_twist;
};

struct VelocitySolveReport {
  Eigen::VectorXd qdot;
  /// Ratio of extreme eigenvalues (or the LLT reciprocal-condition estimate
  /// when the factorization is comfortably definite).
  double system_matrix_condition = 1.0;
  bool solvable = false;
};

/// Symmetric system matrix S = B_a + sum J^T B_c J and its factorization.
class VelocitySystem {
 public:
  /// Relative eigenvalue threshold below which S is declared singular.
  static constexpr double kSingularThreshold = 1e-12;

  explicit VelocitySystem(Eigen::MatrixXd matrix);

  static VelocitySystem assemble(const Eigen::MatrixXd& damping, std::span<const ImplicitTask> tasks);

  const Eigen::MatrixXd& matrix() const { return matrix_; }
  bool solvable() const { return solvable_; }
  double condition() const { return condition_; }
  int size() const { return static_cast<int>(matrix_.rows()); }

  /// S^-1 rhs; throws SingularityError when !solvable().
  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const;
  Eigen::MatrixXd solve(const Eigen::MatrixXd& rhs) const;

 private:
  Eigen::MatrixXd matrix_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  bool use_llt_ = false;
  Eigen::MatrixXd eigenvectors_;
  Eigen::VectorXd eigenvalues_;
  bool solvable_ = false;
  double condition_ = 1.0;
};

/// Right-hand side sum J^T (K e + B_c v_d) of the implicit task solve.
Eigen::VectorXd task_rhs(std::span<const ImplicitTask> tasks, int dof);

/// qdot = B_a^-1 sum Gamma. Requires B_a positive definite; throws
/// SingularityError otherwise (use the implicit path).
Eigen::VectorXd solve_velocity_explicit(const Eigen::MatrixXd& damping, std::span<const TorqueVector> torques);
Eigen::VectorXd solve_velocity_explicit(const KinematicChain& chain, std::span<const TorqueVector> torques);

/// Solves (B_a + sum J^T B_c J) qdot = sum J^T (K e + B_c v_d) + external.
/// A singular system is reported through `solvable == false`, never thrown.
VelocitySolveReport solve_velocity_implicit(const Eigen::MatrixXd& damping, std::span<const ImplicitTask> tasks,
                                            const Eigen::VectorXd& external_torque);
VelocitySolveReport solve_velocity_implicit(const KinematicChain& chain, std::span<const ImplicitTask> tasks,
                                            const Eigen::VectorXd& external_torque);

}  // namespace vhsim
