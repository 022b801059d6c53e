#include "vhsim/dynamics.hpp"

#include <cmath>
#include <limits>

#include "vhsim/errors.hpp"

namespace vhsim {

namespace {

void check_task(const ImplicitTask& task, int dof) {
  const auto k = task.jacobian.rows();
  if (task.jacobian.cols() != dof || task.stiffness.rows() != k || task.stiffness.cols() != k ||
      task.damping.rows() != k || task.damping.cols() != k || task.error.size() != k ||
      task.desired_twist.size() != k) {
    throw ConfigurationError("implicit task dimensions are inconsistent with the chain");
  }
}

}  // namespace

VelocitySystem::VelocitySystem(Eigen::MatrixXd matrix) : matrix_(std::move(matrix)) {
  if (matrix_.rows() != matrix_.cols()) throw ConfigurationError("system matrix must be square");
  if (matrix_.size() == 0) {
    solvable_ = true;
    use_llt_ = true;
    return;
  }
  if (!matrix_.allFinite()) throw NumericalFault("system matrix has non-finite entries");
  // Symmetric by construction; remove round-off asymmetry before factorizing.
  matrix_ = 0.5 * (matrix_ + matrix_.transpose()).eval();

  llt_.compute(matrix_);
  if (llt_.info() == Eigen::Success) {
    const double rcond = llt_.rcond();
    if (rcond > 1e3 * kSingularThreshold) {
      use_llt_ = true;
      solvable_ = true;
      condition_ = 1.0 / rcond;
      return;
    }
  }
  // Near-singular: decide on the eigenvalue ratio and solve spectrally.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(matrix_);
  eigenvalues_ = eig.eigenvalues();
  eigenvectors_ = eig.eigenvectors();
  const double largest = eigenvalues_.cwiseAbs().maxCoeff();
  const double smallest = eigenvalues_.minCoeff();
  solvable_ = largest > 0.0 && smallest >= kSingularThreshold * largest;
  condition_ = smallest > 0.0 ? largest / smallest : std::numeric_limits<double>::infinity();
}

VelocitySystem VelocitySystem::assemble(const Eigen::MatrixXd& damping, std::span<const ImplicitTask> tasks) {
  const int dof = static_cast<int>(damping.rows());
  Eigen::MatrixXd s = damping;
  for (const ImplicitTask& task : tasks) {
    check_task(task, dof);
    s.noalias() += task.jacobian.transpose() * task.damping * task.jacobian;
  }
  return VelocitySystem(std::move(s));
}

Eigen::VectorXd VelocitySystem::solve(const Eigen::VectorXd& rhs) const {
  if (!solvable_) throw SingularityError("velocity system matrix is singular");
  if (rhs.size() != matrix_.rows()) throw ConfigurationError("right-hand side has the wrong dimension");
  if (use_llt_) return matrix_.size() == 0 ? Eigen::VectorXd() : Eigen::VectorXd(llt_.solve(rhs));
  return eigenvectors_ * (eigenvalues_.cwiseInverse().asDiagonal() * (eigenvectors_.transpose() * rhs));
}

Eigen::MatrixXd VelocitySystem::solve(const Eigen::MatrixXd& rhs) const {
  if (!solvable_) throw SingularityError("velocity system matrix is singular");
  if (rhs.rows() != matrix_.rows()) throw ConfigurationError("right-hand side has the wrong dimension");
  if (use_llt_) return matrix_.size() == 0 ? Eigen::MatrixXd(0, rhs.cols()) : Eigen::MatrixXd(llt_.solve(rhs));
  return eigenvectors_ * (eigenvalues_.cwiseInverse().asDiagonal() * (eigenvectors_.transpose() * rhs));
}

Eigen::VectorXd task_rhs(std::span<const ImplicitTask> tasks, int dof) {
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(dof);
  for (const ImplicitTask& task : tasks) {
    check_task(task, dof);
    rhs.noalias() += task.jacobian.transpose() * (task.stiffness * task.error + task.damping * task.desired_twist);
  }
  return rhs;
}

Eigen::VectorXd solve_velocity_explicit(const Eigen::MatrixXd& damping, std::span<const TorqueVector> torques) {
  const auto n = damping.rows();
  Eigen::VectorXd total = Eigen::VectorXd::Zero(n);
  for (const TorqueVector& t : torques) {
    if (t.values.size() != n) throw ConfigurationError("torque vector dimension does not match the chain");
    if (!t.values.allFinite()) throw NumericalFault("non-finite torque");
    total += t.values;
  }
  if (n == 0) return total;
  Eigen::LLT<Eigen::MatrixXd> llt(damping);
  if (llt.info() != Eigen::Success || llt.rcond() < VelocitySystem::kSingularThreshold) {
    throw SingularityError("damping matrix is not positive definite; use the implicit velocity solve");
  }
  return llt.solve(total);
}

Eigen::VectorXd solve_velocity_explicit(const KinematicChain& chain, std::span<const TorqueVector> torques) {
  return solve_velocity_explicit(chain.damping(), torques);
}

VelocitySolveReport solve_velocity_implicit(const Eigen::MatrixXd& damping, std::span<const ImplicitTask> tasks,
                                            const Eigen::VectorXd& external_torque) {
  const int dof = static_cast<int>(damping.rows());
  if (external_torque.size() != dof) throw ConfigurationError("external torque dimension does not match the chain");
  const VelocitySystem system = VelocitySystem::assemble(damping, tasks);
  VelocitySolveReport report;
  report.system_matrix_condition = system.condition();
  report.solvable = system.solvable();
  if (!report.solvable) {
    report.qdot = Eigen::VectorXd::Zero(dof);
    return report;
  }
  report.qdot = system.solve(Eigen::VectorXd(task_rhs(tasks, dof) + external_torque));
  return report;
}

VelocitySolveReport solve_velocity_implicit(const KinematicChain& chain, std::span<const ImplicitTask> tasks,
                                            const Eigen::VectorXd& external_torque) {
  return solve_velocity_implicit(chain.damping(), tasks, external_torque);
}

}  // namespace vhsim
