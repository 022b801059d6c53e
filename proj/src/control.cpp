#include "vhsim/control.hpp"

#include <algorithm>

#include "vhsim/errors.hpp"

namespace vhsim {

namespace {

constexpr double kSymmetryTolerance = 1e-12;

bool symmetric(const Matrix6d& m) { return (m - m.transpose()).cwiseAbs().maxCoeff() <= kSymmetryTolerance; }

Eigen::LLT<Eigen::MatrixXd> factor_damping(const Eigen::MatrixXd& damping) {
  Eigen::LLT<Eigen::MatrixXd> llt(damping);
  if (damping.rows() > 0 && (llt.info() != Eigen::Success || llt.rcond() < 1e-12)) {
    throw SingularityError("projection requires an invertible damping matrix B_a");
  }
  return llt;
}

}  // namespace

void validate(const TaskTarget& target) {
  const std::string where = "task '" + target.name + "'";
  if (!symmetric(target.stiffness)) throw ConfigurationError(where + ": stiffness must be symmetric");
  if (!symmetric(target.damping)) throw ConfigurationError(where + ": damping must be symmetric");
  Eigen::SelfAdjointEigenSolver<Matrix6d> k(target.stiffness, Eigen::EigenvaluesOnly);
  if (k.eigenvalues().minCoeff() < -1e-12) throw ConfigurationError(where + ": stiffness must be positive semi-definite");
  Eigen::SelfAdjointEigenSolver<Matrix6d> b(target.damping, Eigen::EigenvaluesOnly);
  if (!(b.eigenvalues().minCoeff() > 0.0)) throw ConfigurationError(where + ": damping must be positive definite");
}

Vector6d task_force(const TaskTarget& target, const Eigen::Isometry3d& pose, const Vector6d& twist) {
  return target.stiffness * lie::pose_error(target.desired_pose, pose) + target.damping * (target.desired_twist - twist);
}

double task_potential(const TaskTarget& target, const Eigen::Isometry3d& pose) {
  const Vector6d e = lie::pose_error(target.desired_pose, pose);
  return 0.5 * e.dot(target.stiffness * e);
}

ImplicitTask implicit_task(const TaskTarget& target, const Eigen::Isometry3d& pose, const Eigen::MatrixXd& jacobian) {
  ImplicitTask t;
  t.jacobian = jacobian;
  t.stiffness = target.stiffness;
  t.damping = target.damping;
  t.error = lie::pose_error(target.desired_pose, pose);
  t.desired_twist = target.desired_twist;
  return t;
}

InternalPotential quadratic_posture(const KinematicChain& chain, Eigen::VectorXd reference, Eigen::VectorXd weights,
                                    double alpha) {
  if (reference.size() != chain.joint_count() || weights.size() != chain.joint_count()) {
    throw ConfigurationError("posture reference and weights must have one entry per joint");
  }
  if ((weights.array() < 0.0).any()) throw ConfigurationError("posture weights must be non-negative");
  if (alpha < 0.0) throw ConfigurationError("internal gain alpha must be non-negative");
  const int base = chain.has_floating_base() ? 6 : 0;
  const int dof = chain.dof();
  InternalPotential p;
  p.alpha = alpha;
  p.evaluate = [reference, weights](const SimState& s) {
    const Eigen::VectorXd d = s.joints - reference;
    return 0.5 * d.dot(weights.cwiseProduct(d));
  };
  p.gradient = [reference, weights, base, dof](const SimState& s) {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(dof);
    g.tail(dof - base) = weights.cwiseProduct(s.joints - reference);
    return g;
  };
  return p;
}

Eigen::MatrixXd pseudo_inverse(const Eigen::MatrixXd& m, double relative_cutoff) {
  if (m.size() == 0) return Eigen::MatrixXd::Zero(m.cols(), m.rows());
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& sigma = svd.singularValues();
  const double cutoff = relative_cutoff * (sigma.size() > 0 ? sigma[0] : 0.0);
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(sigma.size());
  for (Eigen::Index i = 0; i < sigma.size(); ++i) {
    if (sigma[i] > cutoff && sigma[i] > 0.0) inv[i] = 1.0 / sigma[i];
  }
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

Projection build_internal_projection(const Eigen::MatrixXd& j1, const Eigen::MatrixXd& damping,
                                     ProjectionMetric metric) {
  const auto n = damping.rows();
  if (damping.cols() != n || j1.cols() != n) throw ConfigurationError("projection Jacobian does not match B_a");
  const auto llt = factor_damping(damping);
  const Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(n, n);
  // A = J1 B_a^-1 = (B_a^-1 J1^T)^T since B_a is symmetric.
  const Eigen::MatrixXd mobility_t = llt.solve(j1.transpose());
  const Eigen::MatrixXd a = mobility_t.transpose();

  Projection p;
  p.source_jacobian = j1;
  p.metric = metric;
  if (metric == ProjectionMetric::euclidean) {
    p.matrix = identity - pseudo_inverse(a) * a;
  } else {
    // Pi^T = I - J1^T (J1 B_a^-1 J1^T)^+ J1 B_a^-1
    const Eigen::MatrixXd g = j1 * mobility_t;
    p.matrix = identity - j1.transpose() * pseudo_inverse(0.5 * (g + g.transpose())) * a;
  }
  return p;
}

TorqueVector internal_torque(const InternalPotential& potential, const Projection& projection, const SimState& state) {
  const Eigen::VectorXd g = potential.gradient(state);
  if (g.size() != projection.matrix.rows()) throw ConfigurationError("potential gradient does not match the projection");
  return TorqueVector{-potential.alpha * (projection.matrix * g), TorqueSource::internal};
}

double self_projectivity_residual(const InternalPotential& potential, const Projection& projection,
                                  const SimState& state) {
  const Eigen::VectorXd g = potential.gradient(state);
  if (g.size() != projection.matrix.rows()) throw ConfigurationError("potential gradient does not match the projection");
  return (projection.matrix * g - g).norm() / std::max(g.norm(), 1e-15);
}

}  // namespace vhsim
