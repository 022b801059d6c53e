#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "vhsim/chain.hpp"
#include "vhsim/dynamics.hpp"

namespace vhsim {

/// Static environment geometry. The free side of a half-space is
/// normal . p >= offset; a sphere is solid.
struct Obstacle {
  enum class Kind { half_space, sphere };

  std::string name;
  Kind kind = Kind::half_space;
  Eigen::Vector3d normal = Eigen::Vector3d::UnitZ();
  double offset = 0.0;
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  double radius = 1.0;

  static Obstacle half_space(std::string name, const Eigen::Vector3d& normal, double offset);
  static Obstacle sphere(std::string name, const Eigen::Vector3d& center, double radius);

  /// Signed distance of `p` (negative inside) and the outward unit normal there.
  double signed_distance(const Eigen::Vector3d& p, Eigen::Vector3d* outward = nullptr) const;
};

/// Throws ConfigurationError for a non-unit normal or a non-positive radius.
void validate(const Obstacle& obstacle);

enum class ConstraintKind { joint_limit_lower, joint_limit_upper, point_contact };

/// g(q) >= 0 with its gradient along the generalized velocity (1 x n).
struct UnilateralConstraint {
  ConstraintKind kind = ConstraintKind::point_contact;
  /// Link whose joint is limited (joint limits).
  int link = -1;
  /// Probe and obstacle indices (point contacts).
  int probe = -1;
  int obstacle = -1;
  double gap = 0.0;
  Eigen::RowVectorXd row;
};

struct ConstraintOptions {
  /// Constraints with gap below the margin are kept (m for contacts, rad or
  /// m for joint limits).
  double activation_margin = 0.05;
  bool joint_limits = true;
  bool contacts = true;
};

std::vector<UnilateralConstraint> detect_constraints(const KinematicChain& chain, const SimState& state,
                                                     const std::vector<Obstacle>& obstacles,
                                                     const ConstraintOptions& options = {});

/// Velocity-level LCP: find f >= 0 with M f + w >= 0 and f^T (M f + w) = 0.
struct LcpProblem {
  Eigen::MatrixXd m;
  Eigen::VectorXd w;
  /// J_c stacked row by row (m x n).
  Eigen::MatrixXd rows;
};

/// Gap-rate bias for the next step: g / dt while separated, so the step may
/// close the gap but not overshoot it, and gamma g / dt once penetrated, which
/// pushes back a fraction gamma of the penetration per step.
double gap_bias(double gap, double dt, double gamma);

/// M = J_c S^-1 J_c^T and w = J_c u + gap_bias(g) for the system matrix S of
/// the implicit velocity solve and the constraint-free velocity u.
LcpProblem assemble_lcp(const std::vector<UnilateralConstraint>& constraints, const VelocitySystem& system,
                        const Eigen::VectorXd& free_velocity, double dt, double gamma = 0.2);

struct ContactSolution {
  Eigen::VectorXd f;
  /// M f + w.
  Eigen::VectorXd slack;
  /// max |f_i slack_i|.
  double residual = 0.0;
  int iterations = 0;
};

struct LcpOptions {
  double tolerance = 1e-10;
  int max_iterations = 2000;
};

/// Projected Gauss-Seidel followed by an active-set refinement. Throws
/// LcpNonConvergence (carrying the best residual) when the natural residual
/// max |min(f_i, slack_i)| stays above tolerance * max(1, |w|_inf).
ContactSolution solve_lcp(const Eigen::MatrixXd& m, const Eigen::VectorXd& w, const LcpOptions& options = {});

/// Gamma_c = J_c^T f.
TorqueVector constraint_torques(const std::vector<UnilateralConstraint>& constraints, const ContactSolution& solution,
                                int dof);

}  // namespace vhsim
