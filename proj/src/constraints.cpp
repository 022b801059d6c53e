#include "vhsim/constraints.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "vhsim/errors.hpp"

namespace vhsim {

Obstacle Obstacle::half_space(std::string name, const Eigen::Vector3d& normal, double offset) {
  Obstacle o;
  o.name = std::move(name);
  o.kind = Kind::half_space;
  o.normal = normal;
  o.offset = offset;
  validate(o);
  return o;
}

Obstacle Obstacle::sphere(std::string name, const Eigen::Vector3d& center, double radius) {
  Obstacle o;
  o.name = std::move(name);
  o.kind = Kind::sphere;
  o.center = center;
  o.radius = radius;
  validate(o);
  return o;
}

double Obstacle::signed_distance(const Eigen::Vector3d& p, Eigen::Vector3d* outward) const {
  if (kind == Kind::half_space) {
    if (outward) *outward = normal;
    return normal.dot(p) - offset;
  }
  const Eigen::Vector3d d = p - center;
  const double r = d.norm();
  // The normal is undefined at the center; any unit vector will do.
  if (outward) *outward = r > 0.0 ? Eigen::Vector3d(d / r) : Eigen::Vector3d::UnitZ();
  return r - radius;
}

void validate(const Obstacle& obstacle) {
  const std::string where = "obstacle '" + obstacle.name + "'";
  if (obstacle.kind == Obstacle::Kind::half_space) {
    if (std::abs(obstacle.normal.norm() - 1.0) > 1e-12) throw ConfigurationError(where + ": normal must be unit");
    if (!std::isfinite(obstacle.offset)) throw ConfigurationError(where + ": offset must be finite");
  } else {
    if (!(obstacle.radius > 0.0) || !std::isfinite(obstacle.radius)) {
      throw ConfigurationError(where + ": radius must be positive");
    }
    if (!obstacle.center.allFinite()) throw ConfigurationError(where + ": center must be finite");
  }
}

std::vector<UnilateralConstraint> detect_constraints(const KinematicChain& chain, const SimState& state,
                                                     const std::vector<Obstacle>& obstacles,
                                                     const ConstraintOptions& options) {
  if (!(options.activation_margin > 0.0)) throw ConfigurationError("activation margin must be positive");
  std::vector<UnilateralConstraint> out;
  const int n = chain.dof();
  const auto& links = chain.links();

  if (options.joint_limits) {
    for (std::size_t i = 0; i < links.size(); ++i) {
      const LinkSpec& link = links[i];
      if (!link.limit || link.joint.kind == JointKind::floating_base) continue;
      const int li = static_cast<int>(i);
      const double q = state.joints[chain.coordinate_index(li)];
      const int col = chain.velocity_index(li);
      const double lower_gap = q - link.limit->lower;
      if (lower_gap < options.activation_margin) {
        UnilateralConstraint c;
        c.kind = ConstraintKind::joint_limit_lower;
        c.link = li;
        c.gap = lower_gap;
        c.row = Eigen::RowVectorXd::Zero(n);
        c.row[col] = 1.0;
        out.push_back(std::move(c));
      }
      const double upper_gap = link.limit->upper - q;
      if (upper_gap < options.activation_margin) {
        UnilateralConstraint c;
        c.kind = ConstraintKind::joint_limit_upper;
        c.link = li;
        c.gap = upper_gap;
        c.row = Eigen::RowVectorXd::Zero(n);
        c.row[col] = -1.0;
        out.push_back(std::move(c));
      }
    }
  }

  if (options.contacts && !obstacles.empty() && !chain.probes().empty()) {
    const auto frames = forward_kinematics(chain, state);
    const auto& probes = chain.probes();
    for (std::size_t p = 0; p < probes.size(); ++p) {
      const Eigen::Vector3d point = frames[static_cast<std::size_t>(probes[p].link)] * probes[p].point;
      for (std::size_t o = 0; o < obstacles.size(); ++o) {
        Eigen::Vector3d normal;
        const double gap = obstacles[o].signed_distance(point, &normal);
        if (!(gap < options.activation_margin)) continue;
        const Eigen::MatrixXd jac = frame_jacobian(chain, frames, probes[p].link, probes[p].point);
        UnilateralConstraint c;
        c.kind = ConstraintKind::point_contact;
        c.probe = static_cast<int>(p);
        c.obstacle = static_cast<int>(o);
        c.gap = gap;
        c.row = normal.transpose() * jac.topRows<3>();
        out.push_back(std::move(c));
      }
    }
  }
  return out;
}

double gap_bias(double gap, double dt, double gamma) { return (gap >= 0.0 ? gap : gamma * gap) / dt; }

LcpProblem assemble_lcp(const std::vector<UnilateralConstraint>& constraints, const VelocitySystem& system,
                        const Eigen::VectorXd& free_velocity, double dt, double gamma) {
  if (!(dt > 0.0)) throw ConfigurationError("LCP assembly needs a positive step");
  const auto m = static_cast<Eigen::Index>(constraints.size());
  const int n = system.size();
  LcpProblem p;
  p.rows.resize(m, n);
  p.w.resize(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const UnilateralConstraint& c = constraints[static_cast<std::size_t>(i)];
    if (c.row.size() != n) throw ConfigurationError("constraint row does not match the system size");
    p.rows.row(i) = c.row;
    p.w[i] = c.row.dot(free_velocity) + gap_bias(c.gap, dt, gamma);
  }
  if (m == 0) {
    p.m.resize(0, 0);
    return p;
  }
  const Eigen::MatrixXd mobility = system.solve(Eigen::MatrixXd(p.rows.transpose()));  // S^-1 J_c^T
  p.m = p.rows * mobility;
  p.m = 0.5 * (p.m + p.m.transpose()).eval();
  return p;
}

namespace {

struct Residuals {
  double natural = 0.0;
  double complementarity = 0.0;
};

Residuals residuals(const Eigen::VectorXd& f, const Eigen::VectorXd& slack) {
  Residuals r;
  for (Eigen::Index i = 0; i < f.size(); ++i) {
    r.natural = std::max(r.natural, std::abs(std::min(f[i], slack[i])));
    r.complementarity = std::max(r.complementarity, std::abs(f[i] * slack[i]));
  }
  return r;
}

/// Solves the equality system on the support of `f` and keeps the result when
/// it is a valid complementary point with a smaller natural residual.
bool refine_active_set(const Eigen::MatrixXd& m, const Eigen::VectorXd& w, Eigen::VectorXd& f, double scale) {
  std::vector<Eigen::Index> active;
  for (Eigen::Index i = 0; i < f.size(); ++i) {
    if (f[i] > 0.0) active.push_back(i);
  }
  Eigen::VectorXd candidate = Eigen::VectorXd::Zero(f.size());
  if (!active.empty()) {
    const auto k = static_cast<Eigen::Index>(active.size());
    Eigen::MatrixXd maa(k, k);
    Eigen::VectorXd wa(k);
    for (Eigen::Index a = 0; a < k; ++a) {
      wa[a] = w[active[a]];
      for (Eigen::Index b = 0; b < k; ++b) maa(a, b) = m(active[a], active[b]);
    }
    const Eigen::VectorXd fa = maa.completeOrthogonalDecomposition().solve(-wa);
    for (Eigen::Index a = 0; a < k; ++a) candidate[active[a]] = fa[a];
  }
  const double floor = -1e-12 * scale;
  if ((candidate.array() < floor).any()) return false;
  candidate = candidate.cwiseMax(0.0);
  const Eigen::VectorXd slack = m * candidate + w;
  if ((slack.array() < floor).any()) return false;
  if (residuals(candidate, slack).natural > residuals(f, m * f + w).natural) return false;
  f = candidate;
  return true;
}

}  // namespace

ContactSolution solve_lcp(const Eigen::MatrixXd& m, const Eigen::VectorXd& w, const LcpOptions& options) {
  const Eigen::Index size = w.size();
  if (m.rows() != size || m.cols() != size) throw ConfigurationError("LCP matrix does not match the bias vector");
  if (!m.allFinite() || !w.allFinite()) throw NumericalFault("non-finite LCP data");
  ContactSolution sol;
  sol.f = Eigen::VectorXd::Zero(size);
  if (size == 0) {
    sol.slack = w;
    return sol;
  }
  const double scale = std::max(1.0, w.cwiseAbs().maxCoeff());
  const double tolerance = options.tolerance * scale;
  const double max_diag = m.diagonal().cwiseAbs().maxCoeff();

  Eigen::VectorXd& f = sol.f;
  double best = std::numeric_limits<double>::infinity();
  for (int it = 0; it < options.max_iterations; ++it) {
    for (Eigen::Index i = 0; i < size; ++i) {
      const double mii = m(i, i);
      // A vanishing diagonal of a PSD matrix means a vanishing row: the
      // force has no effect and stays at zero.
      if (!(mii > 1e-14 * max_diag)) continue;
      const double r = m.row(i).dot(f) + w[i];
      f[i] = std::max(0.0, f[i] - r / mii);
    }
    sol.iterations = it + 1;
    best = residuals(f, m * f + w).natural;
    if (best <= tolerance) break;
  }
  refine_active_set(m, w, f, scale);
  sol.slack = m * f + w;
  const Residuals r = residuals(f, sol.slack);
  sol.residual = r.complementarity;
  if (r.natural > tolerance) {
    std::ostringstream msg;
    msg << "LCP solver did not converge after " << sol.iterations << " iterations (residual " << r.natural << ")";
    throw LcpNonConvergence(msg.str(), std::min(best, r.natural));
  }
  return sol;
}

TorqueVector constraint_torques(const std::vector<UnilateralConstraint>& constraints, const ContactSolution& solution,
                                int dof) {
  if (solution.f.size() != static_cast<Eigen::Index>(constraints.size())) {
    throw ConfigurationError("constraint forces do not match the constraint list");
  }
  TorqueVector t{Eigen::VectorXd::Zero(dof), TorqueSource::constraint};
  for (std::size_t i = 0; i < constraints.size(); ++i) {
    t.values += constraints[i].row.transpose() * solution.f[static_cast<Eigen::Index>(i)];
  }
  return t;
}

}  // namespace vhsim
