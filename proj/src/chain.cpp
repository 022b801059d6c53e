#include "vhsim/chain.hpp"

#include <cmath>
#include <sstream>

#include "vhsim/errors.hpp"

namespace vhsim {

namespace {

constexpr double kAxisTolerance = 1e-12;
constexpr double kSymmetryTolerance = 1e-12;
constexpr double kEigenTolerance = 1e-12;

void validate_damping(const Eigen::MatrixXd& damping, int dof) {
  if (damping.rows() != dof || damping.cols() != dof) {
    std::ostringstream msg;
    msg << "damping matrix is " << damping.rows() << "x" << damping.cols() << ", expected " << dof << "x" << dof;
    throw ConfigurationError(msg.str());
  }
  if (!damping.allFinite()) throw ConfigurationError("damping matrix has non-finite entries");
  if ((damping - damping.transpose()).cwiseAbs().maxCoeff() > kSymmetryTolerance) {
    throw ConfigurationError("damping matrix is not symmetric");
  }
  if (dof > 0) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(damping, Eigen::EigenvaluesOnly);
    if (eig.eigenvalues().minCoeff() < -kEigenTolerance) {
      throw ConfigurationError("damping matrix has a negative eigenvalue");
    }
  }
}

Eigen::Isometry3d joint_motion(const JointSpec& joint, double q) {
  Eigen::Isometry3d m = Eigen::Isometry3d::Identity();
  if (joint.kind == JointKind::revolute) {
    m.linear() = Eigen::AngleAxisd(q, joint.axis).toRotationMatrix();
  } else if (joint.kind == JointKind::prismatic) {
    m.translation() = q * joint.axis;
  }
  return m;
}

}  // namespace

KinematicChain::KinematicChain(std::string name, std::vector<LinkSpec> links, Eigen::MatrixXd damping,
                               std::vector<CollisionProbe> probes)
    : name_(std::move(name)), links_(std::move(links)), probes_(std::move(probes)) {
  if (links_.empty()) throw ConfigurationError("chain has no links");
  velocity_index_.resize(links_.size());
  coordinate_index_.resize(links_.size());
  for (std::size_t i = 0; i < links_.size(); ++i) {
    LinkSpec& link = links_[i];
    const std::string where = "link '" + link.name + "'";
    // Parents precede children, which rules out cycles.
    if (link.parent < -1 || link.parent >= static_cast<int>(i)) {
      throw ConfigurationError(where + ": parent index must refer to an earlier link");
    }
    if (link.joint.kind == JointKind::floating_base) {
      if (i != 0 || link.parent != -1) throw ConfigurationError(where + ": floating base must be the root link");
      floating_base_ = true;
      velocity_index_[i] = 0;
      coordinate_index_[i] = -1;
      dof_ += 6;
      continue;
    }
    if (std::abs(link.joint.axis.norm() - 1.0) > kAxisTolerance) {
      throw ConfigurationError(where + ": joint axis must have unit norm");
    }
    if (link.limit && !(link.limit->lower <= link.limit->upper)) {
      throw ConfigurationError(where + ": joint limit lower bound exceeds upper bound");
    }
    velocity_index_[i] = dof_;
    coordinate_index_[i] = joint_count_;
    ++dof_;
    ++joint_count_;
  }
  for (const CollisionProbe& probe : probes_) {
    if (probe.link < 0 || probe.link >= static_cast<int>(links_.size())) {
      throw ConfigurationError("probe '" + probe.name + "' refers to an invalid link");
    }
  }
  validate_damping(damping, dof_);
  damping_ = std::move(damping);
}

int KinematicChain::find_link(const std::string& name) const {
  for (std::size_t i = 0; i < links_.size(); ++i) {
    if (links_[i].name == name) return static_cast<int>(i);
  }
  return -1;
}

int KinematicChain::find_probe(const std::string& name) const {
  for (std::size_t i = 0; i < probes_.size(); ++i) {
    if (probes_[i].name == name) return static_cast<int>(i);
  }
  return -1;
}

KinematicChain KinematicChain::with_damping(Eigen::MatrixXd damping) const {
  return KinematicChain(name_, links_, std::move(damping), probes_);
}

SimState make_state(const KinematicChain& chain) {
  SimState s;
  s.joints = Eigen::VectorXd::Zero(chain.joint_count());
  return s;
}

std::vector<Eigen::Isometry3d> forward_kinematics(const KinematicChain& chain, const SimState& state) {
  if (state.joints.size() != chain.joint_count()) {
    std::ostringstream msg;
    msg << "state has " << state.joints.size() << " joint coordinates, chain '" << chain.name() << "' expects "
        << chain.joint_count();
    throw ConfigurationError(msg.str());
  }
  const auto& links = chain.links();
  std::vector<Eigen::Isometry3d> frames(links.size());
  for (std::size_t i = 0; i < links.size(); ++i) {
    const LinkSpec& link = links[i];
    const Eigen::Isometry3d parent =
        link.parent < 0 ? Eigen::Isometry3d::Identity() : frames[static_cast<std::size_t>(link.parent)];
    Eigen::Isometry3d motion;
    if (link.joint.kind == JointKind::floating_base) {
      motion = lie::make_pose(state.base_position, state.base_orientation);
    } else {
      motion = joint_motion(link.joint, state.joints[chain.coordinate_index(static_cast<int>(i))]);
    }
    frames[i] = parent * link.offset * motion;
  }
  return frames;
}

Eigen::Isometry3d frame_pose(const std::vector<Eigen::Isometry3d>& link_frames, const FrameRef& frame) {
  if (frame.link < 0 || frame.link >= static_cast<int>(link_frames.size())) {
    throw ConfigurationError("frame refers to an invalid link index " + std::to_string(frame.link));
  }
  Eigen::Isometry3d local = Eigen::Isometry3d::Identity();
  local.translation() = frame.point;
  local.linear() = frame.orientation.normalized().toRotationMatrix();
  return link_frames[static_cast<std::size_t>(frame.link)] * local;
}

Eigen::MatrixXd frame_jacobian(const KinematicChain& chain, const SimState& state, int link,
                               const Eigen::Vector3d& local_point) {
  return frame_jacobian(chain, forward_kinematics(chain, state), link, local_point);
}

Eigen::MatrixXd frame_jacobian(const KinematicChain& chain, const std::vector<Eigen::Isometry3d>& link_frames,
                               int link, const Eigen::Vector3d& local_point) {
  const auto& links = chain.links();
  if (link < 0 || link >= static_cast<int>(links.size())) {
    throw ConfigurationError("jacobian requested for invalid link index " + std::to_string(link));
  }
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(6, chain.dof());
  const Eigen::Vector3d p = link_frames[static_cast<std::size_t>(link)] * local_point;
  for (int i = link; i >= 0; i = links[static_cast<std::size_t>(i)].parent) {
    const LinkSpec& spec = links[static_cast<std::size_t>(i)];
    const Eigen::Isometry3d& frame = link_frames[static_cast<std::size_t>(i)];
    const int col = chain.velocity_index(i);
    switch (spec.joint.kind) {
      case JointKind::floating_base: {
        const Eigen::Matrix3d r = frame.linear();
        jac.block<3, 3>(0, col) = r;
        jac.block<3, 3>(0, col + 3) = -lie::hat(p - frame.translation()) * r;
        jac.block<3, 3>(3, col + 3) = r;
        break;
      }
      case JointKind::revolute: {
        const Eigen::Vector3d axis = frame.linear() * spec.joint.axis;
        jac.block<3, 1>(0, col) = axis.cross(p - frame.translation());
        jac.block<3, 1>(3, col) = axis;
        break;
      }
      case JointKind::prismatic: {
        jac.block<3, 1>(0, col) = frame.linear() * spec.joint.axis;
        break;
      }
    }
  }
  return jac;
}

SimState retract(const KinematicChain& chain, const SimState& state, const Eigen::VectorXd& delta) {
  SimState out = state;
  int offset = 0;
  if (chain.has_floating_base()) {
    const lie::RigidMotion m = lie::se3_exp(delta.head<6>());
    out.base_position = state.base_position + state.base_orientation * m.translation;
    out.base_orientation = state.base_orientation * m.rotation;
    offset = 6;
  }
  out.joints = state.joints + delta.segment(offset, chain.joint_count());
  return out;
}

namespace {

/// Base part of the stage increment mapped through dexpinv of the base
/// algebra element; scalar joints pass through untouched.
Eigen::VectorXd stage_derivative(const KinematicChain& chain, const Eigen::VectorXd& u, const Eigen::VectorXd& f) {
  if (!chain.has_floating_base()) return f;
  Eigen::VectorXd out = f;
  // State is y0 * exp(u) with u' = dexpinv(-u, xi) for body twists xi.
  out.head<6>() = lie::dexpinv(-u.head<6>(), f.head<6>());
  return out;
}

}  // namespace

SimState integrate_rkmk4(const KinematicChain& chain, const SimState& state, const VelocityField& field,
                         double dt) {
  if (!(dt > 0.0)) throw ConfigurationError("integration step must be positive");
  const int n = chain.dof();
  auto eval = [&](const Eigen::VectorXd& u) {
    Eigen::VectorXd f = field(retract(chain, state, u));
    if (f.size() != n) throw ConfigurationError("velocity field returned a vector of the wrong dimension");
    if (!f.allFinite()) throw NumericalFault("non-finite generalized velocity");
    return stage_derivative(chain, u, f);
  };
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(n);
  const Eigen::VectorXd k1 = dt * eval(zero);
  const Eigen::VectorXd k2 = dt * eval(0.5 * k1);
  const Eigen::VectorXd k3 = dt * eval(0.5 * k2);
  const Eigen::VectorXd k4 = dt * eval(k3);
  const Eigen::VectorXd u = (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0;
  SimState out = retract(chain, state, u);
  out.t = state.t + dt;
  return out;
}

SimState integrate(const KinematicChain& chain, const SimState& state, const Eigen::VectorXd& qdot, double dt) {
  if (qdot.size() != chain.dof()) throw ConfigurationError("qdot dimension does not match the chain");
  if (!qdot.allFinite()) throw NumericalFault("non-finite generalized velocity");
  if (!(dt > 0.0)) throw ConfigurationError("integration step must be positive");
  // With a frozen field every RKMK4 stage equals qdot (brackets of parallel
  // twists vanish), so the step is the single exponential update.
  SimState out = qdot.isZero(0.0) ? state : retract(chain, state, dt * qdot);
  out.t = state.t + dt;
  return out;
}

}  // namespace vhsim
