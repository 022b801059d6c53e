#pragma once

// Small fixtures shared by the unit tests.

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "vhsim/chain.hpp"

namespace vhsim::test {

/// Serial chain of revolute joints about z, each link `length` long along x.
inline KinematicChain planar_chain(int n, double length = 1.0, double damping = 1.0) {
  std::vector<LinkSpec> links;
  for (int i = 0; i < n; ++i) {
    LinkSpec l;
    l.name = "l" + std::to_string(i);
    l.parent = i - 1;
    if (i > 0) l.offset.translation() = Eigen::Vector3d(length, 0, 0);
    l.length = length;
    l.joint.axis = Eigen::Vector3d::UnitZ();
    links.push_back(l);
  }
  return KinematicChain("planar", links, damping * Eigen::MatrixXd::Identity(n, n));
}

/// Chain of prismatic joints along the given axes, all hanging from the world.
inline KinematicChain slider_chain(const std::vector<Eigen::Vector3d>& axes, const Eigen::VectorXd& damping) {
  std::vector<LinkSpec> links;
  for (std::size_t i = 0; i < axes.size(); ++i) {
    LinkSpec l;
    l.name = "s" + std::to_string(i);
    l.parent = static_cast<int>(i) - 1;
    l.joint.kind = JointKind::prismatic;
    l.joint.axis = axes[i].normalized();
    links.push_back(l);
  }
  return KinematicChain("sliders", links, damping.asDiagonal().toDenseMatrix());
}

inline SimState state_with(const KinematicChain& chain, const Eigen::VectorXd& q) {
  SimState s = make_state(chain);
  s.joints = q;
  return s;
}

}  // namespace vhsim::test
