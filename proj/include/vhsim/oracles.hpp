#pragma once

// Reference computations used by the test suite and by `vhsim verify`. They
// deliberately avoid the production code paths they check.

#include <optional>
#include <random>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include "vhsim/chain.hpp"

namespace vhsim::oracle {

/// Link frames by multiplying 4x4 homogeneous matrices built from
/// Eigen::AngleAxis, one joint at a time.
std::vector<Eigen::Matrix4d> compose_frames(const KinematicChain& chain, const SimState& state);

/// Central differences of the link frames with step h: the linear rows
/// differentiate the point position, the angular rows the rotation (through
/// the axis-angle of R(+h) R(-h)^T). Base directions follow the body-twist
/// convention of the generalized velocity.
Eigen::MatrixXd finite_difference_jacobian(const KinematicChain& chain, const SimState& state, int link,
                                           const Eigen::Vector3d& local_point, double h = 1e-7);

/// Solution of an LCP found by trying every active set (exponential in m).
struct EnumeratedLcp {
  Eigen::VectorXd f;
  Eigen::VectorXd slack;
};

/// First active set (in order of increasing size) whose solution is feasible
/// and complementary within `tol`; nullopt if none is.
std::optional<EnumeratedLcp> enumerate_lcp(const Eigen::MatrixXd& m, const Eigen::VectorXd& w, double tol = 1e-9);

/// Random symmetric positive semi-definite m x m matrix A A^T, with rank
/// `rank` (full rank when rank >= m).
Eigen::MatrixXd random_psd(int m, int rank, std::mt19937_64& rng);

/// Random symmetric positive definite matrix with eigenvalues in [lo, hi].
Eigen::MatrixXd random_spd(int n, double lo, double hi, std::mt19937_64& rng);

Eigen::MatrixXd random_matrix(int rows, int cols, std::mt19937_64& rng);

/// Random serial chain of `n` revolute/prismatic joints with random axes,
/// offsets and a unit damping matrix; optionally rooted on a floating base.
KinematicChain random_chain(int n, bool floating_base, std::mt19937_64& rng);

/// Random configuration: joints in [-pi, pi] (or within limits), random base pose.
SimState random_state(const KinematicChain& chain, std::mt19937_64& rng);

}  // namespace vhsim::oracle
