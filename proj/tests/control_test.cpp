#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "support.hpp"
#include "vhsim/control.hpp"
#include "vhsim/errors.hpp"
#include "vhsim/oracles.hpp"

using namespace vhsim;

namespace {

InternalPotential linear_potential(const Eigen::VectorXd& g, double alpha = 1.0) {
  InternalPotential p;
  p.alpha = alpha;
  p.evaluate = [g](const SimState& s) { return g.dot(s.joints); };
  p.gradient = [g](const SimState&) { return g; };
  return p;
}

SimState joints(int n) {
  SimState s;
  s.joints = Eigen::VectorXd::Zero(n);
  return s;
}

/// Euclidean orthogonal projector onto Ker(A), from the SVD of A.
Eigen::MatrixXd kernel_projector(const Eigen::MatrixXd& a) {
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const Eigen::Index rank = svd.rank();
  const Eigen::MatrixXd v = svd.matrixV().rightCols(a.cols() - rank);
  return v * v.transpose();
}

}  // namespace

TEST_CASE("task force vanishes at the target") {
  TaskTarget t;
  t.stiffness = 10 * Matrix6d::Identity();
  t.desired_pose = lie::make_pose(Eigen::Vector3d(0.3, 0.1, 1), Eigen::Quaterniond(Eigen::AngleAxisd(0.4, Eigen::Vector3d::UnitY())));
  t.desired_twist << 0.1, 0, 0, 0, 0.2, 0;
  CHECK(task_force(t, t.desired_pose, t.desired_twist).norm() == 0.0);
}

TEST_CASE("task force: translational spring") {
  TaskTarget t;
  t.stiffness.topLeftCorner<3, 3>() = 10 * Eigen::Matrix3d::Identity();
  t.desired_pose.translation() = Eigen::Vector3d(0.1, 0, 0);
  const Vector6d f = task_force(t, Eigen::Isometry3d::Identity(), Vector6d::Zero());
  CHECK((f - (Vector6d() << 1, 0, 0, 0, 0, 0).finished()).norm() < 1e-14);
}

TEST_CASE("task force: pure damping") {
  TaskTarget t;
  t.damping = 5 * Matrix6d::Identity();
  t.desired_twist << 0, 2, 0, 0, 0, 0;
  const Vector6d f = task_force(t, Eigen::Isometry3d::Identity(), Vector6d::Zero());
  CHECK((f - (Vector6d() << 0, 10, 0, 0, 0, 0).finished()).norm() < 1e-14);
}

TEST_CASE("task spring is the negative gradient of its potential") {
  std::mt19937_64 rng(21);
  TaskTarget t;
  // Coupled translation gains; isotropic rotation gain, for which the
  // rotation-log spring is an exact gradient at any error.
  t.stiffness.topLeftCorner<3, 3>() = oracle::random_spd(3, 1.0, 20.0, rng);
  t.stiffness.bottomRightCorner<3, 3>() = 7.0 * Eigen::Matrix3d::Identity();
  t.desired_pose = lie::make_pose(Eigen::Vector3d(0.2, -0.1, 0.4),
                                  Eigen::Quaterniond(Eigen::AngleAxisd(0.7, Eigen::Vector3d(1, 2, 3).normalized())));
  const Eigen::Isometry3d x = lie::make_pose(Eigen::Vector3d(0.1, 0.1, 0.2),
                                             Eigen::Quaterniond(Eigen::AngleAxisd(0.3, Eigen::Vector3d::UnitX())));
  const Vector6d f = task_force(t, x, Vector6d::Zero());
  const double h = 1e-6;
  for (int i = 0; i < 6; ++i) {
    // Move the pose along the i-th world twist direction.
    auto moved = [&](double s) {
      Eigen::Isometry3d y = x;
      if (i < 3) {
        y.translation()[i] += s;
      } else {
        y.linear() = Eigen::AngleAxisd(s, Eigen::Vector3d::Unit(i - 3)).toRotationMatrix() * x.linear();
      }
      return task_potential(t, y);
    };
    const double grad = (moved(h) - moved(-h)) / (2 * h);
    CHECK(std::abs(f[i] + grad) < 1e-5);
  }
}

TEST_CASE("task targets validate their gains") {
  TaskTarget t;
  t.stiffness(0, 1) = 1.0;
  CHECK_THROWS_AS(validate(t), ConfigurationError);
  TaskTarget d;
  d.damping = Matrix6d::Zero();
  CHECK_THROWS_AS(validate(d), ConfigurationError);
  TaskTarget ok;
  ok.stiffness = Matrix6d::Identity();
  CHECK_NOTHROW(validate(ok));
}

TEST_CASE("projection without a task is the identity") {
  const auto p = build_internal_projection(Eigen::MatrixXd::Zero(6, 4), Eigen::MatrixXd::Identity(4, 4));
  CHECK((p.matrix - Eigen::MatrixXd::Identity(4, 4)).norm() < 1e-15);
}

TEST_CASE("projection against a square invertible task is zero") {
  std::mt19937_64 rng(22);
  const Eigen::MatrixXd j = oracle::random_matrix(4, 4, rng);
  const auto p = build_internal_projection(j, oracle::random_spd(4, 1, 3, rng));
  CHECK(p.matrix.cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("projection invariants on a random 6x8 task with diagonal damping") {
  std::mt19937_64 rng(23);
  const Eigen::MatrixXd j = oracle::random_matrix(6, 8, rng);
  Eigen::VectorXd d(8);
  for (int i = 0; i < 8; ++i) d[i] = i + 1.0;
  const Eigen::MatrixXd b = d.asDiagonal();
  for (ProjectionMetric metric : {ProjectionMetric::damping, ProjectionMetric::euclidean}) {
    const auto p = build_internal_projection(j, b, metric);
    CHECK((p.matrix * p.matrix - p.matrix).norm() < 1e-10);
    CHECK((j * b.inverse() * p.matrix).norm() < 1e-10);
    if (metric == ProjectionMetric::damping) {
      const Eigen::MatrixXd m = b.inverse() * p.matrix;
      CHECK((m - m.transpose()).norm() < 1e-10);
      CHECK(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(m).eigenvalues().minCoeff() >= -1e-10);
    } else {
      // The Euclidean projector agrees with an SVD kernel oracle.
      CHECK((p.matrix - kernel_projector(j * b.inverse())).norm() < 1e-10);
    }
  }
}

TEST_CASE("the two metrics agree for scalar damping") {
  std::mt19937_64 rng(24);
  const Eigen::MatrixXd j = oracle::random_matrix(3, 7, rng);
  const Eigen::MatrixXd b = 2.5 * Eigen::MatrixXd::Identity(7, 7);
  const auto a = build_internal_projection(j, b, ProjectionMetric::damping);
  const auto e = build_internal_projection(j, b, ProjectionMetric::euclidean);
  CHECK((a.matrix - e.matrix).norm() < 1e-12);
}

TEST_CASE("projection requires invertible damping") {
  CHECK_THROWS_AS(build_internal_projection(Eigen::MatrixXd::Ones(1, 2), Eigen::Vector2d(1, 0).asDiagonal().toDenseMatrix()),
                  SingularityError);
}

TEST_CASE("pseudo-inverse drops singular values below the cutoff") {
  Eigen::Matrix2d m;
  m << 1, 0, 0, 1e-12;
  const Eigen::MatrixXd p = pseudo_inverse(m);
  CHECK(p(0, 0) == doctest::Approx(1.0));
  CHECK(p(1, 1) == 0.0);
}

TEST_CASE("internal torque examples") {
  const auto identity = build_internal_projection(Eigen::MatrixXd::Zero(6, 2), Eigen::MatrixXd::Identity(2, 2));
  SUBCASE("zero gain") {
    CHECK(internal_torque(linear_potential(Eigen::Vector2d(1, 2), 0.0), identity, joints(2)).values.isZero(0.0));
  }
  SUBCASE("plain descent without a task") {
    const auto t = internal_torque(linear_potential(Eigen::Vector2d(1, 2)), identity, joints(2));
    CHECK((t.values - Eigen::Vector2d(-1, -2)).norm() < 1e-15);
    CHECK(t.source == TorqueSource::internal);
  }
  SUBCASE("row-space gradient is projected out") {
    std::mt19937_64 rng(25);
    const Eigen::MatrixXd j = oracle::random_matrix(3, 6, rng);
    const Eigen::MatrixXd b = oracle::random_spd(6, 0.5, 4, rng);
    const auto p = build_internal_projection(j, b);
    // Row space of J B^-1 in the damping metric: J^T y.
    const Eigen::VectorXd g = j.transpose() * oracle::random_matrix(3, 1, rng);
    CHECK(internal_torque(linear_potential(g), p, joints(6)).values.norm() < 1e-9);
  }
}

TEST_CASE("self-projectivity residual") {
  std::mt19937_64 rng(26);
  const Eigen::MatrixXd j = oracle::random_matrix(2, 5, rng);
  const Eigen::MatrixXd b = oracle::random_spd(5, 0.5, 4, rng);
  const auto p = build_internal_projection(j, b);
  const Eigen::VectorXd z = oracle::random_matrix(5, 1, rng);
  CHECK(self_projectivity_residual(linear_potential(p.matrix * z), p, joints(5)) < 1e-10);
  const Eigen::VectorXd row = j.transpose() * oracle::random_matrix(2, 1, rng);
  CHECK(std::abs(self_projectivity_residual(linear_potential(row), p, joints(5)) - 1.0) < 1e-10);
  const auto none = build_internal_projection(Eigen::MatrixXd::Zero(2, 5), b);
  CHECK(self_projectivity_residual(linear_potential(z), none, joints(5)) == 0.0);
}

TEST_CASE("projected internal control does not disturb the task port") {
  std::mt19937_64 rng(27);
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::MatrixXd j = oracle::random_matrix(3, 7, rng);
    const Eigen::MatrixXd b = oracle::random_spd(7, 0.2, 8, rng);
    const auto p = build_internal_projection(j, b);
    const auto t = internal_torque(linear_potential(oracle::random_matrix(7, 1, rng), 3.0), p, joints(7));
    CHECK((j * b.llt().solve(t.values)).norm() < 1e-9);
    // One external port with internal control active: W1^T V1 >= 0.
    const Eigen::VectorXd w1 = oracle::random_matrix(3, 1, rng);
    const Eigen::VectorXd qdot = b.llt().solve(j.transpose() * w1 + t.values);
    CHECK(w1.dot(j * qdot) >= -1e-12);
  }
}

TEST_CASE("quadratic posture potential: gradient matches finite differences") {
  std::mt19937_64 rng(28);
  const auto chain = test::planar_chain(4);
  Eigen::VectorXd w(4);
  w << 1, 2, 0.5, 3;
  const auto u = quadratic_posture(chain, Eigen::Vector4d(0.1, -0.2, 0.3, 0), w, 1.5);
  const SimState s = oracle::random_state(chain, rng);
  const Eigen::VectorXd g = u.gradient(s);
  for (int i = 0; i < 4; ++i) {
    SimState a = s, b = s;
    a.joints[i] += 1e-6;
    b.joints[i] -= 1e-6;
    CHECK(std::abs((u.evaluate(a) - u.evaluate(b)) / 2e-6 - g[i]) < 1e-5);
  }
}

TEST_CASE("internal descent: the posture potential never increases without a task") {
  const auto chain = test::planar_chain(5, 1.0, 2.0);
  const auto u = quadratic_posture(chain, Eigen::VectorXd::Zero(5), Eigen::VectorXd::Ones(5), 2.0);
  const auto p = build_internal_projection(Eigen::MatrixXd::Zero(6, 5), chain.damping());
  SimState s = test::state_with(chain, (Eigen::VectorXd(5) << 0.5, -0.3, 0.8, 0.1, -0.6).finished());
  double prev = u.evaluate(s);
  for (int i = 0; i < 200; ++i) {
    const auto t = internal_torque(u, p, s);
    s = integrate(chain, s, chain.damping().llt().solve(t.values), 0.01);
    const double now = u.evaluate(s);
    CHECK(now - prev <= 1e-12);
    prev = now;
  }
}
