#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "support.hpp"
#include "vhsim/dynamics.hpp"
#include "vhsim/errors.hpp"
#include "vhsim/oracles.hpp"

using namespace vhsim;

namespace {

ImplicitTask scalar_task(double j, double k, double b, double error, double vd = 0.0) {
  ImplicitTask t;
  t.jacobian = Eigen::MatrixXd::Constant(1, 1, j);
  t.stiffness = Eigen::MatrixXd::Constant(1, 1, k);
  t.damping = Eigen::MatrixXd::Constant(1, 1, b);
  t.error = Eigen::VectorXd::Constant(1, error);
  t.desired_twist = Eigen::VectorXd::Constant(1, vd);
  return t;
}

TorqueVector torque(const Eigen::VectorXd& v) { return TorqueVector{v, TorqueSource::external}; }

}  // namespace

TEST_CASE("explicit solve: rest") {
  const std::vector<TorqueVector> t{torque(Eigen::Vector2d::Zero())};
  CHECK(solve_velocity_explicit(Eigen::MatrixXd::Identity(2, 2), t).isZero(0.0));
}

TEST_CASE("explicit solve: scalar damping") {
  const std::vector<TorqueVector> t{torque(Eigen::VectorXd::Constant(1, 4.0))};
  CHECK(solve_velocity_explicit(Eigen::MatrixXd::Constant(1, 1, 2.0), t)[0] == doctest::Approx(2.0));
}

TEST_CASE("explicit solve: diagonal damping") {
  const std::vector<TorqueVector> t{torque(Eigen::Vector2d(1, 1))};
  const Eigen::VectorXd qdot = solve_velocity_explicit(Eigen::Vector2d(1, 2).asDiagonal().toDenseMatrix(), t);
  CHECK(qdot[0] == doctest::Approx(1.0));
  CHECK(qdot[1] == doctest::Approx(0.5));
}

TEST_CASE("explicit solve sums every torque and is linear") {
  std::mt19937_64 rng(3);
  const Eigen::MatrixXd b = oracle::random_spd(5, 0.5, 5.0, rng);
  const Eigen::VectorXd g1 = oracle::random_matrix(5, 1, rng), g2 = oracle::random_matrix(5, 1, rng);
  const std::vector<TorqueVector> once{torque(g1), torque(g2)};
  const std::vector<TorqueVector> twice{torque(2 * g1), torque(2 * g2)};
  const Eigen::VectorXd a = solve_velocity_explicit(b, once);
  CHECK((b * a - g1 - g2).norm() < 1e-12);
  CHECK((solve_velocity_explicit(b, twice) - 2 * a).norm() / a.norm() < 1e-12);
}

TEST_CASE("explicit solve refuses a singular damping matrix") {
  const std::vector<TorqueVector> t{torque(Eigen::Vector2d(1, 1))};
  CHECK_THROWS_AS(solve_velocity_explicit(Eigen::Vector2d(1, 0).asDiagonal().toDenseMatrix(), t), SingularityError);
}

TEST_CASE("explicit solve rejects mismatched torques") {
  const std::vector<TorqueVector> t{torque(Eigen::Vector3d(1, 1, 1))};
  CHECK_THROWS_AS(solve_velocity_explicit(Eigen::MatrixXd::Identity(2, 2), t), ConfigurationError);
}

TEST_CASE("implicit solve: target reached") {
  const std::vector<ImplicitTask> tasks{scalar_task(1, 1, 1, 0)};
  const auto r = solve_velocity_implicit(Eigen::MatrixXd::Identity(1, 1), tasks, Eigen::VectorXd::Zero(1));
  CHECK(r.solvable);
  CHECK(r.qdot[0] == 0.0);
}

TEST_CASE("implicit solve: scalar resolvent") {
  const std::vector<ImplicitTask> tasks{scalar_task(1, 1, 1, 1)};
  const auto r = solve_velocity_implicit(Eigen::MatrixXd::Identity(1, 1), tasks, Eigen::VectorXd::Zero(1));
  CHECK(r.qdot[0] == doctest::Approx(0.5));
}

TEST_CASE("implicit solve: zero joint damping with a full-rank task") {
  const std::vector<ImplicitTask> tasks{scalar_task(1, 2, 1, 1)};
  const auto r = solve_velocity_implicit(Eigen::MatrixXd::Zero(1, 1), tasks, Eigen::VectorXd::Zero(1));
  CHECK(r.solvable);
  CHECK(r.qdot[0] == doctest::Approx(2.0));
}

TEST_CASE("implicit solve reports a singular system instead of throwing") {
  std::vector<ImplicitTask> tasks{scalar_task(1, 1, 1, 1)};
  tasks[0].jacobian = Eigen::RowVector2d(1, 0);
  const auto r = solve_velocity_implicit(Eigen::MatrixXd::Zero(2, 2), tasks, Eigen::VectorXd::Zero(2));
  CHECK_FALSE(r.solvable);
}

TEST_CASE("implicit solve approaches the explicit one as task damping vanishes") {
  std::mt19937_64 rng(4);
  const int n = 6;
  const Eigen::MatrixXd b = oracle::random_spd(n, 0.5, 5.0, rng);
  ImplicitTask t;
  t.jacobian = oracle::random_matrix(3, n, rng);
  t.stiffness = oracle::random_spd(3, 1.0, 10.0, rng);
  t.damping = 1e-8 * Eigen::MatrixXd::Identity(3, 3);
  t.error = oracle::random_matrix(3, 1, rng);
  t.desired_twist = Eigen::VectorXd::Zero(3);
  const std::vector<ImplicitTask> tasks{t};
  const auto r = solve_velocity_implicit(b, tasks, Eigen::VectorXd::Zero(n));
  const std::vector<TorqueVector> torques{torque(t.jacobian.transpose() * t.stiffness * t.error)};
  const Eigen::VectorXd e = solve_velocity_explicit(b, torques);
  CHECK((r.qdot - e).norm() / e.norm() < 1e-4);
}

TEST_CASE("assembled system matrix is symmetric and solves the stacked equation") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 3 + trial % 6;
    const Eigen::MatrixXd b = oracle::random_psd(n, n, rng);
    std::vector<ImplicitTask> tasks;
    for (int k = 0; k < 2; ++k) {
      ImplicitTask t;
      t.jacobian = oracle::random_matrix(6, n, rng);
      t.stiffness = oracle::random_psd(6, 6, rng);
      const Eigen::MatrixXd a = oracle::random_matrix(6, 6, rng);
      t.damping = a * a.transpose() + 0.1 * Eigen::MatrixXd::Identity(6, 6);
      t.error = oracle::random_matrix(6, 1, rng);
      t.desired_twist = oracle::random_matrix(6, 1, rng);
      tasks.push_back(t);
    }
    const VelocitySystem sys = VelocitySystem::assemble(b, tasks);
    CHECK((sys.matrix() - sys.matrix().transpose()).cwiseAbs().maxCoeff() < 1e-12);
    const Eigen::VectorXd ext = oracle::random_matrix(n, 1, rng);
    const auto r = solve_velocity_implicit(b, tasks, ext);
    REQUIRE(r.solvable);
    CHECK((sys.matrix() * r.qdot - task_rhs(tasks, n) - ext).norm() < 1e-9 * (1.0 + r.qdot.norm()));
  }
}

TEST_CASE("near-singular systems fall back to the eigen-decomposition") {
  Eigen::Matrix2d m;
  m << 1.0, 0.0, 0.0, 1e-11;
  const VelocitySystem sys(m);
  CHECK(sys.solvable());
  CHECK((m * sys.solve(Eigen::VectorXd(Eigen::Vector2d(1.0, 1e-11))) - Eigen::Vector2d(1.0, 1e-11)).norm() < 1e-12);
  const VelocitySystem singular(Eigen::Vector2d(1.0, 1e-13).asDiagonal().toDenseMatrix());
  CHECK_FALSE(singular.solvable());
  CHECK_THROWS_AS(singular.solve(Eigen::VectorXd(Eigen::Vector2d(1, 1))), SingularityError);
}
