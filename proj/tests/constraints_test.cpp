#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "support.hpp"
#include "vhsim/constraints.hpp"
#include "vhsim/errors.hpp"
#include "vhsim/oracles.hpp"

using namespace vhsim;

namespace {

/// Planar 3-link arm with a probe at its tip.
KinematicChain probed_arm() {
  const auto base = test::planar_chain(3, 0.5);
  std::vector<LinkSpec> links = base.links();
  links[1].limit = JointLimit{-1.0, 1.0};
  return KinematicChain("arm", links, base.damping(), {{"tip", 2, Eigen::Vector3d(0.5, 0, 0)}});
}

UnilateralConstraint row_constraint(const Eigen::RowVectorXd& row, double gap) {
  UnilateralConstraint c;
  c.row = row;
  c.gap = gap;
  return c;
}

}  // namespace

TEST_CASE("obstacles validate their geometry") {
  CHECK_THROWS_AS(validate(Obstacle::half_space("h", Eigen::Vector3d(0, 0, 2), 0)), ConfigurationError);
  CHECK_THROWS_AS(validate(Obstacle::sphere("s", Eigen::Vector3d::Zero(), 0.0)), ConfigurationError);
  CHECK_NOTHROW(validate(Obstacle::sphere("s", Eigen::Vector3d::Zero(), 0.3)));
}

TEST_CASE("signed distances") {
  const auto plane = Obstacle::half_space("floor", Eigen::Vector3d::UnitZ(), 0.5);
  CHECK(plane.signed_distance(Eigen::Vector3d(3, 1, 0.75)) == doctest::Approx(0.25));
  const auto ball = Obstacle::sphere("ball", Eigen::Vector3d(1, 0, 0), 0.5);
  Eigen::Vector3d n;
  CHECK(ball.signed_distance(Eigen::Vector3d(1, 2, 0), &n) == doctest::Approx(1.5));
  CHECK((n - Eigen::Vector3d::UnitY()).norm() < 1e-15);
}

TEST_CASE("distant probes are not returned") {
  const auto chain = probed_arm();
  const std::vector<Obstacle> obstacles{Obstacle::half_space("floor", Eigen::Vector3d::UnitZ(), -1.0)};
  ConstraintOptions options;
  options.activation_margin = 0.01;
  options.joint_limits = false;
  CHECK(detect_constraints(chain, make_state(chain), obstacles, options).empty());
}

TEST_CASE("joint close to its upper limit") {
  const auto chain = probed_arm();
  ConstraintOptions options;
  options.activation_margin = 1e-3;
  const auto state = test::state_with(chain, Eigen::Vector3d(0, 1.0 - 1e-4, 0));
  const auto cs = detect_constraints(chain, state, {}, options);
  REQUIRE(cs.size() == 1);
  CHECK(cs[0].kind == ConstraintKind::joint_limit_upper);
  CHECK(cs[0].gap == doctest::Approx(1e-4).epsilon(1e-9));
  CHECK(cs[0].row[1] == -1.0);
}

TEST_CASE("contact gap and row match finite differences") {
  const auto chain = probed_arm();
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 20; ++trial) {
    const SimState state = oracle::random_state(chain, rng);
    const Eigen::Vector3d tip = forward_kinematics(chain, state)[2] * Eigen::Vector3d(0.5, 0, 0);
    // A tilted plane just below the tip.
    const Eigen::Vector3d normal = Eigen::Vector3d(0.3, -0.4, 1).normalized();
    const double h = 0.02;
    const std::vector<Obstacle> obstacles{Obstacle::half_space("p", normal, normal.dot(tip) - h)};
    ConstraintOptions options;
    options.joint_limits = false;
    const auto cs = detect_constraints(chain, state, obstacles, options);
    REQUIRE(cs.size() == 1);
    CHECK(cs[0].gap == doctest::Approx(h).epsilon(1e-12));
    for (int i = 0; i < 3; ++i) {
      SimState a = state, b = state;
      a.joints[i] += 1e-7;
      b.joints[i] -= 1e-7;
      auto gap = [&](const SimState& s) {
        return obstacles[0].signed_distance(forward_kinematics(chain, s)[2] * Eigen::Vector3d(0.5, 0, 0));
      };
      CHECK(std::abs((gap(a) - gap(b)) / 2e-7 - cs[0].row[i]) < 1e-6);
    }
  }
}

TEST_CASE("empty LCP") {
  const VelocitySystem sys(Eigen::MatrixXd::Identity(2, 2));
  const LcpProblem p = assemble_lcp({}, sys, Eigen::Vector2d(1, 2), 0.01);
  CHECK(p.m.size() == 0);
  const ContactSolution s = solve_lcp(p.m, p.w);
  CHECK(s.f.size() == 0);
  CHECK(s.residual == 0.0);
}

TEST_CASE("single contact closing at unit speed") {
  const VelocitySystem sys(Eigen::MatrixXd::Identity(2, 2));
  const std::vector<UnilateralConstraint> cs{row_constraint(Eigen::RowVector2d(1, 0), 0.0)};
  const LcpProblem p = assemble_lcp(cs, sys, Eigen::Vector2d(-1, 0), 0.01);
  CHECK(p.m(0, 0) == doctest::Approx(1.0));
  CHECK(p.w[0] == doctest::Approx(-1.0));
  const ContactSolution s = solve_lcp(p.m, p.w);
  CHECK(s.f[0] == doctest::Approx(1.0));
  CHECK(std::abs(s.slack[0]) < 1e-12);
}

TEST_CASE("gap bias: close but do not overshoot, push back when penetrated") {
  CHECK(gap_bias(0.02, 0.01, 0.2) == doctest::Approx(2.0));
  CHECK(gap_bias(-0.01, 0.01, 0.2) == doctest::Approx(-0.2));
  CHECK(gap_bias(0.0, 0.01, 0.2) == 0.0);
}

TEST_CASE("assembled LCP matrices are symmetric positive semi-definite") {
  std::mt19937_64 rng(42);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 4 + trial % 5;
    const VelocitySystem sys(oracle::random_spd(n, 0.01, 10.0, rng));
    std::vector<UnilateralConstraint> cs;
    for (int k = 0; k < 1 + trial % 6; ++k) {
      cs.push_back(row_constraint(oracle::random_matrix(1, n, rng), 0.0));
    }
    const LcpProblem p = assemble_lcp(cs, sys, oracle::random_matrix(n, 1, rng), 0.01);
    CHECK((p.m - p.m.transpose()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(p.m).eigenvalues().minCoeff() >= -1e-10);
  }
}

TEST_CASE("separating constraints carry no force") {
  const ContactSolution s = solve_lcp(Eigen::Matrix2d::Identity(), Eigen::Vector2d(0.5, 2));
  CHECK(s.f.isZero(0.0));
}

TEST_CASE("identity LCP is solved per coordinate") {
  const ContactSolution s = solve_lcp(Eigen::Matrix2d::Identity(), Eigen::Vector2d(-1, 2));
  CHECK((s.f - Eigen::Vector2d(1, 0)).norm() < 1e-12);
  CHECK((s.slack - Eigen::Vector2d(0, 2)).norm() < 1e-12);
}

TEST_CASE("solver matches active-set enumeration on random definite 3x3 problems") {
  std::mt19937_64 rng(43);
  for (int trial = 0; trial < 200; ++trial) {
    const Eigen::MatrixXd m = oracle::random_spd(3, 0.05, 5.0, rng);
    const Eigen::VectorXd w = oracle::random_matrix(3, 1, rng);
    const auto expected = oracle::enumerate_lcp(m, w);
    REQUIRE(expected);
    const ContactSolution got = solve_lcp(m, w);
    CHECK((got.f - expected->f).cwiseAbs().maxCoeff() < 1e-8);
    CHECK(got.f.minCoeff() >= -1e-10);
    CHECK(got.slack.minCoeff() >= -1e-8);
    CHECK(got.residual < 1e-8);
  }
}

TEST_CASE("rank-deficient problems still satisfy the solution invariants") {
  std::mt19937_64 rng(44);
  for (int trial = 0; trial < 200; ++trial) {
    const int m = 2 + trial % 3;
    const Eigen::MatrixXd mat = oracle::random_psd(m, 1, rng);
    // Feasible by construction: w = s0 - M f0 with f0, s0 >= 0 complementary.
    Eigen::VectorXd f0 = Eigen::VectorXd::Zero(m), s0 = Eigen::VectorXd::Zero(m);
    for (int k = 0; k < m; ++k) (k % 2 ? f0[k] : s0[k]) = 0.5 + k;
    const ContactSolution got = solve_lcp(mat, s0 - mat * f0);
    CHECK(got.f.minCoeff() >= -1e-10);
    CHECK(got.slack.minCoeff() >= -1e-8);
    CHECK(got.residual < 1e-8);
  }
}

TEST_CASE("infeasible problems are reported with the best residual") {
  // M = 0 and w < 0: no f can make the slack non-negative.
  try {
    solve_lcp(Eigen::MatrixXd::Zero(1, 1), Eigen::VectorXd::Constant(1, -1.0));
    FAIL("expected non-convergence");
  } catch (const LcpNonConvergence& e) {
    CHECK(e.best_residual() > 0.0);
  }
}

TEST_CASE("constraint torques map forces through the rows") {
  const std::vector<UnilateralConstraint> cs{row_constraint(Eigen::RowVector2d(1, 0), 0.0)};
  ContactSolution s;
  s.f = Eigen::VectorXd::Zero(1);
  CHECK(constraint_torques(cs, s, 2).values.isZero(0.0));
  s.f[0] = 3.0;
  const TorqueVector t = constraint_torques(cs, s, 2);
  CHECK((t.values - Eigen::Vector2d(3, 0)).norm() == 0.0);
  CHECK(t.source == TorqueSource::constraint);
}
