#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "support.hpp"
#include "vhsim/errors.hpp"
#include "vhsim/oracles.hpp"
#include "vhsim/passivity.hpp"

using namespace vhsim;

namespace {

std::vector<PortPower> powers(double p1, double p2 = 0.0) {
  return {{"a", PortRole::task, p1}, {"b", PortRole::contact, p2}};
}

}  // namespace

TEST_CASE("zero wrenches leave every energy unchanged") {
  PassivityLedger ledger(1.0);
  const Eigen::MatrixXd j = Eigen::MatrixXd::Identity(6, 3);
  const std::vector<Port> ports{make_port("p", PortRole::task, j, Vector6d::Zero(), Eigen::Vector3d(1, 2, 3))};
  for (int i = 0; i < 10; ++i) ledger.record_step(ports, 0.01);
  CHECK(ledger.find("p")->energy == 0.0);
  CHECK(ledger.total_energy() == 0.0);
}

TEST_CASE("constant power integrates exactly under both rules") {
  for (IntegrationRule rule : {IntegrationRule::trapezoidal, IntegrationRule::zero_order_hold}) {
    PassivityLedger ledger(0.0, rule);
    for (int i = 0; i < 100; ++i) ledger.record_powers(powers(2.0), 0.01);
    CHECK(std::abs(ledger.find("a")->energy - 2.0) < 1e-9);
    CHECK(std::abs(ledger.time() - 1.0) < 1e-12);
  }
}

TEST_CASE("trapezoidal rule averages consecutive samples") {
  PassivityLedger ledger(0.0, IntegrationRule::trapezoidal);
  ledger.record_powers(powers(1.0), 0.5);
  ledger.record_powers(powers(3.0), 0.5);
  CHECK(ledger.find("a")->energy == doctest::Approx(0.5 * 1.0 + 0.5 * 0.5 * (1.0 + 3.0)));
}

TEST_CASE("port power is the wrench-twist product with V = J qdot") {
  std::mt19937_64 rng(31);
  const Eigen::MatrixXd j = oracle::random_matrix(6, 4, rng);
  const Eigen::VectorXd qdot = oracle::random_matrix(4, 1, rng);
  const Eigen::VectorXd w = oracle::random_matrix(6, 1, rng);
  const Port p = make_port("p", PortRole::task, j, w, qdot);
  CHECK((p.twist - j * qdot).norm() < 1e-10);
  CHECK(port_power(p) == doctest::Approx(w.dot(j * qdot)));
  Port bad = p;
  bad.wrench = Eigen::VectorXd::Zero(3);
  CHECK_THROWS_AS(port_power(bad), ConfigurationError);
}

TEST_CASE("all energies non-negative: passive so far") {
  PassivityLedger ledger(0.0);
  for (int i = 0; i < 50; ++i) ledger.record_powers(powers(0.5, 0.1), 0.01);
  const PassivityReport r = passivity_verdict(ledger);
  CHECK_FALSE(r.total.violated);
  for (const auto& [id, v] : r.ports) CHECK_FALSE(v.violated);
}

TEST_CASE("threshold crossing reports the first violation time") {
  PassivityLedger ledger(1.0, IntegrationRule::zero_order_hold);
  for (int i = 1; i < 200; ++i) ledger.record_powers(powers(0.0), 0.01);
  ledger.record_powers(powers(-150.0), 0.01);  // energy -1.5 J at t = 2.0 s
  for (int i = 0; i < 10; ++i) ledger.record_powers(powers(-1.0), 0.01);
  const PassivityReport r = passivity_verdict(ledger);
  REQUIRE(r.total.violated);
  CHECK(r.total.violation_time == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(r.min_total_energy < -1.5);
}

TEST_CASE("non-finite power is rejected and counted") {
  PassivityLedger ledger(0.0);
  ledger.record_powers(powers(1.0), 0.1);
  const double before = ledger.total_energy();
  CHECK_THROWS_AS(ledger.record_powers(powers(std::nan("")), 0.1), NumericalFault);
  CHECK(ledger.fault_count() == 1);
  CHECK(ledger.total_energy() == before);
  CHECK(ledger.steps() == 1);
}

TEST_CASE("recording a trace twice doubles every energy") {
  std::mt19937_64 rng(32);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<std::pair<double, double>> trace;
  for (int i = 0; i < 300; ++i) trace.emplace_back(n(rng), n(rng));
  PassivityLedger once(0.0), twice(0.0);
  for (const auto& [a, b] : trace) {
    once.record_powers(powers(a, b), 0.01);
    const std::vector<PortPower> doubled{{"a", PortRole::task, a}, {"a", PortRole::task, a},
                                         {"b", PortRole::contact, b}, {"b", PortRole::contact, b}};
    twice.record_powers(doubled, 0.01);
  }
  CHECK(twice.find("a")->energy == 2.0 * once.find("a")->energy);
  CHECK(twice.find("b")->energy == 2.0 * once.find("b")->energy);
}

TEST_CASE("history timestamps increase strictly") {
  PassivityLedger ledger(0.0, IntegrationRule::trapezoidal, 64);
  for (int i = 0; i < 200; ++i) ledger.record_powers(powers(1.0), 0.01);
  const auto& h = ledger.history();
  CHECK(h.size() == 64);
  for (std::size_t i = 1; i < h.size(); ++i) CHECK(h[i].t > h[i - 1].t);
}

TEST_CASE("declared ports absent from a step contribute nothing") {
  PassivityLedger ledger(0.0);
  ledger.declare("idle", PortRole::guide);
  ledger.record_powers(powers(1.0), 0.1);
  CHECK(ledger.find("idle")->energy == 0.0);
  CHECK_FALSE(ledger.find("idle")->sampled);
}

TEST_CASE("scalar counterexample") {
  const Counterexample ce = build_counterexample(Eigen::MatrixXd::Ones(1, 1), Eigen::MatrixXd::Ones(1, 1),
                                                 Eigen::VectorXd::Constant(1, 2.0));
  CHECK(ce.w1[0] == doctest::Approx(-1.0));
  CHECK(ce.predicted_power == doctest::Approx(-1.0));
  CHECK(ce.balance_residual < 1e-10);
  CHECK(ce.annihilation_residual < 1e-10);
}

TEST_CASE("degenerate seed cannot build a counterexample") {
  Eigen::MatrixXd j(2, 3);
  j << 1, 0, 0, 1, 0, 0;  // J^T (1, -1) = 0
  CHECK_THROWS_AS(build_counterexample(j, Eigen::MatrixXd::Identity(3, 3), Eigen::Vector2d(1, -1)),
                  ConstructionFailed);
}

TEST_CASE("counterexample on a redundant chain drains energy at the predicted rate") {
  std::mt19937_64 rng(33);
  const Eigen::MatrixXd j1 = oracle::random_matrix(1, 2, rng);
  const Counterexample ce = build_counterexample(j1, Eigen::MatrixXd::Identity(2, 2), Eigen::VectorXd::Constant(1, 3.0));
  CHECK(ce.balance_residual < 1e-10);
  CHECK(ce.annihilation_residual < 1e-10);
  const CounterexampleRun run = run_counterexample(ce, 0.01, 10.0, 1.0);
  for (double p : run.total_power) CHECK(p < 0.0);
  CHECK(std::abs(run.mean_power - ce.predicted_power) < 0.02 * std::abs(ce.predicted_power));
  const double slope = run.ledger.total_energy() / run.ledger.time();
  CHECK(std::abs(slope - ce.predicted_power) < 0.02 * std::abs(ce.predicted_power));
  CHECK(run.ledger.total_verdict().violated);
}

TEST_CASE("prioritized torque of the counterexample balances port 1") {
  std::mt19937_64 rng(34);
  const Eigen::MatrixXd j1 = oracle::random_matrix(2, 5, rng);
  const Eigen::MatrixXd b = oracle::random_spd(5, 0.5, 3.0, rng);
  const Counterexample ce = build_counterexample(j1, b, Eigen::Vector2d(1.0, -2.0));
  const Eigen::VectorXd gamma = prioritized_torque(ce.j1, ce.w1, ce.j2, ce.w2, ce.projection);
  const Eigen::VectorXd qdot = b.llt().solve(gamma);
  const double total = ce.w1.dot(ce.j1 * qdot) + ce.w2.dot(ce.j2 * qdot);
  CHECK(total == doctest::Approx(ce.predicted_power).epsilon(1e-9));
  CHECK(total < 0.0);
}

TEST_CASE("two-port internal leak") {
  const auto chain = test::planar_chain(5, 0.4, 1.0);
  std::mt19937_64 rng(35);
  std::vector<SimState> configs;
  for (int i = 0; i < 20; ++i) configs.push_back(oracle::random_state(chain, rng));
  const FrameRef task{4, Eigen::Vector3d(0.4, 0, 0)};
  const FrameRef contact{2, Eigen::Vector3d(0.2, 0, 0)};

  SUBCASE("zero gain: no cross term") {
    const auto u = quadratic_posture(chain, Eigen::VectorXd::Zero(5), Eigen::VectorXd::Ones(5), 0.0);
    for (const LeakSample& s : two_port_internal_leak_demo(chain, u, task, contact, configs)) CHECK(s.cross_term == 0.0);
  }
  SUBCASE("coincident ports: annihilated") {
    const auto u = quadratic_posture(chain, Eigen::VectorXd::Zero(5), Eigen::VectorXd::Ones(5), 2.0);
    for (const LeakSample& s : two_port_internal_leak_demo(chain, u, task, task, configs)) {
      CHECK(std::abs(s.cross_term) < 1e-10);
    }
  }
  SUBCASE("adversarial wrench: negative cross term") {
    const auto u = quadratic_posture(chain, Eigen::VectorXd::Zero(5), Eigen::VectorXd::Ones(5), 2.0);
    double worst = 0.0;
    for (const LeakSample& s : two_port_internal_leak_demo(chain, u, task, contact, configs)) {
      worst = std::min(worst, s.cross_term);
      CHECK(s.direct_term >= 0.0);
      CHECK(s.power == doctest::Approx(s.direct_term + s.cross_term));
    }
    CHECK(worst < -1e-6);
  }
}
