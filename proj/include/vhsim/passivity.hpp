#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <boost/circular_buffer.hpp>
#include <Eigen/Dense>

#include "vhsim/chain.hpp"
#include "vhsim/control.hpp"

namespace vhsim {

enum class PortRole { task, contact, limit, guide, internal, external, operator_input };

const char* to_string(PortRole role);

/// Power interface (J, W, V). V is the measured twist J qdot; W is the wrench
/// applied through the port. Dimensions follow the number of Jacobian rows.
struct Port {
  std::string id;
  PortRole role = PortRole::task;
  Eigen::MatrixXd jacobian;
  Eigen::VectorXd wrench;
  Eigen::VectorXd twist;
};

/// Builds a port with V = J qdot.
Port make_port(std::string id, PortRole role, Eigen::MatrixXd jacobian, Eigen::VectorXd wrench,
               const Eigen::VectorXd& qdot);

/// W^T V; throws ConfigurationError on mismatched dimensions.
double port_power(const Port& port);

/// Instantaneous power already reduced to a scalar.
struct PortPower {
  std::string id;
  PortRole role = PortRole::task;
  double power = 0.0;
};

/// How the power samples of consecutive steps are turned into energy.
enum class IntegrationRule {
  /// 1/2 (P_prev + P_now) dt; the first sample of a port uses P_now dt.
  trapezoidal,
  /// P_now dt. Exact when wrench and twist are held constant over the step,
  /// which is how the simulator applies them.
  zero_order_hold,
};

struct Verdict {
  bool violated = false;
  /// Time of the first recorded sample below -beta^2 (valid when violated).
  double violation_time = 0.0;
};

struct PortAccount {
  std::string id;
  PortRole role = PortRole::task;
  double energy = 0.0;
  /// Power of the latest step (0 when the port was absent).
  double power = 0.0;
  bool sampled = false;
  Verdict verdict;
};

struct LedgerSample {
  double t = 0.0;
  double power = 0.0;
  double energy = 0.0;
};

/// Running integral of W^T V per port, with the storage bound beta^2.
///
/// Ports are identified by id; several contributions with the same id in one
/// step are summed. A declared port that is absent from a step contributes
/// zero power. The verdict applies to the total; per-port verdicts use the
/// same bound and are informational.
class PassivityLedger {
 public:
  explicit PassivityLedger(double beta_sq = 0.0, IntegrationRule rule = IntegrationRule::trapezoidal,
                           std::size_t history_capacity = 4096);

  /// Registers a port ahead of time so its column exists from t = 0.
  /// Returns its index in accounts().
  std::size_t declare(const std::string& id, PortRole role);

  /// Advances time by dt and integrates the powers of `ports`.
  /// Non-finite power: the fault counter is incremented, the ledger is left
  /// untouched and NumericalFault is thrown.
  void record_step(std::span<const Port> ports, double dt);
  void record_powers(std::span<const PortPower> powers, double dt);

  double time() const { return t_; }
  double beta_sq() const { return beta_sq_; }
  IntegrationRule rule() const { return rule_; }
  std::size_t steps() const { return steps_; }
  std::size_t fault_count() const { return faults_; }

  const std::vector<PortAccount>& accounts() const { return accounts_; }
  const PortAccount* find(const std::string& id) const;

  double total_energy() const { return total_energy_; }
  double total_power() const { return total_power_; }
  double min_total_energy() const { return min_total_energy_; }
  const Verdict& total_verdict() const { return verdict_; }

  /// (t, total power, total energy) of the most recent steps.
  const boost::circular_buffer<LedgerSample>& history() const { return history_; }

 private:
  double beta_sq_;
  IntegrationRule rule_;
  std::vector<PortAccount> accounts_;
  boost::circular_buffer<LedgerSample> history_;
  double t_ = 0.0;
  double total_energy_ = 0.0;
  double total_power_ = 0.0;
  double min_total_energy_ = 0.0;
  std::size_t steps_ = 0;
  std::size_t faults_ = 0;
  Verdict verdict_;
};

struct PassivityReport {
  Verdict total;
  std::vector<std::pair<std::string, Verdict>> ports;
  double min_total_energy = 0.0;
};

PassivityReport passivity_verdict(const PassivityLedger& ledger);

/// Two external ports whose prioritized combination drains energy at a
/// constant rate. W1 balances W2 through J1^T W1 + 1/2 J2^T W2 = 0 and port 2
/// is projected into Ker(J1 B_a^-1).
struct Counterexample {
  Eigen::MatrixXd j1;
  Eigen::MatrixXd j2;
  Eigen::VectorXd w1;
  Eigen::VectorXd w2;
  Eigen::MatrixXd damping;
  Projection projection;
  /// -1/4 W2^T J2 B_a^-1 J2^T W2 (W), the two-port power under prioritization.
  double predicted_power = 0.0;
  /// ||J2^T W2||; must be non-zero.
  double seed_norm = 0.0;
  /// ||J1^T W1 + 1/2 J2^T W2||.
  double balance_residual = 0.0;
  /// ||J2 B_a^-1 Pi1^T J2^T|| (Frobenius).
  double annihilation_residual = 0.0;
};

/// J2 = J1, W2 = seed, W1 by least squares. Throws ConstructionFailed on a
/// degenerate seed or when the balance residual exceeds 1e-8, and
/// SingularityError when B_a is singular.
Counterexample build_counterexample(const Eigen::MatrixXd& j1, const Eigen::MatrixXd& damping,
                                    const Eigen::VectorXd& w2_seed);

/// Joint torque of prioritized two-port control: J1^T W1 + Pi1^T J2^T W2.
Eigen::VectorXd prioritized_torque(const Eigen::MatrixXd& j1, const Eigen::VectorXd& w1, const Eigen::MatrixXd& j2,
                                   const Eigen::VectorXd& w2, const Projection& projection);

struct CounterexampleRun {
  PassivityLedger ledger;
  std::vector<double> total_power;
  double mean_power = 0.0;
};

/// Integrates qdot = B_a^-1 (J1^T W1 + Pi1^T J2^T W2) with the constant port
/// Jacobians of `ce` and records both ports in a ledger with bound beta_sq.
CounterexampleRun run_counterexample(const Counterexample& ce, double dt, double duration, double beta_sq);

/// -alpha W2^T J2 B_a^-1 Pi1^T g: the part of the port-2 power caused by the
/// projected internal potential.
double leak_cross_term(const Eigen::MatrixXd& j2, const Eigen::VectorXd& w2, const Eigen::MatrixXd& damping,
                       const Projection& projection, const Eigen::VectorXd& gradient, double alpha);

struct LeakSample {
  /// W2^T V2 with W1 = 0.
  double power = 0.0;
  /// W2^T J2 B_a^-1 J2^T W2 (never negative).
  double direct_term = 0.0;
  double cross_term = 0.0;
};

/// Port-2 power when the internal potential is projected against port 1
/// only, evaluated at each configuration. When `contact_wrench` is empty an
/// adversarial wrench (along J2 B_a^-1 Pi1^T g, unit norm) is used instead.
std::vector<LeakSample> two_port_internal_leak_demo(const KinematicChain& chain, const InternalPotential& potential,
                                                    const FrameRef& task_port, const FrameRef& contact_port,
                                                    std::span<const SimState> configurations,
                                                    const std::optional<Vector6d>& contact_wrench = std::nullopt);

}  // namespace vhsim
