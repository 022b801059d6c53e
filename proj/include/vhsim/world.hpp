#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include "vhsim/passivity.hpp"
#include "vhsim/scenario.hpp"

namespace vhsim {

struct TaskReport {
  Eigen::Isometry3d target = Eigen::Isometry3d::Identity();
  /// Frame pose after the step and its error against the target of the
  /// following instant.
  Eigen::Isometry3d pose = Eigen::Isometry3d::Identity();
  Vector6d error = Vector6d::Zero();
  /// Task wrench applied during the step (post-solve velocity).
  Vector6d wrench = Vector6d::Zero();
  Vector6d desired_twist = Vector6d::Zero();
  /// Power delivered by the operator through the moving target, W^T v_d.
  double operator_power = 0.0;
  bool overridden = false;
};

/// One probe/obstacle pair. Gap is measured after the step; force is the
/// contact force of the step (0 when the pair was not active).
struct ContactReport {
  int probe = 0;
  int obstacle = 0;
  double gap = 0.0;
  double force = 0.0;
  double power = 0.0;
};

struct GuideReport {
  bool on = false;
  double axis_error = 0.0;
  double spring_energy = 0.0;
  double dissipated = 0.0;
  Eigen::Isometry3d tool_pose = Eigen::Isometry3d::Identity();
  Eigen::Isometry3d manikin_pose = Eigen::Isometry3d::Identity();
};

struct StepReport {
  std::size_t step = 0;
  double t = 0.0;
  Eigen::VectorXd qdot;
  std::vector<TaskReport> tasks;
  std::vector<ContactReport> contacts;
  std::vector<GuideReport> guides;
  std::size_t active_constraints = 0;
  int lcp_iterations = 0;
  double lcp_residual = 0.0;
  double min_constraint_force = 0.0;
  double max_limit_violation = 0.0;
  double system_condition = 1.0;
  /// qdot^T B_a qdot for the step.
  double joint_dissipation_rate = 0.0;
  /// Spring energy held by tasks and active guides after the step.
  double storage = 0.0;
};

/// Mutable simulation state for one scenario; owns the step pipeline.
///
/// Two ledgers are kept. The interaction ledger holds the ports through which
/// energy enters from outside: the operator's moving targets (W = task
/// wrench, V = v_d), prioritized external wrenches and constant torques, and
/// guide switching. Its verdict is the passivity verdict, bounded by beta^2.
/// The joint ledger splits Gamma^T qdot by torque source; its total equals
/// the joint-port dissipation integral of qdot^T B_a qdot.
class World {
 public:
  explicit World(Scenario scenario);

  /// Advances one dt. Errors are rethrown as StepError carrying the index of
  /// the failed step; the state is left as it was before the call.
  void step();

  /// Back to the scenario's initial state; clears live overrides.
  void reset();

  /// Live input. Applied at the next step boundary by the caller's loop.
  void set_target(const std::string& task, const Eigen::Isometry3d& pose);
  void clear_target(const std::string& task);
  void set_guide(const std::string& guide, bool on);
  bool guide_on(std::size_t index) const { return guide_on_.at(index); }

  const Scenario& scenario() const { return scenario_; }
  const SimState& state() const { return state_; }
  const SimState& guide_state(std::size_t index) const { return guide_states_.at(index); }
  std::size_t step_index() const { return step_; }
  double time() const { return static_cast<double>(step_) * scenario_.dt; }
  bool finished() const { return step_ >= scenario_.step_count(); }

  /// Report of the most recent step (empty before the first step).
  const StepReport& report() const { return report_; }
  const PassivityLedger& ledger() const { return ledger_; }
  const PassivityLedger& joint_ledger() const { return joint_ledger_; }
  double beta_sq() const { return beta_sq_; }
  /// Running integral of qdot^T B_a qdot.
  double joint_dissipation() const { return joint_dissipation_; }
  /// Running integral of every damper's dissipation (joint, task, guide).
  double dissipated() const { return dissipated_; }
  double initial_storage() const { return initial_storage_; }

  /// Desired pose of a task at time t (live override if any).
  Eigen::Isometry3d target(std::size_t task, double t) const;

 private:
  void initialize();
  void do_step();
  void apply_schedule(double t);
  void switch_guide(std::size_t index, bool on);
  double guide_energy(std::size_t index) const;

  Scenario scenario_;
  SimState state_;
  std::vector<SimState> guide_states_;
  std::vector<bool> guide_on_;
  std::vector<std::size_t> next_event_;
  std::vector<std::optional<Eigen::Isometry3d>> overrides_;
  std::vector<std::optional<Eigen::Isometry3d>> predicted_targets_;
  /// Energy added to a guide's spring by switching, paid out at the next step.
  std::vector<double> pending_switch_energy_;
  std::size_t step_ = 0;
  StepReport report_;
  PassivityLedger ledger_;
  PassivityLedger joint_ledger_;
  double beta_sq_ = 0.0;
  double joint_dissipation_ = 0.0;
  double dissipated_ = 0.0;
  double initial_storage_ = 0.0;
};

}  // namespace vhsim
