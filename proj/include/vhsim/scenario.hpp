#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include "vhsim/chain.hpp"
#include "vhsim/constraints.hpp"
#include "vhsim/control.hpp"
#include "vhsim/guides.hpp"
#include "vhsim/passivity.hpp"

namespace vhsim {

struct Waypoint {
  double t = 0.0;
  Eigen::Isometry3d pose = Eigen::Isometry3d::Identity();
};

/// Operator jitter: a seeded sum of sinusoids per pose axis. Each axis gets
/// `components` terms with amplitude std * sqrt(2 / components), so the
/// long-run standard deviation per axis equals the given value.
struct NoiseSpec {
  double position_std = 0.0;     // m
  double orientation_std = 0.0;  // rad
  double min_frequency = 0.2;    // Hz
  double max_frequency = 2.0;    // Hz
  int components = 8;
  std::uint64_t seed = 0;
};

/// One realized sinusoid of the jitter signal.
struct NoiseTerm {
  int axis = 0;  // 0..2 position, 3..5 rotation vector
  double amplitude = 0.0;
  double angular_frequency = 0.0;
  double phase = 0.0;
};

/// Draws the sinusoids of `spec` (std::mt19937_64 seeded with spec.seed).
std::vector<NoiseTerm> realize_noise(const NoiseSpec& spec);

struct TaskSpec {
  std::string name;
  FrameRef frame;
  Matrix6d stiffness = Matrix6d::Zero();
  Matrix6d damping = Matrix6d::Identity();
  /// Piecewise-linear schedule (slerp on orientation), held before the first
  /// and after the last waypoint. Never empty after loading.
  std::vector<Waypoint> waypoints;
  NoiseSpec noise;
  std::vector<NoiseTerm> jitter;
};

struct GuideEvent {
  double t = 0.0;
  bool on = true;
};

struct GuideSpec {
  VirtualMechanism mechanism;
  SimState initial_state;
  bool initially_on = true;
  std::vector<GuideEvent> schedule;
  /// Re-seat the guide on the manikin frame whenever it is switched on.
  bool reseat = true;
  /// False when the file gives no ideal axis; the axis error is then NaN.
  bool track_axis = true;
};

struct InternalSpec {
  bool enabled = false;
  /// Name of the task whose port the internal torque must not disturb.
  std::string task;
  Eigen::VectorXd reference;
  Eigen::VectorXd weights;
  double alpha = 0.0;
  ProjectionMetric metric = ProjectionMetric::damping;
};

/// Two prioritized external ports built from one frame (J2 = J1): the
/// passivity counterexample as a runnable scenario.
struct CounterexampleSpec {
  FrameRef frame;
  /// Selected twist rows (0..5 for x, y, z, rx, ry, rz).
  std::vector<int> rows;
  Eigen::VectorXd seed;
};

struct Scenario {
  std::string name;
  std::string description;
  /// FNV-1a hash of the canonical JSON (after overrides).
  std::string hash;
  KinematicChain chain;
  SimState initial_state;
  double dt = 0.01;
  double duration = 1.0;
  std::uint64_t seed = 0;
  std::vector<Obstacle> obstacles;
  ConstraintOptions constraint_options;
  double baumgarte = 0.2;
  LcpOptions lcp;
  std::vector<TaskSpec> tasks;
  std::vector<GuideSpec> guides;
  InternalSpec internal;
  std::optional<CounterexampleSpec> counterexample;
  /// Optional constant joint torque (e.g. emulated weight); empty when off.
  Eigen::VectorXd constant_torque;
  /// Storage bound; when absent, the initial spring energy of tasks and
  /// active guides is used.
  std::optional<double> beta_sq;
  IntegrationRule integration_rule = IntegrationRule::zero_order_hold;

  std::size_t step_count() const;
  int find_task(const std::string& name) const;
  int find_guide(const std::string& name) const;
};

/// One `--set key.path=value` override. The value is parsed as JSON when
/// possible and kept as a string otherwise.
struct Override {
  std::string path;
  std::string value;
};

/// Parses "a.b.0.c=value".
Override parse_override(const std::string& text);

/// Directory holding the bundled scenarios (VHSIM_SCENARIO_DIR when set).
std::filesystem::path scenario_directory();

/// Resolves a bundled scenario name or a path to a scenario file.
std::filesystem::path resolve_scenario(const std::string& name_or_path);

/// Loads and validates a scenario. Every schema problem is reported as a
/// SchemaError naming the field path; nothing is simulated before that.
Scenario load_scenario(const std::filesystem::path& file, const std::vector<Override>& overrides = {});
Scenario parse_scenario(const std::string& json_text, const std::filesystem::path& base_dir,
                        const std::vector<Override>& overrides = {});

/// Desired pose of a scripted task at time t, noise included.
Eigen::Isometry3d scripted_target(const TaskSpec& task, double t);

}  // namespace vhsim
