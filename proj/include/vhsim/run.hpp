#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "vhsim/commands.hpp"
#include "vhsim/world.hpp"

namespace vhsim {

struct GuideSummary {
  std::string name;
  double max_axis_error = 0.0;
  double rms_axis_error = 0.0;
  /// Largest axis error over the last quarter of the run.
  double final_quarter_max = 0.0;
};

struct RunSummary {
  std::string scenario;
  std::string hash;
  std::size_t steps = 0;
  double duration = 0.0;
  /// Deepest probe penetration (0 when every gap stayed non-negative).
  double max_penetration = 0.0;
  double min_contact_force = 0.0;
  double max_lcp_residual = 0.0;
  double max_limit_violation = 0.0;
  /// Largest axis error over all guides.
  double max_axis_error = 0.0;
  std::vector<GuideSummary> guides;
  double min_total_energy = 0.0;
  double beta_sq = 0.0;
  Verdict verdict;
  double min_joint_dissipation = 0.0;
  double wall_seconds = 0.0;
  double mean_step_seconds = 0.0;
};

/// Collects summary statistics step by step.
class SummaryAccumulator {
 public:
  explicit SummaryAccumulator(const World& world);

  /// Call after every step.
  void observe(const World& world, double step_seconds);
  void restart(const World& world);
  RunSummary summary(const World& world) const;

 private:
  RunSummary s_;
  std::vector<std::vector<double>> axis_errors_;
  double step_seconds_ = 0.0;
};

struct RunOptions {
  std::optional<std::filesystem::path> trace;
  /// Command log of a live session to reproduce.
  std::optional<std::filesystem::path> replay;
};

/// Runs a scenario to its end (or to the end tick of a replayed session),
/// writing the trace when asked.
RunSummary run_scenario(const Scenario& scenario, const RunOptions& options = {});

/// Human-readable multi-line summary.
std::string format_summary(const RunSummary& summary);

}  // namespace vhsim
