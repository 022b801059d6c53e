#pragma once

// The property suite behind `vhsim verify`: one check per acceptance
// criterion, run against the bundled scenarios and seeded random instances.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace vhsim {

struct CriterionResult {
  int id = 0;
  std::string name;
  bool passed = false;
  /// Measured values next to their thresholds.
  std::string detail;
};

struct AcceptanceOptions {
  std::uint64_t seed = 20240607;
  /// Criteria to run (all when empty).
  std::vector<int> only;
  /// Called as soon as a criterion finishes.
  std::function<void(const CriterionResult&)> on_result;
};

std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& options = {});

/// "[PASS] 3 internal projection: ..." style line.
std::string format_result(const CriterionResult& result);

}  // namespace vhsim
