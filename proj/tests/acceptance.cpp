// Runs every acceptance criterion and prints one pass/fail line per criterion.
// Exit status is non-zero when any criterion fails.

#include <algorithm>
#include <iostream>

#include "vhsim/acceptance.hpp"

int main() {
  vhsim::AcceptanceOptions options;
  options.on_result = [](const vhsim::CriterionResult& r) { std::cout << vhsim::format_result(r) << std::endl; };
  const auto results = vhsim::run_acceptance(options);
  const auto failed = std::ranges::count_if(results, [](const auto& r) { return !r.passed; });
  std::cout << (results.size() - static_cast<std::size_t>(failed)) << "/" << results.size() << " criteria passed\n";
  return failed == 0 ? 0 : 1;
}
