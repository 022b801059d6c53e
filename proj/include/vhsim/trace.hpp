#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "vhsim/world.hpp"

namespace vhsim {

inline constexpr int trace_version = 1;

/// Column names of the CSV trace, fixed for the whole run. The last column
/// holds the passivity verdict as text ("ok" or "violated").
std::vector<std::string> trace_columns(const World& world);

/// Numeric values of the current row, one per column except the verdict.
std::vector<double> trace_values(const World& world);

std::string verdict_text(const World& world);

/// Shortest text that reads back to the same double.
std::string format_number(double value);

/// CSV trace: a manifest comment line, the column header, then one row per
/// completed step.
class TraceWriter {
 public:
  TraceWriter(std::ostream& out, const World& world);

  void write_header();
  void write_row();

 private:
  std::ostream& out_;
  const World& world_;
  std::size_t columns_ = 0;
};

}  // namespace vhsim
