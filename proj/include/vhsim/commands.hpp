#pragma once

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include "vhsim/world.hpp"

namespace vhsim {

enum class CommandType { set_target, toggle_guide, pause, reset };

/// A live command, validated against the scenario when received and applied
/// to the world only between steps.
struct Command {
  CommandType type = CommandType::reset;
  /// Task name for set_target, guide name for toggle_guide.
  std::string name;
  /// set_target: missing parts keep the target's current value.
  std::optional<Eigen::Vector3d> position;
  std::optional<Eigen::Quaterniond> orientation;
  /// set_target: drop the override and return to the scripted target.
  bool clear = false;
  /// toggle_guide: explicit state; flips the guide when absent.
  std::optional<bool> on;
  bool paused = false;
  /// The message as received, re-serialized. The command log stores this so
  /// a replay parses exactly the same numbers.
  std::string source;
};

/// Parses and validates a client message. Throws SchemaError naming the
/// offending field ("command.task", ...).
Command parse_command(const std::string& text, const Scenario& scenario);

/// JSON text of a command: the received message when known.
std::string command_json(const Command& command);

/// Applies a command at a step boundary. `paused` is the session's pause
/// flag. Returns true when the world was reset.
bool apply_command(World& world, const Command& command, bool& paused);

struct LoggedCommand {
  /// Number of steps the session had executed when the command was applied.
  std::size_t tick = 0;
  Command command;
};

/// Commands of a live session, as JSON lines:
///   {"tick": n, "command": {...}}   one per applied command
///   {"tick": n, "type": "end"}      last line, steps executed in total
struct CommandLog {
  std::vector<LoggedCommand> entries;
  std::size_t end_tick = 0;
};

CommandLog read_command_log(const std::filesystem::path& file, const Scenario& scenario);

/// Appends commands to a log file as they are applied, flushing every line.
class CommandRecorder {
 public:
  explicit CommandRecorder(const std::filesystem::path& file);

  void record(std::size_t tick, const Command& command);
  void finish(std::size_t tick);

 private:
  std::ofstream out_;
};

}  // namespace vhsim
