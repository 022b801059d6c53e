#include "vhsim/commands.hpp"

#include <set>

#include "json_fields.hpp"
#include "vhsim/errors.hpp"

namespace vhsim {

using detail::json;

namespace {

void check_keys(const json& j, const std::string& path, const std::set<std::string>& allowed) {
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key)) throw SchemaError(detail::child(path, key), "unknown field");
  }
}

Command command_from_json(const json& j, const Scenario& scenario) {
  const std::string path = "command";
  detail::expect_object(j, path);
  if (const json* v = detail::optional_member(j, "version")) {
    if (detail::integer(*v, detail::child(path, "version")) != 1) {
      throw SchemaError(detail::child(path, "version"), "unsupported protocol version");
    }
  }
  const std::string type = detail::string(detail::member(j, "type", path), detail::child(path, "type"));
  Command c;
  if (type == "set_target") {
    check_keys(j, path, {"type", "version", "task", "position", "orientation", "rotation", "clear"});
    c.type = CommandType::set_target;
    c.name = detail::string(detail::member(j, "task", path), detail::child(path, "task"));
    if (scenario.find_task(c.name) < 0) throw SchemaError(detail::child(path, "task"), "unknown task '" + c.name + "'");
    if (const json* v = detail::optional_member(j, "clear")) c.clear = detail::boolean(*v, detail::child(path, "clear"));
    if (const json* v = detail::optional_member(j, "position")) c.position = detail::vec3(*v, detail::child(path, "position"));
    if (detail::optional_member(j, "orientation") || detail::optional_member(j, "rotation")) {
      c.orientation = detail::orientation_of(j, path);
    }
    if (!c.clear && !c.position && !c.orientation) {
      throw SchemaError(path, "set_target needs a position, an orientation or clear");
    }
    if (c.clear && (c.position || c.orientation)) throw SchemaError(path, "clear excludes a new pose");
  } else if (type == "toggle_guide") {
    check_keys(j, path, {"type", "version", "guide", "on"});
    c.type = CommandType::toggle_guide;
    c.name = detail::string(detail::member(j, "guide", path), detail::child(path, "guide"));
    if (scenario.find_guide(c.name) < 0) {
      throw SchemaError(detail::child(path, "guide"), "unknown guide '" + c.name + "'");
    }
    if (const json* v = detail::optional_member(j, "on")) c.on = detail::boolean(*v, detail::child(path, "on"));
  } else if (type == "pause") {
    check_keys(j, path, {"type", "version", "paused"});
    c.type = CommandType::pause;
    c.paused = detail::boolean(detail::member(j, "paused", path), detail::child(path, "paused"));
  } else if (type == "reset") {
    check_keys(j, path, {"type", "version"});
    c.type = CommandType::reset;
  } else {
    throw SchemaError(detail::child(path, "type"), "unknown command type '" + type + "'");
  }
  c.source = j.dump();
  return c;
}

json to_json(const Command& c) {
  json j;
  switch (c.type) {
    case CommandType::set_target:
      j["type"] = "set_target";
      j["task"] = c.name;
      if (c.clear) j["clear"] = true;
      if (c.position) j["position"] = detail::vector_json(*c.position);
      if (c.orientation) j["orientation"] = detail::quaternion_json(*c.orientation);
      break;
    case CommandType::toggle_guide:
      j["type"] = "toggle_guide";
      j["guide"] = c.name;
      if (c.on) j["on"] = *c.on;
      break;
    case CommandType::pause:
      j["type"] = "pause";
      j["paused"] = c.paused;
      break;
    case CommandType::reset:
      j["type"] = "reset";
      break;
  }
  return j;
}

}  // namespace

Command parse_command(const std::string& text, const Scenario& scenario) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw SchemaError("command", std::string("malformed JSON: ") + e.what());
  }
  return command_from_json(j, scenario);
}

std::string command_json(const Command& command) {
  return command.source.empty() ? to_json(command).dump() : command.source;
}

bool apply_command(World& world, const Command& c, bool& paused) {
  switch (c.type) {
    case CommandType::set_target: {
      if (c.clear) {
        world.clear_target(c.name);
        break;
      }
      const auto task = static_cast<std::size_t>(world.scenario().find_task(c.name));
      Eigen::Isometry3d pose = world.target(task, world.time());
      if (c.position) pose.translation() = *c.position;
      if (c.orientation) pose.linear() = c.orientation->normalized().toRotationMatrix();
      world.set_target(c.name, pose);
      break;
    }
    case CommandType::toggle_guide: {
      const auto guide = static_cast<std::size_t>(world.scenario().find_guide(c.name));
      world.set_guide(c.name, c.on ? *c.on : !world.guide_on(guide));
      break;
    }
    case CommandType::pause:
      paused = c.paused;
      break;
    case CommandType::reset:
      world.reset();
      return true;
  }
  return false;
}

CommandLog read_command_log(const std::filesystem::path& file, const Scenario& scenario) {
  std::ifstream in(file);
  if (!in) throw ConfigurationError("cannot open command log " + file.string());
  CommandLog log;
  bool ended = false;
  std::string line;
  std::size_t number = 0;
  std::size_t last_tick = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string path = "line " + std::to_string(number);
    if (ended) throw SchemaError(path, "entry after the end marker");
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw SchemaError(path, std::string("malformed JSON: ") + e.what());
    }
    detail::expect_object(j, path);
    const int tick = detail::integer(detail::member(j, "tick", path), detail::child(path, "tick"));
    if (tick < 0 || static_cast<std::size_t>(tick) < last_tick) {
      throw SchemaError(detail::child(path, "tick"), "ticks must be non-negative and non-decreasing");
    }
    last_tick = static_cast<std::size_t>(tick);
    if (const json* type = detail::optional_member(j, "type")) {
      if (detail::string(*type, detail::child(path, "type")) != "end") {
        throw SchemaError(detail::child(path, "type"), "expected \"end\"");
      }
      log.end_tick = last_tick;
      ended = true;
      continue;
    }
    log.entries.push_back({last_tick, command_from_json(detail::member(j, "command", path), scenario)});
  }
  if (!ended) throw SchemaError(file.string(), "command log has no end marker");
  return log;
}

CommandRecorder::CommandRecorder(const std::filesystem::path& file) : out_(file) {
  if (!out_) throw ConfigurationError("cannot write command log " + file.string());
}

void CommandRecorder::record(std::size_t tick, const Command& command) {
  json j;
  j["tick"] = tick;
  j["command"] = json::parse(command_json(command));
  out_ << j.dump() << '\n' << std::flush;
}

void CommandRecorder::finish(std::size_t tick) {
  json j;
  j["tick"] = tick;
  j["type"] = "end";
  out_ << j.dump() << '\n' << std::flush;
}

}  // namespace vhsim
