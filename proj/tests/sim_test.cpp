#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <bit>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include <json.hpp>

#include "vhsim/commands.hpp"
#include "vhsim/errors.hpp"
#include "vhsim/protocol.hpp"
#include "vhsim/run.hpp"
#include "vhsim/scenario.hpp"
#include "vhsim/trace.hpp"
#include "vhsim/world.hpp"

using namespace vhsim;
using nlohmann::json;

namespace {

const std::filesystem::path kDir = VHSIM_SCENARIO_DIR;

Scenario bundled(const std::string& name, const std::vector<std::string>& sets = {}) {
  std::vector<Override> overrides;
  for (const auto& s : sets) overrides.push_back(parse_override(s));
  return load_scenario(kDir / (name + ".json"), overrides);
}

Scenario inline_scenario(const std::string& text) { return parse_scenario(text, kDir); }

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("vhsim_sim_test_" + name);
}

bool same_bits(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size()) return false;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    if (std::bit_cast<std::uint64_t>(a[i]) != std::bit_cast<std::uint64_t>(b[i])) return false;
  }
  return true;
}

/// Redundant prismatic gantry with a hand task that follows a moving target.
const char* kGantry = R"({
  "version": 1, "name": "gantry_track", "chain": "chains/gantry2.json", "dt": 0.01, "duration": 6.0,
  "tasks": [{
    "name": "hand", "frame": {"link": "slide_skew"},
    "stiffness": [80, 80, 80, 0, 0, 0], "damping": [6, 6, 6, 1, 1, 1], "relative": true,
    "waypoints": [{"t": 0, "position": [0.1, 0, 0]}, {"t": 2, "position": [0.4, 0.3, 0]},
                  {"t": 4, "position": [-0.2, 0.1, 0]}]
  }]
})";

}  // namespace

TEST_CASE("empty world only advances time") {
  World w(inline_scenario(
      R"({"version": 1, "name": "empty", "chain": "chains/arm7.json", "dt": 0.01, "duration": 0.5,
          "initial": {"joints": [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7]}})"));
  const SimState start = w.state();
  while (!w.finished()) w.step();
  CHECK(w.step_index() == 50);
  CHECK(w.time() == doctest::Approx(0.5));
  CHECK(same_bits(w.state().joints, start.joints));
  CHECK(w.ledger().total_energy() == 0.0);
}

TEST_CASE("identical scenarios produce bitwise identical traces") {
  const auto a = temp_file("det_a.csv"), b = temp_file("det_b.csv");
  run_scenario(bundled("drill_guided"), {a, std::nullopt});
  run_scenario(bundled("drill_guided"), {b, std::nullopt});
  const std::string ta = slurp(a);
  CHECK(ta.size() > 1000);
  CHECK(ta == slurp(b));
}

TEST_CASE("table lean: a full run without penetration") {
  const Scenario sc = bundled("table_lean");
  World w(sc);
  std::size_t rows = 0;
  double deepest = 0.0, max_contact_power = 0.0;
  bool touched = false;
  // Gap of each probe/obstacle pair at the start of the step.
  std::map<std::pair<int, int>, double> gap_before;
  while (!w.finished()) {
    w.step();
    ++rows;
    std::map<std::pair<int, int>, double> gap_after;
    for (const ContactReport& c : w.report().contacts) {
      deepest = std::max(deepest, -c.gap);
      CHECK(c.force >= 0.0);
      if (c.force > 0.0) touched = true;
      // Power into the manikin. A contact that was not penetrated can only
      // take energy out; pushing back out of a penetration may put some in.
      const auto it = gap_before.find({c.probe, c.obstacle});
      if (it == gap_before.end() || it->second >= 0.0) max_contact_power = std::max(max_contact_power, c.power);
      gap_after[{c.probe, c.obstacle}] = c.gap;
    }
    gap_before = std::move(gap_after);
    CHECK(w.report().lcp_residual < 1e-8);
  }
  CHECK(rows == 1000);
  CHECK(touched);
  CHECK(deepest < 1e-4);
  CHECK(max_contact_power <= 1e-8);
  CHECK(run_scenario(sc).max_penetration < 1e-4);
}

TEST_CASE("drill pair: the guide keeps the axis") {
  const RunSummary guided = run_scenario(bundled("drill_guided"));
  const RunSummary free = run_scenario(bundled("drill_free"));
  CHECK(guided.max_axis_error < free.max_axis_error);
  CHECK(guided.max_axis_error < 0.25 * free.max_axis_error);
  CHECK_FALSE(guided.verdict.violated);
}

TEST_CASE("energy drain scenario violates passivity at the predicted rate") {
  const RunSummary s = run_scenario(bundled("energy_drain"));
  CHECK(s.verdict.violated);
  World w(bundled("energy_drain"));
  while (!w.finished()) w.step();
  const double slope = w.ledger().total_energy() / w.time();
  CHECK(slope == doctest::Approx(-29.5).epsilon(0.02));
}

TEST_CASE("energy balance against an independent account") {
  // Operator energy in = change of spring storage + damper heat, where the
  // test recomputes storage and heat from the step reports.
  const Scenario sc = inline_scenario(kGantry);
  World w(sc);
  const TaskSpec& task = sc.tasks[0];
  const Eigen::MatrixXd ba = sc.chain.damping();
  auto storage = [&](const World& world) {
    const Vector6d e = world.report().tasks.empty() ? Vector6d::Zero() : world.report().tasks[0].error;
    return 0.5 * e.dot(task.stiffness * e);
  };
  const double u0 = w.initial_storage();
  double heat = 0.0;
  while (!w.finished()) {
    w.step();
    const StepReport& r = w.report();
    const Eigen::MatrixXd j = frame_jacobian(sc.chain, w.state(), task.frame.link, task.frame.point);
    const Vector6d slip = r.tasks[0].desired_twist - j * r.qdot;
    heat += sc.dt * (r.qdot.dot(ba * r.qdot) + slip.dot(task.damping * slip));
  }
  const double inflow = w.ledger().total_energy();
  const double balance = storage(w) - u0 + heat;
  CHECK(inflow > 0.1);
  CHECK(std::abs(inflow - balance) < 1e-3 * inflow);
}

TEST_CASE("internal accounting closes on every bundled scenario") {
  // E_total + internal joint work = storage change + dissipated heat.
  const std::map<std::string, double> tolerance{{"drill_free", 1e-3},   {"drill_guided", 1e-3}, {"floor_squat", 1e-3},
                                                {"posture_internal", 1e-3}, {"table_lean", 1e-2}, {"workshop", 1e-2},
                                                {"limit_sweep", 1e-2}};
  for (const auto& [name, tol] : tolerance) {
    CAPTURE(name);
    World w(bundled(name));
    while (!w.finished()) w.step();
    const PortAccount* internal = w.joint_ledger().find("internal");
    const double in = w.ledger().total_energy() + (internal ? internal->energy : 0.0);
    const double out = w.report().storage - w.initial_storage() + w.dissipated();
    CHECK(std::abs(in - out) <= tol * std::max(std::abs(in), std::abs(out)) + 1e-9);
    // The joint ledger splits the joint dissipation by torque source.
    CHECK(w.joint_ledger().total_energy() == doctest::Approx(w.joint_dissipation()).epsilon(1e-9));
  }
}

TEST_CASE("unprojected scenarios stay passive") {
  for (const char* name : {"drill_free", "drill_guided", "floor_squat", "limit_sweep", "table_lean", "workshop"}) {
    CAPTURE(name);
    const RunSummary s = run_scenario(bundled(name));
    CHECK(s.min_total_energy >= -s.beta_sq - 1e-9);
    CHECK(s.min_joint_dissipation >= -1e-12);
    CHECK(s.max_limit_violation <= 1e-6);
    CHECK_FALSE(s.verdict.violated);
  }
}

TEST_CASE("idle operator: stored energy never grows") {
  const Scenario sc = bundled("drill_guided", {R"(tasks.0.waypoints=[{"t": 0, "position": [0.05, 0.03, -0.02]}])",
                                               "tasks.0.noise.position_std=0", "tasks.0.noise.orientation_std=0"});
  World w(sc);
  double prev = w.initial_storage();
  while (!w.finished()) {
    w.step();
    CHECK(w.report().storage <= prev + 1e-9);
    prev = w.report().storage;
  }
  // The guide holds the hand off the target, so part of the spring stays loaded.
  CHECK(prev < w.initial_storage());
}

TEST_CASE("a stiff guide leaves one degree of freedom") {
  const Scenario sc = bundled("drill_guided", {"guides.0.stiffness=10000", "guides.0.damping=500",
                                               "tasks.0.noise.position_std=0", "tasks.0.noise.orientation_std=0",
                                               R"(tasks.0.waypoints=[{"t": 0, "position": [0, 0, 0]},
                                                  {"t": 1, "position": [0, 0, 0]},
                                                  {"t": 5, "position": [0.12, 0.06, 0.04]}])"});
  const Eigen::Vector3d axis = sc.guides[0].mechanism.ideal_axis;
  World w(sc);
  Eigen::Vector3d prev = Eigen::Vector3d::Zero();
  double along = 0.0, across = 0.0;
  while (!w.finished() && w.time() < 4.5) {
    w.step();
    const Eigen::Vector3d p = w.report().guides[0].manikin_pose.translation();
    if (w.time() > 2.0) {
      const Eigen::Vector3d v = (p - prev) / sc.dt;
      along += std::abs(v.dot(axis));
      across += (v - v.dot(axis) * axis).norm();
    }
    prev = p;
  }
  CHECK(along > 0.0);
  CHECK(across < 0.05 * along);
}

TEST_CASE("an inert guide does not change the trajectory") {
  World with(bundled("drill_guided", {"guides.0.stiffness=0", "guides.0.damping=0"}));
  World without(bundled("drill_guided", {"guides=[]"}));
  while (!with.finished()) {
    with.step();
    without.step();
    REQUIRE(same_bits(with.state().joints, without.state().joints));
  }
}

TEST_CASE("step errors carry the step index and leave the state untouched") {
  World w(bundled("table_lean"));
  for (int i = 0; i < 5; ++i) w.step();
  const SimState before = w.state();
  Eigen::Isometry3d bad = Eigen::Isometry3d::Identity();
  bad.translation() = Eigen::Vector3d(std::nan(""), 0, 0);
  w.set_target("hand", bad);
  try {
    w.step();
    FAIL("expected a step error");
  } catch (const StepError& e) {
    CHECK(e.step() == 5);
  }
  CHECK(w.step_index() == 5);
  CHECK(same_bits(w.state().joints, before.joints));
  w.clear_target("hand");
  CHECK_NOTHROW(w.step());
}

TEST_CASE("trace file layout") {
  const auto path = temp_file("layout.csv");
  const Scenario sc = bundled("drill_guided");
  run_scenario(sc, {path, std::nullopt});
  std::ifstream in(path);
  std::string manifest, header, line;
  std::getline(in, manifest);
  std::getline(in, header);
  CHECK(manifest == "# scenario=drill_guided hash=" + sc.hash + " version=1");
  const auto columns = std::count(header.begin(), header.end(), ',') + 1;
  CHECK(header.rfind("t,", 0) == 0);
  CHECK(header.find("guide_drill_axis_axis_err") != std::string::npos);
  CHECK(header.find("E_total") != std::string::npos);
  CHECK(header.substr(header.size() - 7) == "verdict");
  std::size_t rows = 0;
  double last_t = -1.0;
  while (std::getline(in, line)) {
    ++rows;
    CHECK(std::count(line.begin(), line.end(), ',') + 1 == columns);
    const double t = std::stod(line.substr(0, line.find(',')));
    CHECK(t > last_t);
    last_t = t;
  }
  CHECK(rows == 1000);
}

TEST_CASE("trace numbers read back exactly") {
  for (double x : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0}) {
    CHECK(std::stod(format_number(x)) == x);
  }
}

TEST_CASE("commands are validated against the scenario") {
  const Scenario sc = bundled("drill_guided");
  auto path_of = [&](const std::string& text) -> std::string {
    try {
      parse_command(text, sc);
    } catch (const SchemaError& e) {
      return e.path();
    }
    return "";
  };
  CHECK(path_of(R"({"type": "set_target", "task": "foot", "position": [0, 0, 1]})") == "command.task");
  CHECK(path_of(R"({"type": "toggle_guide", "guide": "nope"})") == "command.guide");
  CHECK(path_of(R"({"type": "fly"})") == "command.type");
  CHECK(path_of(R"({"type": "pause", "paused": true, "extra": 1})") == "command.extra");
  CHECK(path_of(R"({"type": "reset", "version": 2})") == "command.version");
  CHECK(path_of(R"({"type": "set_target", "task": "drill", "position": [0, 1]})") == "command.position");
  CHECK(path_of("not json").rfind("command", 0) == 0);
  CHECK(path_of(R"({"type": "set_target", "task": "drill", "position": [0.5, -0.2, 1.4]})").empty());
}

TEST_CASE("commands act on the world at the next step") {
  const Scenario sc = bundled("drill_guided");
  World w(sc);
  bool paused = false;
  for (int i = 0; i < 10; ++i) w.step();

  apply_command(w, parse_command(R"({"type": "set_target", "task": "drill", "position": [0.6, -0.25, 1.45]})", sc),
                paused);
  w.step();
  CHECK(w.report().tasks[0].overridden);
  CHECK((w.report().tasks[0].target.translation() - Eigen::Vector3d(0.6, -0.25, 1.45)).norm() < 1e-15);

  CHECK(w.guide_on(0));
  apply_command(w, parse_command(R"({"type": "toggle_guide", "guide": "drill_axis"})", sc), paused);
  CHECK_FALSE(w.guide_on(0));
  apply_command(w, parse_command(R"({"type": "toggle_guide", "guide": "drill_axis", "on": true})", sc), paused);
  CHECK(w.guide_on(0));

  apply_command(w, parse_command(R"({"type": "pause", "paused": true})", sc), paused);
  CHECK(paused);
  CHECK(apply_command(w, parse_command(R"({"type": "reset"})", sc), paused));
  CHECK(w.step_index() == 0);
  w.step();
  CHECK_FALSE(w.report().tasks[0].overridden);
}

TEST_CASE("a recorded session replays to the identical trace") {
  const Scenario sc = bundled("drill_guided");
  const auto log_path = temp_file("session.jsonl");
  const auto live_trace = temp_file("live.csv"), replay_trace = temp_file("replay.csv");
  {
    // A live session without the network: commands land between steps.
    World w(sc);
    std::ofstream out(live_trace);
    TraceWriter trace(out, w);
    trace.write_header();
    CommandRecorder recorder(log_path);
    bool paused = false;
    const std::map<std::size_t, std::string> script{
        {50, R"({"type": "toggle_guide", "guide": "drill_axis"})"},
        {120, R"({"type": "set_target", "task": "drill", "position": [0.61, -0.2, 1.5], "orientation": [1, 0, 0, 0]})"},
        {121, R"({"type": "set_target", "task": "drill", "position": [0.62, -0.21, 1.5]})"},
        {300, R"({"type": "toggle_guide", "guide": "drill_axis", "on": true})"},
        {400, R"({"type": "set_target", "task": "drill", "clear": true})"}};
    for (std::size_t tick = 0; tick < 600; ++tick) {
      if (auto it = script.find(tick); it != script.end()) {
        const Command c = parse_command(it->second, sc);
        apply_command(w, c, paused);
        recorder.record(tick, c);
      }
      w.step();
      trace.write_row();
    }
    recorder.finish(600);
  }
  const CommandLog log = read_command_log(log_path, sc);
  CHECK(log.entries.size() == 5);
  CHECK(log.end_tick == 600);
  const RunSummary s = run_scenario(sc, {replay_trace, log_path});
  CHECK(s.steps == 600);
  CHECK(slurp(live_trace) == slurp(replay_trace));
}

TEST_CASE("protocol messages") {
  const Scenario sc = bundled("workshop");
  World w(sc);
  const json hello = json::parse(hello_json(w));
  CHECK(hello["type"] == "hello");
  CHECK(hello["version"] == protocol_version);
  CHECK(hello["hash"] == sc.hash);
  CHECK(hello["columns"].size() == trace_columns(w).size());
  CHECK(hello["chain"]["links"].size() == sc.chain.links().size());
  bool untracked = false;
  for (const auto& g : hello["guides"]) untracked = untracked || g["ideal_axis"].is_null();
  CHECK(untracked);

  for (int i = 0; i < 20; ++i) w.step();
  const json frame = json::parse(frame_json(w, false));
  CHECK(frame["type"] == "frame");
  CHECK(frame["step"] == 20);
  const auto values = trace_values(w);
  REQUIRE(frame["trace"].size() == values.size() + 1);
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (std::isfinite(values[i])) {
      CHECK(std::bit_cast<std::uint64_t>(frame["trace"][i].get<double>()) == std::bit_cast<std::uint64_t>(values[i]));
    } else {
      CHECK(frame["trace"][i].is_null());
    }
  }
  CHECK(frame["trace"].back() == verdict_text(w));
  CHECK(json::parse(error_json("bad"))["type"] == "error");
  const Command c = parse_command(R"({"type": "pause", "paused": true})", sc);
  CHECK(json::parse(ack_json(c))["type"] == "ack");
}
