#include "vhsim/protocol.hpp"

#include "json_fields.hpp"
#include "vhsim/trace.hpp"

namespace vhsim {

using detail::json;

namespace {

json pose_json(const Eigen::Isometry3d& pose) {
  return {{"position", detail::vector_json(pose.translation())},
          {"orientation", detail::quaternion_json(Eigen::Quaterniond(pose.linear()))}};
}

json obstacle_json(const Obstacle& o) {
  json j = {{"name", o.name}};
  if (o.kind == Obstacle::Kind::half_space) {
    j["type"] = "half_space";
    j["normal"] = detail::vector_json(o.normal);
    j["offset"] = o.offset;
  } else {
    j["type"] = "sphere";
    j["center"] = detail::vector_json(o.center);
    j["radius"] = o.radius;
  }
  return j;
}

}  // namespace

std::string hello_json(const World& world) {
  const Scenario& s = world.scenario();
  json links = json::array();
  for (const LinkSpec& l : s.chain.links()) {
    links.push_back({{"name", l.name}, {"parent", l.parent}, {"length", l.length}});
  }
  json probes = json::array();
  for (const CollisionProbe& p : s.chain.probes()) probes.push_back(p.name);
  json obstacles = json::array();
  for (const Obstacle& o : s.obstacles) obstacles.push_back(obstacle_json(o));
  json tasks = json::array();
  for (const TaskSpec& t : s.tasks) tasks.push_back(t.name);
  json guides = json::array();
  for (std::size_t g = 0; g < s.guides.size(); ++g) {
    const VirtualMechanism& m = s.guides[g].mechanism;
    guides.push_back({{"name", m.name},
                      {"ideal_axis", s.guides[g].track_axis ? detail::vector_json(m.ideal_axis) : json()},
                      {"on", world.guide_on(g)}});
  }
  const json j = {{"type", "hello"},
                  {"version", protocol_version},
                  {"scenario", s.name},
                  {"description", s.description},
                  {"hash", s.hash},
                  {"dt", s.dt},
                  {"duration", s.duration},
                  {"beta_sq", world.beta_sq()},
                  {"columns", trace_columns(world)},
                  {"chain", {{"name", s.chain.name()}, {"links", links}, {"probes", probes}}},
                  {"obstacles", obstacles},
                  {"tasks", tasks},
                  {"guides", guides}};
  return j.dump();
}

std::string frame_json(const World& world, bool paused) {
  const Scenario& s = world.scenario();
  const StepReport& r = world.report();

  json trace = json::array();
  for (double v : trace_values(world)) trace.push_back(v);
  trace.push_back(verdict_text(world));

  const auto frames = forward_kinematics(s.chain, world.state());
  json links = json::array();
  for (const auto& f : frames) links.push_back(pose_json(f));

  json tasks = json::array();
  for (std::size_t i = 0; i < s.tasks.size(); ++i) {
    const Eigen::Isometry3d pose = frame_pose(frames, s.tasks[i].frame);
    const Eigen::Isometry3d target = i < r.tasks.size() ? r.tasks[i].target : world.target(i, world.time());
    const Vector6d e = lie::pose_error(target, pose);
    tasks.push_back({{"name", s.tasks[i].name},
                     {"pose", pose_json(pose)},
                     {"target", pose_json(target)},
                     {"pos_err", e.head<3>().norm()},
                     {"rot_err", e.tail<3>().norm()},
                     {"overridden", i < r.tasks.size() && r.tasks[i].overridden}});
  }

  json contacts = json::array();
  for (const ContactReport& c : r.contacts) {
    contacts.push_back({{"probe", s.chain.probes()[static_cast<std::size_t>(c.probe)].name},
                        {"obstacle", s.obstacles[static_cast<std::size_t>(c.obstacle)].name},
                        {"gap", c.gap},
                        {"force", c.force},
                        {"penetrating", c.gap < 0.0}});
  }

  json guides = json::array();
  for (std::size_t g = 0; g < r.guides.size(); ++g) {
    const VirtualMechanism& m = s.guides[g].mechanism;
    const GuideReport& gr = r.guides[g];
    guides.push_back({{"name", m.name},
                      {"on", gr.on},
                      {"axis_error", gr.axis_error},
                      {"ideal_axis", s.guides[g].track_axis ? detail::vector_json(m.ideal_axis) : json()},
                      {"actual_axis", detail::vector_json(gr.manikin_pose.linear() * m.tool_axis_local)},
                      {"tool", pose_json(gr.tool_pose)},
                      {"spring_energy", gr.spring_energy}});
  }

  const Verdict& verdict = world.ledger().total_verdict();
  json passivity = {{"E_total", world.ledger().total_energy()},
                    {"beta_sq", world.beta_sq()},
                    {"violated", verdict.violated}};
  if (verdict.violated) passivity["violation_time"] = verdict.violation_time;

  const json j = {{"type", "frame"},
                  {"version", protocol_version},
                  {"step", world.step_index()},
                  {"t", world.time()},
                  {"paused", paused},
                  {"finished", world.finished()},
                  {"trace", trace},
                  {"links", links},
                  {"tasks", tasks},
                  {"contacts", contacts},
                  {"guides", guides},
                  {"passivity", passivity}};
  return j.dump();
}

std::string ack_json(const Command& command) {
  return json({{"type", "ack"}, {"version", protocol_version}, {"command", json::parse(command_json(command))}}).dump();
}

std::string error_json(const std::string& message) {
  return json({{"type", "error"}, {"version", protocol_version}, {"message", message}}).dump();
}

}  // namespace vhsim
