#include "vhsim/trace.hpp"

#include <cmath>
#include <cstdio>

#include "vhsim/errors.hpp"

namespace vhsim {

std::vector<std::string> trace_columns(const World& world) {
  const Scenario& s = world.scenario();
  std::vector<std::string> c = {"t"};
  if (s.chain.has_floating_base()) {
    for (const char* n : {"base_x", "base_y", "base_z", "base_qw", "base_qx", "base_qy", "base_qz"}) c.push_back(n);
  }
  for (const LinkSpec& link : s.chain.links()) {
    if (link.joint.kind != JointKind::floating_base) c.push_back("q_" + link.name);
  }
  for (const TaskSpec& task : s.tasks) {
    const std::string p = "task_" + task.name + "_";
    for (const char* n : {"x", "y", "z", "target_x", "target_y", "target_z", "pos_err", "rot_err"}) c.push_back(p + n);
  }
  for (const PortAccount& a : world.ledger().accounts()) {
    c.push_back("P_" + a.id);
    c.push_back("E_" + a.id);
  }
  for (const char* n : {"E_total", "joint_dissipation", "storage", "dissipated"}) c.push_back(n);
  for (const PortAccount& a : world.joint_ledger().accounts()) c.push_back("Ejoint_" + a.id);
  const auto& probes = s.chain.probes();
  for (const CollisionProbe& p : probes) {
    for (const Obstacle& o : s.obstacles) {
      c.push_back("gap_" + p.name + "_" + o.name);
      c.push_back("force_" + p.name + "_" + o.name);
    }
  }
  for (const char* n : {"active_constraints", "lcp_residual", "max_limit_violation"}) c.push_back(n);
  for (const GuideSpec& g : s.guides) {
    const std::string p = "guide_" + g.mechanism.name + "_";
    for (const char* n : {"on", "axis_err", "spring", "dissipated"}) c.push_back(p + n);
  }
  c.push_back("verdict");
  return c;
}

std::vector<double> trace_values(const World& world) {
  const Scenario& s = world.scenario();
  const StepReport& r = world.report();
  const SimState& q = world.state();
  std::vector<double> v = {world.time()};
  if (s.chain.has_floating_base()) {
    const Eigen::Quaterniond& o = q.base_orientation;
    for (double x : {q.base_position.x(), q.base_position.y(), q.base_position.z(), o.w(), o.x(), o.y(), o.z()}) {
      v.push_back(x);
    }
  }
  for (Eigen::Index i = 0; i < q.joints.size(); ++i) v.push_back(q.joints[i]);
  for (std::size_t i = 0; i < s.tasks.size(); ++i) {
    if (i < r.tasks.size()) {
      const TaskReport& t = r.tasks[i];
      const Eigen::Vector3d p = t.pose.translation();
      const Eigen::Vector3d d = t.target.translation();
      for (double x : {p.x(), p.y(), p.z(), d.x(), d.y(), d.z(), t.error.head<3>().norm(), t.error.tail<3>().norm()}) {
        v.push_back(x);
      }
    } else {
      // Before the first step: report against the initial target.
      const auto frames = forward_kinematics(s.chain, q);
      const Eigen::Isometry3d pose = frame_pose(frames, s.tasks[i].frame);
      const Eigen::Isometry3d target = world.target(i, world.time());
      const Vector6d e = lie::pose_error(target, pose);
      const Eigen::Vector3d p = pose.translation();
      const Eigen::Vector3d d = target.translation();
      for (double x : {p.x(), p.y(), p.z(), d.x(), d.y(), d.z(), e.head<3>().norm(), e.tail<3>().norm()}) {
        v.push_back(x);
      }
    }
  }
  for (const PortAccount& a : world.ledger().accounts()) {
    v.push_back(a.power);
    v.push_back(a.energy);
  }
  v.push_back(world.ledger().total_energy());
  v.push_back(world.joint_dissipation());
  v.push_back(world.step_index() > 0 ? r.storage : world.initial_storage());
  v.push_back(world.dissipated());
  for (const PortAccount& a : world.joint_ledger().accounts()) v.push_back(a.energy);
  const std::size_t pairs = s.chain.probes().size() * s.obstacles.size();
  for (std::size_t k = 0; k < pairs; ++k) {
    if (k < r.contacts.size()) {
      v.push_back(r.contacts[k].gap);
      v.push_back(r.contacts[k].force);
    } else {
      v.push_back(std::nan(""));
      v.push_back(0.0);
    }
  }
  v.push_back(static_cast<double>(r.active_constraints));
  v.push_back(r.lcp_residual);
  v.push_back(r.max_limit_violation);
  for (std::size_t g = 0; g < s.guides.size(); ++g) {
    if (g < r.guides.size()) {
      const GuideReport& gr = r.guides[g];
      v.push_back(gr.on ? 1.0 : 0.0);
      v.push_back(gr.axis_error);
      v.push_back(gr.spring_energy);
      v.push_back(gr.dissipated);
    } else {
      v.push_back(world.guide_on(g) ? 1.0 : 0.0);
      v.push_back(std::nan(""));
      v.push_back(0.0);
      v.push_back(0.0);
    }
  }
  return v;
}

std::string verdict_text(const World& world) {
  return world.ledger().total_verdict().violated ? "violated" : "ok";
}

std::string format_number(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

TraceWriter::TraceWriter(std::ostream& out, const World& world) : out_(out), world_(world) {}

void TraceWriter::write_header() {
  const Scenario& s = world_.scenario();
  out_ << "# scenario=" << s.name << " hash=" << s.hash << " version=" << trace_version << '\n';
  const auto columns = trace_columns(world_);
  columns_ = columns.size();
  for (std::size_t i = 0; i < columns.size(); ++i) out_ << (i ? "," : "") << columns[i];
  out_ << '\n';
}

void TraceWriter::write_row() {
  const auto values = trace_values(world_);
  if (columns_ != 0 && values.size() + 1 != columns_) {
    throw Error("trace row does not match the header");
  }
  for (double x : values) out_ << format_number(x) << ',';
  out_ << verdict_text(world_) << '\n';
}

}  // namespace vhsim
