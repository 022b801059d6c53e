#include "vhsim/scenario.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <initializer_list>
#include <numbers>
#include <random>
#include <sstream>

#include "chain_json.hpp"
#include "vhsim/chain_io.hpp"
#include "vhsim/errors.hpp"

#ifndef VHSIM_SCENARIO_DIR
#define VHSIM_SCENARIO_DIR "scenarios"
#endif

namespace vhsim {

namespace {

using detail::child;
using detail::json;

void check_keys(const json& obj, const std::string& path, std::initializer_list<const char*> allowed) {
  detail::expect_object(obj, path);
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool known = false;
    for (const char* key : allowed) known = known || it.key() == key;
    if (!known) throw SchemaError(child(path, it.key()), "unknown field");
  }
}

std::string fnv1a(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream out;
  out << std::hex;
  out.width(16);
  out.fill('0');
  out << h;
  return out.str();
}

std::string read_file(const std::filesystem::path& file, const std::string& path) {
  std::ifstream in(file);
  if (!in) throw SchemaError(path, "cannot open '" + file.string() + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

json parse_json(const std::string& text, const std::string& path) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw SchemaError(path, std::string("invalid JSON: ") + e.what());
  }
}

int link_index(const KinematicChain& chain, const json& j, const std::string& path) {
  if (j.is_number_integer()) {
    const int idx = j.get<int>();
    if (idx < 0 || idx >= static_cast<int>(chain.links().size())) throw SchemaError(path, "link index out of range");
    return idx;
  }
  const std::string name = detail::string(j, path);
  const int idx = chain.find_link(name);
  if (idx < 0) throw SchemaError(path, "unknown link '" + name + "' in chain '" + chain.name() + "'");
  return idx;
}

FrameRef frame_ref(const KinematicChain& chain, const json& j, const std::string& path) {
  check_keys(j, path, {"link", "point", "orientation", "rotation"});
  FrameRef f;
  f.link = link_index(chain, detail::member(j, "link", path), child(path, "link"));
  if (const json* p = detail::optional_member(j, "point")) f.point = detail::vec3(*p, child(path, "point"));
  f.orientation = detail::orientation_of(j, path);
  return f;
}

Matrix6d gain6(const json& j, const std::string& path) { return detail::gain(j, 6, path); }

std::vector<int> twist_rows(const json& j, const std::string& path) {
  detail::expect_array(j, path);
  static const char* names[] = {"x", "y", "z", "rx", "ry", "rz"};
  std::vector<int> rows;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string p = child(path, i);
    int row = -1;
    if (j[i].is_number_integer()) {
      row = j[i].get<int>();
    } else {
      const std::string s = detail::string(j[i], p);
      for (int k = 0; k < 6; ++k) {
        if (s == names[k]) row = k;
      }
    }
    if (row < 0 || row > 5) throw SchemaError(p, "expected a twist row (x, y, z, rx, ry, rz or 0..5)");
    rows.push_back(row);
  }
  if (rows.empty()) throw SchemaError(path, "at least one row is required");
  return rows;
}

SimState parse_state(const KinematicChain& chain, const json* j, const std::string& path) {
  SimState s = make_state(chain);
  if (!j) return s;
  check_keys(*j, path, {"joints", "base"});
  if (const json* q = detail::optional_member(*j, "joints")) {
    s.joints = detail::vector(*q, child(path, "joints"), chain.joint_count());
  }
  if (const json* b = detail::optional_member(*j, "base")) {
    if (!chain.has_floating_base()) throw SchemaError(child(path, "base"), "chain has no floating base");
    const Eigen::Isometry3d pose = detail::pose(*b, child(path, "base"));
    s.base_position = pose.translation();
    s.base_orientation = Eigen::Quaterniond(pose.linear()).normalized();
  }
  return s;
}

KinematicChain chain_field(const json& j, const std::filesystem::path& base_dir, const std::string& path) {
  if (j.is_string()) {
    const std::filesystem::path file = base_dir / j.get<std::string>();
    return detail::chain_from_json(parse_json(read_file(file, path), path), path);
  }
  return detail::chain_from_json(j, path);
}

/// Chain JSON as it will be simulated, for hashing.
json resolved_chain_json(const json& j, const std::filesystem::path& base_dir, const std::string& path) {
  return detail::chain_to_json(chain_field(j, base_dir, path));
}

NoiseSpec parse_noise(const json& j, const std::string& path, std::uint64_t default_seed) {
  check_keys(j, path, {"position_std", "orientation_std", "min_frequency", "max_frequency", "components", "seed"});
  NoiseSpec n;
  n.seed = default_seed;
  if (const json* v = detail::optional_member(j, "position_std")) n.position_std = detail::number(*v, child(path, "position_std"));
  if (const json* v = detail::optional_member(j, "orientation_std")) {
    n.orientation_std = detail::number(*v, child(path, "orientation_std"));
  }
  if (const json* v = detail::optional_member(j, "min_frequency")) {
    n.min_frequency = detail::positive_number(*v, child(path, "min_frequency"));
  }
  if (const json* v = detail::optional_member(j, "max_frequency")) {
    n.max_frequency = detail::positive_number(*v, child(path, "max_frequency"));
  }
  if (const json* v = detail::optional_member(j, "components")) n.components = detail::integer(*v, child(path, "components"));
  if (const json* v = detail::optional_member(j, "seed")) {
    n.seed = static_cast<std::uint64_t>(detail::integer(*v, child(path, "seed")));
  }
  if (n.position_std < 0.0 || n.orientation_std < 0.0) throw SchemaError(path, "noise levels must be non-negative");
  if (n.components < 1) throw SchemaError(child(path, "components"), "must be at least 1");
  if (n.min_frequency > n.max_frequency) throw SchemaError(path, "min_frequency exceeds max_frequency");
  return n;
}

TaskSpec parse_task(const KinematicChain& chain, const SimState& initial, const json& j, const std::string& path,
                    std::uint64_t default_seed) {
  check_keys(j, path, {"name", "frame", "stiffness", "damping", "waypoints", "relative", "noise"});
  TaskSpec t;
  t.name = detail::string(detail::member(j, "name", path), child(path, "name"));
  t.frame = frame_ref(chain, detail::member(j, "frame", path), child(path, "frame"));
  t.stiffness = gain6(detail::member(j, "stiffness", path), child(path, "stiffness"));
  t.damping = gain6(detail::member(j, "damping", path), child(path, "damping"));
  TaskTarget probe;
  probe.name = t.name;
  probe.stiffness = t.stiffness;
  probe.damping = t.damping;
  try {
    validate(probe);
  } catch (const ConfigurationError& e) {
    throw SchemaError(path, e.what());
  }

  const Eigen::Isometry3d start = frame_pose(forward_kinematics(chain, initial), t.frame);
  bool relative = false;
  if (const json* r = detail::optional_member(j, "relative")) relative = detail::boolean(*r, child(path, "relative"));
  if (const json* wps = detail::optional_member(j, "waypoints")) {
    const std::string wp_path = child(path, "waypoints");
    detail::expect_array(*wps, wp_path);
    for (std::size_t i = 0; i < wps->size(); ++i) {
      const std::string p = child(wp_path, i);
      const json& w = (*wps)[i];
      check_keys(w, p, {"t", "position", "orientation", "rotation"});
      Waypoint wp;
      wp.t = detail::number(detail::member(w, "t", p), child(p, "t"));
      if (!t.waypoints.empty() && !(wp.t > t.waypoints.back().t)) {
        throw SchemaError(child(p, "t"), "waypoint times must be strictly increasing");
      }
      Eigen::Vector3d pos = Eigen::Vector3d::Zero();
      if (const json* v = detail::optional_member(w, "position")) pos = detail::vec3(*v, child(p, "position"));
      const Eigen::Quaterniond rot = detail::orientation_of(w, p);
      if (relative) {
        wp.pose = lie::make_pose(start.translation() + pos, rot * Eigen::Quaterniond(start.linear()));
      } else {
        if (!detail::optional_member(w, "position")) throw SchemaError(child(p, "position"), "missing required field");
        wp.pose = lie::make_pose(pos, rot);
      }
      t.waypoints.push_back(wp);
    }
  }
  if (t.waypoints.empty()) t.waypoints.push_back(Waypoint{0.0, start});
  if (const json* n = detail::optional_member(j, "noise")) t.noise = parse_noise(*n, child(path, "noise"), default_seed);
  t.jitter = realize_noise(t.noise);
  return t;
}

GuideSpec parse_guide(const KinematicChain& manikin, const json& j, const std::filesystem::path& base_dir,
                      const std::string& path) {
  check_keys(j, path, {"name", "chain", "tool_frame", "manikin_frame", "stiffness", "damping", "ideal_axis",
                       "tool_axis", "initial", "on", "schedule", "reseat"});
  GuideSpec g;
  VirtualMechanism& m = g.mechanism;
  m.name = detail::string(detail::member(j, "name", path), child(path, "name"));
  m.chain = chain_field(detail::member(j, "chain", path), base_dir, child(path, "chain"));
  m.tool_frame = frame_ref(m.chain, detail::member(j, "tool_frame", path), child(path, "tool_frame"));
  m.coupling.manikin_frame = frame_ref(manikin, detail::member(j, "manikin_frame", path), child(path, "manikin_frame"));
  m.coupling.stiffness = gain6(detail::member(j, "stiffness", path), child(path, "stiffness"));
  m.coupling.damping = gain6(detail::member(j, "damping", path), child(path, "damping"));
  const json* ideal = detail::optional_member(j, "ideal_axis");
  if (ideal) m.ideal_axis = detail::unit_vec3(*ideal, child(path, "ideal_axis"));
  if (const json* a = detail::optional_member(j, "tool_axis")) m.tool_axis_local = detail::unit_vec3(*a, child(path, "tool_axis"));
  try {
    validate(m);
  } catch (const ConfigurationError& e) {
    throw SchemaError(path, e.what());
  }
  g.track_axis = ideal != nullptr;
  g.initial_state = parse_state(m.chain, detail::optional_member(j, "initial"), child(path, "initial"));
  if (const json* on = detail::optional_member(j, "on")) g.initially_on = detail::boolean(*on, child(path, "on"));
  if (const json* r = detail::optional_member(j, "reseat")) g.reseat = detail::boolean(*r, child(path, "reseat"));
  if (const json* s = detail::optional_member(j, "schedule")) {
    const std::string sp = child(path, "schedule");
    detail::expect_array(*s, sp);
    for (std::size_t i = 0; i < s->size(); ++i) {
      const std::string p = child(sp, i);
      check_keys((*s)[i], p, {"t", "on"});
      GuideEvent ev;
      ev.t = detail::number(detail::member((*s)[i], "t", p), child(p, "t"));
      ev.on = detail::boolean(detail::member((*s)[i], "on", p), child(p, "on"));
      if (!g.schedule.empty() && !(ev.t > g.schedule.back().t)) {
        throw SchemaError(child(p, "t"), "schedule times must be strictly increasing");
      }
      g.schedule.push_back(ev);
    }
  }
  return g;
}

InternalSpec parse_internal(const Scenario& sc, const json& j, const std::string& path) {
  check_keys(j, path, {"enabled", "task", "reference", "weights", "alpha", "metric"});
  InternalSpec in;
  const int nj = sc.chain.joint_count();
  if (const json* e = detail::optional_member(j, "enabled")) in.enabled = detail::boolean(*e, child(path, "enabled"));
  in.reference = Eigen::VectorXd::Zero(nj);
  in.weights = Eigen::VectorXd::Ones(nj);
  if (const json* r = detail::optional_member(j, "reference")) in.reference = detail::vector(*r, child(path, "reference"), nj);
  if (const json* w = detail::optional_member(j, "weights")) {
    in.weights = w->is_number() ? Eigen::VectorXd::Constant(nj, detail::number(*w, child(path, "weights")))
                                : detail::vector(*w, child(path, "weights"), nj);
  }
  if ((in.weights.array() < 0.0).any()) throw SchemaError(child(path, "weights"), "weights must be non-negative");
  if (const json* a = detail::optional_member(j, "alpha")) in.alpha = detail::number(*a, child(path, "alpha"));
  if (in.alpha < 0.0) throw SchemaError(child(path, "alpha"), "alpha must be non-negative");
  if (const json* m = detail::optional_member(j, "metric")) {
    const std::string s = detail::string(*m, child(path, "metric"));
    if (s == "damping") {
      in.metric = ProjectionMetric::damping;
    } else if (s == "euclidean") {
      in.metric = ProjectionMetric::euclidean;
    } else {
      throw SchemaError(child(path, "metric"), "expected 'damping' or 'euclidean'");
    }
  }
  if (const json* t = detail::optional_member(j, "task")) in.task = detail::string(*t, child(path, "task"));
  if (in.enabled) {
    if (in.task.empty() || sc.find_task(in.task) < 0) {
      throw SchemaError(child(path, "task"), "internal control must name an existing task");
    }
  }
  return in;
}

Obstacle parse_obstacle(const json& j, const std::string& path, std::size_t index) {
  check_keys(j, path, {"name", "type", "normal", "offset", "center", "radius"});
  std::string name = "obstacle" + std::to_string(index);
  if (const json* n = detail::optional_member(j, "name")) name = detail::string(*n, child(path, "name"));
  const std::string type = detail::string(detail::member(j, "type", path), child(path, "type"));
  try {
    if (type == "half_space") {
      return Obstacle::half_space(name, detail::unit_vec3(detail::member(j, "normal", path), child(path, "normal")),
                                  detail::number(detail::member(j, "offset", path), child(path, "offset")));
    }
    if (type == "sphere") {
      return Obstacle::sphere(name, detail::vec3(detail::member(j, "center", path), child(path, "center")),
                              detail::number(detail::member(j, "radius", path), child(path, "radius")));
    }
  } catch (const ConfigurationError& e) {
    throw SchemaError(path, e.what());
  }
  throw SchemaError(child(path, "type"), "unknown obstacle type '" + type + "' (half_space, sphere)");
}

void apply_override(json& doc, const Override& o) {
  if (o.path.empty()) throw SchemaError("--set", "empty override path");
  std::vector<std::string> parts;
  std::stringstream ss(o.path);
  for (std::string part; std::getline(ss, part, '.');) {
    if (part.empty()) throw SchemaError(o.path, "empty path segment");
    parts.push_back(part);
  }
  auto is_index = [](const std::string& s) { return s.find_first_not_of("0123456789") == std::string::npos; };
  json* cur = &doc;
  std::string walked;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const std::string& key = parts[i];
    walked = walked.empty() ? key : walked + "." + key;
    const bool last = i + 1 == parts.size();
    json* next = nullptr;
    if (cur->is_array()) {
      if (!is_index(key)) throw SchemaError(walked, "expected an array index");
      const auto idx = static_cast<std::size_t>(std::stoul(key));
      if (idx >= cur->size()) throw SchemaError(walked, "array index out of range");
      next = &(*cur)[idx];
    } else if (cur->is_object() || cur->is_null()) {
      if (cur->is_null()) *cur = json::object();
      if (!last && !cur->contains(key)) (*cur)[key] = json::object();
      next = &(*cur)[key];
    } else {
      throw SchemaError(walked, "cannot descend into a scalar");
    }
    cur = next;
  }
  json value;
  try {
    value = json::parse(o.value);
  } catch (const json::parse_error&) {
    value = o.value;
  }
  *cur = std::move(value);
}

}  // namespace

std::vector<NoiseTerm> realize_noise(const NoiseSpec& spec) {
  std::vector<NoiseTerm> terms;
  if (spec.position_std <= 0.0 && spec.orientation_std <= 0.0) return terms;
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> freq(spec.min_frequency, spec.max_frequency);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  const double scale = std::sqrt(2.0 / spec.components);
  for (int axis = 0; axis < 6; ++axis) {
    const double sigma = axis < 3 ? spec.position_std : spec.orientation_std;
    for (int c = 0; c < spec.components; ++c) {
      NoiseTerm t;
      t.axis = axis;
      t.amplitude = sigma * scale;
      t.angular_frequency = 2.0 * std::numbers::pi * freq(rng);
      t.phase = phase(rng);
      if (sigma > 0.0) terms.push_back(t);
    }
  }
  return terms;
}

Eigen::Isometry3d scripted_target(const TaskSpec& task, double t) {
  const auto& wps = task.waypoints;
  Eigen::Vector3d p;
  Eigen::Quaterniond r;
  if (t <= wps.front().t) {
    p = wps.front().pose.translation();
    r = Eigen::Quaterniond(wps.front().pose.linear());
  } else if (t >= wps.back().t) {
    p = wps.back().pose.translation();
    r = Eigen::Quaterniond(wps.back().pose.linear());
  } else {
    std::size_t i = 1;
    while (wps[i].t < t) ++i;
    const Waypoint& a = wps[i - 1];
    const Waypoint& b = wps[i];
    const double s = (t - a.t) / (b.t - a.t);
    p = (1.0 - s) * a.pose.translation() + s * b.pose.translation();
    r = Eigen::Quaterniond(a.pose.linear()).slerp(s, Eigen::Quaterniond(b.pose.linear()));
  }
  if (!task.jitter.empty()) {
    Vector6d n = Vector6d::Zero();
    for (const NoiseTerm& term : task.jitter) {
      n[term.axis] += term.amplitude * std::sin(term.angular_frequency * t + term.phase);
    }
    p += n.head<3>();
    r = lie::so3_exp(n.tail<3>()) * r;
  }
  return lie::make_pose(p, r.normalized());
}

std::size_t Scenario::step_count() const { return static_cast<std::size_t>(std::llround(duration / dt)); }

int Scenario::find_task(const std::string& n) const {
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    if (tasks[i].name == n) return static_cast<int>(i);
  }
  return -1;
}

int Scenario::find_guide(const std::string& n) const {
  for (std::size_t i = 0; i < guides.size(); ++i) {
    if (guides[i].mechanism.name == n) return static_cast<int>(i);
  }
  return -1;
}

Override parse_override(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos || eq == 0) throw SchemaError("--set", "expected key.path=value, got '" + text + "'");
  return Override{text.substr(0, eq), text.substr(eq + 1)};
}

std::filesystem::path scenario_directory() {
  if (const char* env = std::getenv("VHSIM_SCENARIO_DIR"); env && *env) return env;
  return VHSIM_SCENARIO_DIR;
}

std::filesystem::path resolve_scenario(const std::string& name_or_path) {
  const std::filesystem::path direct(name_or_path);
  if (std::filesystem::is_regular_file(direct)) return direct;
  const std::filesystem::path bundled = scenario_directory() / (name_or_path + ".json");
  if (std::filesystem::is_regular_file(bundled)) return bundled;
  throw SchemaError(name_or_path, "no such scenario file or bundled scenario");
}

Scenario load_scenario(const std::filesystem::path& file, const std::vector<Override>& overrides) {
  return parse_scenario(read_file(file, file.string()), file.parent_path(), overrides);
}

Scenario parse_scenario(const std::string& json_text, const std::filesystem::path& base_dir,
                        const std::vector<Override>& overrides) {
  json doc = parse_json(json_text, "scenario");
  for (const Override& o : overrides) apply_override(doc, o);
  const std::string root;
  check_keys(doc, root,
             {"version", "name", "description", "chain", "dt", "duration", "seed", "initial", "obstacles",
              "constraints", "tasks", "guides", "internal", "counterexample", "constant_torque", "passivity"});
  detail::check_version(doc, root);

  Scenario sc;
  sc.name = detail::string(detail::member(doc, "name", root), "name");
  if (const json* d = detail::optional_member(doc, "description")) sc.description = detail::string(*d, "description");
  sc.chain = chain_field(detail::member(doc, "chain", root), base_dir, "chain");
  sc.dt = detail::positive_number(detail::member(doc, "dt", root), "dt");
  sc.duration = detail::number(detail::member(doc, "duration", root), "duration");
  if (!(sc.duration >= sc.dt)) throw SchemaError("duration", "duration must be at least one step");
  if (const json* s = detail::optional_member(doc, "seed")) sc.seed = static_cast<std::uint64_t>(detail::integer(*s, "seed"));
  sc.initial_state = parse_state(sc.chain, detail::optional_member(doc, "initial"), "initial");

  if (const json* obs = detail::optional_member(doc, "obstacles")) {
    detail::expect_array(*obs, "obstacles");
    for (std::size_t i = 0; i < obs->size(); ++i) sc.obstacles.push_back(parse_obstacle((*obs)[i], child("obstacles", i), i));
  }

  if (const json* c = detail::optional_member(doc, "constraints")) {
    check_keys(*c, "constraints", {"joint_limits", "contacts", "margin", "baumgarte", "tolerance", "max_iterations"});
    if (const json* v = detail::optional_member(*c, "joint_limits")) {
      sc.constraint_options.joint_limits = detail::boolean(*v, "constraints.joint_limits");
    }
    if (const json* v = detail::optional_member(*c, "contacts")) sc.constraint_options.contacts = detail::boolean(*v, "constraints.contacts");
    if (const json* v = detail::optional_member(*c, "margin")) {
      sc.constraint_options.activation_margin = detail::positive_number(*v, "constraints.margin");
    }
    if (const json* v = detail::optional_member(*c, "baumgarte")) sc.baumgarte = detail::number(*v, "constraints.baumgarte");
    if (sc.baumgarte < 0.0 || sc.baumgarte > 1.0) throw SchemaError("constraints.baumgarte", "must lie in [0, 1]");
    if (const json* v = detail::optional_member(*c, "tolerance")) sc.lcp.tolerance = detail::positive_number(*v, "constraints.tolerance");
    if (const json* v = detail::optional_member(*c, "max_iterations")) {
      sc.lcp.max_iterations = detail::integer(*v, "constraints.max_iterations");
      if (sc.lcp.max_iterations < 1) throw SchemaError("constraints.max_iterations", "must be positive");
    }
  }

  if (const json* tasks = detail::optional_member(doc, "tasks")) {
    detail::expect_array(*tasks, "tasks");
    for (std::size_t i = 0; i < tasks->size(); ++i) {
      TaskSpec t = parse_task(sc.chain, sc.initial_state, (*tasks)[i], child("tasks", i), sc.seed + 7919 * (i + 1));
      if (sc.find_task(t.name) >= 0) throw SchemaError(child(child("tasks", i), "name"), "duplicate task name");
      sc.tasks.push_back(std::move(t));
    }
  }

  if (const json* guides = detail::optional_member(doc, "guides")) {
    detail::expect_array(*guides, "guides");
    for (std::size_t i = 0; i < guides->size(); ++i) {
      GuideSpec g = parse_guide(sc.chain, (*guides)[i], base_dir, child("guides", i));
      if (sc.find_guide(g.mechanism.name) >= 0) throw SchemaError(child(child("guides", i), "name"), "duplicate guide name");
      sc.guides.push_back(std::move(g));
    }
  }

  if (const json* in = detail::optional_member(doc, "internal")) sc.internal = parse_internal(sc, *in, "internal");

  if (const json* ce = detail::optional_member(doc, "counterexample")) {
    check_keys(*ce, "counterexample", {"frame", "rows", "seed"});
    CounterexampleSpec spec;
    spec.frame = frame_ref(sc.chain, detail::member(*ce, "frame", "counterexample"), "counterexample.frame");
    spec.rows = twist_rows(detail::member(*ce, "rows", "counterexample"), "counterexample.rows");
    spec.seed = detail::vector(detail::member(*ce, "seed", "counterexample"), "counterexample.seed",
                               static_cast<int>(spec.rows.size()));
    sc.counterexample = std::move(spec);
  }

  if (const json* ct = detail::optional_member(doc, "constant_torque")) {
    sc.constant_torque = detail::vector(*ct, "constant_torque", sc.chain.dof());
  }

  if (const json* p = detail::optional_member(doc, "passivity")) {
    check_keys(*p, "passivity", {"beta_sq", "rule"});
    if (const json* b = detail::optional_member(*p, "beta_sq")) {
      sc.beta_sq = detail::number(*b, "passivity.beta_sq");
      if (*sc.beta_sq < 0.0) throw SchemaError("passivity.beta_sq", "must be non-negative");
    }
    if (const json* r = detail::optional_member(*p, "rule")) {
      const std::string s = detail::string(*r, "passivity.rule");
      if (s == "zero_order_hold") {
        sc.integration_rule = IntegrationRule::zero_order_hold;
      } else if (s == "trapezoidal") {
        sc.integration_rule = IntegrationRule::trapezoidal;
      } else {
        throw SchemaError("passivity.rule", "expected 'zero_order_hold' or 'trapezoidal'");
      }
    }
  }

  // The hash covers the resolved chains so edits to referenced files show up.
  json canonical = doc;
  canonical["chain"] = resolved_chain_json(doc["chain"], base_dir, "chain");
  if (canonical.contains("guides")) {
    for (auto& g : canonical["guides"]) {
      if (g.contains("chain")) g["chain"] = resolved_chain_json(g["chain"], base_dir, "guides.chain");
    }
  }
  sc.hash = fnv1a(canonical.dump());
  return sc;
}

}  // namespace vhsim
