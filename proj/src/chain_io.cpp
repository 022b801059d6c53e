#include "vhsim/chain_io.hpp"

#include <fstream>
#include <sstream>

#include "chain_json.hpp"
#include "vhsim/errors.hpp"

namespace vhsim {

namespace {

using detail::child;
using detail::json;

JointSpec parse_joint(const json& j, const std::string& path) {
  JointSpec joint;
  const std::string type = detail::string(detail::member(j, "type", path), child(path, "type"));
  if (type == "revolute") {
    joint.kind = JointKind::revolute;
  } else if (type == "prismatic") {
    joint.kind = JointKind::prismatic;
  } else if (type == "floating") {
    joint.kind = JointKind::floating_base;
    return joint;
  } else {
    throw SchemaError(child(path, "type"), "unknown joint type '" + type + "' (revolute, prismatic, floating)");
  }
  joint.axis = detail::unit_vec3(detail::member(j, "axis", path), child(path, "axis"));
  return joint;
}

int link_reference(const json& j, const std::vector<LinkSpec>& known, const std::string& path) {
  if (j.is_number_integer()) {
    const int idx = j.get<int>();
    if (idx < -1 || idx >= static_cast<int>(known.size())) throw SchemaError(path, "link index out of range");
    return idx;
  }
  const std::string name = detail::string(j, path);
  for (std::size_t i = 0; i < known.size(); ++i) {
    if (known[i].name == name) return static_cast<int>(i);
  }
  throw SchemaError(path, "unknown link '" + name + "' (links must be declared after their parent)");
}

Eigen::MatrixXd parse_damping(const json& j, int dof, const std::string& path) {
  if (dof == 0) return Eigen::MatrixXd(0, 0);
  return detail::gain(j, dof, path);
}

}  // namespace

namespace detail {

KinematicChain chain_from_json(const json& doc, const std::string& path) {
  expect_object(doc, path);
  check_version(doc, path);
  std::string name = "chain";
  if (const json* n = optional_member(doc, "name")) name = string(*n, child(path, "name"));

  const json& links_json = member(doc, "links", path);
  expect_array(links_json, child(path, "links"));
  std::vector<LinkSpec> links;
  int dof = 0;
  for (std::size_t i = 0; i < links_json.size(); ++i) {
    const std::string lp = child(child(path, "links"), i);
    const json& lj = links_json[i];
    expect_object(lj, lp);
    LinkSpec link;
    link.name = string(member(lj, "name", lp), child(lp, "name"));
    for (const LinkSpec& other : links) {
      if (other.name == link.name) throw SchemaError(child(lp, "name"), "duplicate link name '" + link.name + "'");
    }
    if (const json* parent = optional_member(lj, "parent")) link.parent = link_reference(*parent, links, child(lp, "parent"));
    if (const json* off = optional_member(lj, "offset")) link.offset = pose(*off, child(lp, "offset"));
    if (const json* len = optional_member(lj, "length")) link.length = number(*len, child(lp, "length"));
    link.joint = parse_joint(member(lj, "joint", lp), child(lp, "joint"));
    if (const json* lim = optional_member(lj, "limits")) {
      const Eigen::VectorXd v = vector(*lim, child(lp, "limits"), 2);
      if (link.joint.kind == JointKind::floating_base) throw SchemaError(child(lp, "limits"), "floating base cannot be limited");
      if (v[0] > v[1]) throw SchemaError(child(lp, "limits"), "lower limit exceeds upper limit");
      link.limit = JointLimit{v[0], v[1]};
    }
    dof += link.joint.kind == JointKind::floating_base ? 6 : 1;
    links.push_back(std::move(link));
  }

  const Eigen::MatrixXd damping = parse_damping(member(doc, "damping", path), dof, child(path, "damping"));

  std::vector<CollisionProbe> probes;
  if (const json* pj = optional_member(doc, "probes")) {
    expect_array(*pj, child(path, "probes"));
    for (std::size_t i = 0; i < pj->size(); ++i) {
      const std::string pp = child(child(path, "probes"), i);
      CollisionProbe probe;
      probe.name = string(member((*pj)[i], "name", pp), child(pp, "name"));
      probe.link = link_reference(member((*pj)[i], "link", pp), links, child(pp, "link"));
      if (probe.link < 0) throw SchemaError(child(pp, "link"), "probe must be attached to a link");
      probe.point = vec3(member((*pj)[i], "point", pp), child(pp, "point"));
      probes.push_back(std::move(probe));
    }
  }

  try {
    return KinematicChain(std::move(name), std::move(links), damping, std::move(probes));
  } catch (const ConfigurationError& e) {
    throw SchemaError(path, e.what());
  }
}

json chain_to_json(const KinematicChain& chain) {
  json doc;
  doc["version"] = 1;
  doc["name"] = chain.name();
  json links = json::array();
  for (const LinkSpec& link : chain.links()) {
    json lj;
    lj["name"] = link.name;
    lj["parent"] = link.parent;
    lj["offset"] = {{"position", vector_json(link.offset.translation())},
                    {"orientation", quaternion_json(Eigen::Quaterniond(link.offset.linear()))}};
    lj["length"] = link.length;
    switch (link.joint.kind) {
      case JointKind::revolute:
        lj["joint"] = {{"type", "revolute"}, {"axis", vector_json(link.joint.axis)}};
        break;
      case JointKind::prismatic:
        lj["joint"] = {{"type", "prismatic"}, {"axis", vector_json(link.joint.axis)}};
        break;
      case JointKind::floating_base:
        lj["joint"] = {{"type", "floating"}};
        break;
    }
    if (link.limit) lj["limits"] = {link.limit->lower, link.limit->upper};
    links.push_back(std::move(lj));
  }
  doc["links"] = std::move(links);
  doc["damping"] = matrix_json(chain.damping());
  json probes = json::array();
  for (const CollisionProbe& p : chain.probes()) {
    probes.push_back({{"name", p.name}, {"link", p.link}, {"point", vector_json(p.point)}});
  }
  doc["probes"] = std::move(probes);
  return doc;
}

}  // namespace detail

KinematicChain parse_chain(const std::string& json_text, const std::string& origin) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw SchemaError(origin, std::string("invalid JSON: ") + e.what());
  }
  return detail::chain_from_json(doc, origin);
}

KinematicChain load_chain(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw SchemaError(file.string(), "cannot open chain file");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_chain(buffer.str(), file.filename().string());
}

std::string write_chain(const KinematicChain& chain) { return detail::chain_to_json(chain).dump(2); }

}  // namespace vhsim
