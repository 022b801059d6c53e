#include "json_fields.hpp"

#include <cmath>

#include "vhsim/errors.hpp"
#include "vhsim/lie.hpp"

namespace vhsim::detail {

std::string child(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

std::string child(const std::string& path, std::size_t index) {
  return path + "[" + std::to_string(index) + "]";
}

void expect_object(const json& j, const std::string& path) {
  if (!j.is_object()) throw SchemaError(path, "expected an object");
}

void expect_array(const json& j, const std::string& path) {
  if (!j.is_array()) throw SchemaError(path, "expected an array");
}

const json& member(const json& obj, const std::string& key, const std::string& path) {
  expect_object(obj, path);
  auto it = obj.find(key);
  if (it == obj.end()) throw SchemaError(child(path, key), "missing required field");
  return *it;
}

const json* optional_member(const json& obj, const std::string& key) {
  if (!obj.is_object()) return nullptr;
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return nullptr;
  return &*it;
}

double number(const json& j, const std::string& path) {
  if (!j.is_number()) throw SchemaError(path, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw SchemaError(path, "expected a finite number");
  return v;
}

double positive_number(const json& j, const std::string& path) {
  const double v = number(j, path);
  if (!(v > 0.0)) throw SchemaError(path, "expected a positive number");
  return v;
}

int integer(const json& j, const std::string& path) {
  if (!j.is_number_integer()) throw SchemaError(path, "expected an integer");
  return j.get<int>();
}

bool boolean(const json& j, const std::string& path) {
  if (!j.is_boolean()) throw SchemaError(path, "expected true or false");
  return j.get<bool>();
}

std::string string(const json& j, const std::string& path) {
  if (!j.is_string()) throw SchemaError(path, "expected a string");
  return j.get<std::string>();
}

Eigen::VectorXd vector(const json& j, const std::string& path, int expected_size) {
  expect_array(j, path);
  if (expected_size >= 0 && static_cast<int>(j.size()) != expected_size) {
    throw SchemaError(path, "expected " + std::to_string(expected_size) + " numbers, got " + std::to_string(j.size()));
  }
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = number(j[i], child(path, i));
  return v;
}

Eigen::Vector3d vec3(const json& j, const std::string& path) { return vector(j, path, 3); }

Eigen::Vector3d unit_vec3(const json& j, const std::string& path) {
  const Eigen::Vector3d v = vec3(j, path);
  if (v.norm() < 1e-9) throw SchemaError(path, "expected a non-zero direction");
  return v.normalized();
}

Eigen::Quaterniond quaternion(const json& j, const std::string& path) {
  const Eigen::VectorXd v = vector(j, path, 4);
  if (std::abs(v.norm() - 1.0) > 1e-6) throw SchemaError(path, "quaternion [w, x, y, z] must have unit norm");
  return Eigen::Quaterniond(v[0], v[1], v[2], v[3]).normalized();
}

Eigen::Quaterniond orientation_of(const json& obj, const std::string& path) {
  const json* q = optional_member(obj, "orientation");
  const json* r = optional_member(obj, "rotation");
  if (q && r) throw SchemaError(path, "give either 'orientation' or 'rotation', not both");
  if (q) return quaternion(*q, child(path, "orientation"));
  if (r) return lie::so3_exp(vec3(*r, child(path, "rotation")));
  return Eigen::Quaterniond::Identity();
}

Eigen::Isometry3d pose(const json& j, const std::string& path) {
  expect_object(j, path);
  Eigen::Vector3d p = Eigen::Vector3d::Zero();
  if (const json* pos = optional_member(j, "position")) p = vec3(*pos, child(path, "position"));
  return lie::make_pose(p, orientation_of(j, path));
}

Eigen::MatrixXd gain(const json& j, int dim, const std::string& path) {
  if (j.is_number()) return number(j, path) * Eigen::MatrixXd::Identity(dim, dim);
  expect_array(j, path);
  if (static_cast<int>(j.size()) != dim) {
    throw SchemaError(path, "expected a scalar, " + std::to_string(dim) + " diagonal entries or a " +
                                std::to_string(dim) + "x" + std::to_string(dim) + " matrix");
  }
  if (!j.empty() && j[0].is_array()) {
    Eigen::MatrixXd m(dim, dim);
    for (int r = 0; r < dim; ++r) m.row(r) = vector(j[r], child(path, r), dim).transpose();
    if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12) throw SchemaError(path, "gain matrix must be symmetric");
    return m;
  }
  return vector(j, path, dim).asDiagonal();
}

void check_version(const json& obj, const std::string& path) {
  const int v = integer(member(obj, "version", path), child(path, "version"));
  if (v != 1) throw SchemaError(child(path, "version"), "unsupported version " + std::to_string(v));
}

json quaternion_json(const Eigen::Quaterniond& q) { return json::array({q.w(), q.x(), q.y(), q.z()}); }

json vector_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

json matrix_json(const Eigen::MatrixXd& m) {
  json out = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) out.push_back(vector_json(m.row(r).transpose()));
  return out;
}

}  // namespace vhsim::detail
