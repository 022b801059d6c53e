#pragma once

// Schema-checked accessors for scenario and chain files. Every accessor takes
// the dotted path of the value so errors point at the offending field.

#include <string>

#include <Eigen/Dense>
#include <Eigen/Geometry>
#include <json.hpp>

namespace vhsim::detail {

using nlohmann::json;

std::string child(const std::string& path, const std::string& key);
std::string child(const std::string& path, std::size_t index);

void expect_object(const json& j, const std::string& path);
void expect_array(const json& j, const std::string& path);

const json& member(const json& obj, const std::string& key, const std::string& path);
const json* optional_member(const json& obj, const std::string& key);

double number(const json& j, const std::string& path);
double positive_number(const json& j, const std::string& path);
int integer(const json& j, const std::string& path);
bool boolean(const json& j, const std::string& path);
std::string string(const json& j, const std::string& path);

Eigen::VectorXd vector(const json& j, const std::string& path, int expected_size = -1);
Eigen::Vector3d vec3(const json& j, const std::string& path);
Eigen::Vector3d unit_vec3(const json& j, const std::string& path);

/// Quaternion given as [w, x, y, z]; normalized after a sanity check.
Eigen::Quaterniond quaternion(const json& j, const std::string& path);

/// Orientation from either "orientation" (quaternion) or "rotation"
/// (rotation vector in radians) members of `obj`; identity when absent.
Eigen::Quaterniond orientation_of(const json& obj, const std::string& path);

/// {"position": [...], "orientation" | "rotation": ...}
Eigen::Isometry3d pose(const json& j, const std::string& path);

/// Gain in scalar, diagonal or full-matrix form, checked symmetric.
Eigen::MatrixXd gain(const json& j, int dim, const std::string& path);

/// Version field; only version 1 is understood.
void check_version(const json& obj, const std::string& path);

json quaternion_json(const Eigen::Quaterniond& q);
json vector_json(const Eigen::VectorXd& v);
json matrix_json(const Eigen::MatrixXd& m);

}  // namespace vhsim::detail
