#pragma once

#include <filesystem>
#include <string>

#include "vhsim/chain.hpp"

namespace vhsim {

/// Reads a chain description (JSON, see docs/chain-format.md).
/// Throws SchemaError with the offending field path.
KinematicChain load_chain(const std::filesystem::path& file);
KinematicChain parse_chain(const std::string& json_text, const std::string& origin = "chain");

/// Serializes a chain so that parse_chain(write_chain(c)) reproduces it.
std::string write_chain(const KinematicChain& chain);

}  // namespace vhsim
