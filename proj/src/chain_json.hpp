#pragma once

#include "json_fields.hpp"
#include "vhsim/chain.hpp"

namespace vhsim::detail {

KinematicChain chain_from_json(const json& doc, const std::string& path);
json chain_to_json(const KinematicChain& chain);

}  // namespace vhsim::detail
