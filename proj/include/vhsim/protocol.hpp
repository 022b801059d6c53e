#pragma once

#include <string>

#include "vhsim/commands.hpp"
#include "vhsim/world.hpp"

namespace vhsim {

/// Live protocol version carried by every server message.
inline constexpr int protocol_version = 1;

/// Server -> client messages, one JSON object per WebSocket text message.
///
///   hello  scenario name and hash, dt, trace column names, chain layout,
///          obstacles, task and guide names; sent once on connect
///   frame  snapshot after a step: the trace row ("trace", same numbers as
///          the CSV) plus link poses, targets, contacts and guide axes
///   ack    a command was accepted and queued
///   error  a command was rejected; the simulation is unaffected
std::string hello_json(const World& world);
std::string frame_json(const World& world, bool paused);
std::string ack_json(const Command& command);
std::string error_json(const std::string& message);

}  // namespace vhsim
