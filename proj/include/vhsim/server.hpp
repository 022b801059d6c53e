#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>

#include "vhsim/run.hpp"
#include "vhsim/scenario.hpp"

namespace vhsim {

struct ServeOptions {
  std::string host = "127.0.0.1";
  /// 0 picks a free port (reported through on_listen).
  std::uint16_t port = 8765;
  /// Wall-clock pacing at dt / speed; false steps as fast as possible.
  bool realtime = true;
  double speed = 1.0;
  bool start_paused = false;
  /// Stop after this many steps, or when the scenario ends if set to true.
  std::optional<std::size_t> max_steps;
  bool exit_when_finished = false;
  std::optional<std::filesystem::path> trace;
  std::optional<std::filesystem::path> record;
  std::function<void(std::uint16_t port)> on_listen;
  /// Set from another thread (or a signal handler) to end the session.
  const std::atomic<bool>* stop = nullptr;
};

/// Runs one live session: the simulation loop on the calling thread, the
/// WebSocket endpoint on a network thread. Client commands are validated on
/// receipt and applied at the next step boundary; every step's frame goes to
/// each client, keeping only the newest one for clients that fall behind.
RunSummary serve(const Scenario& scenario, const ServeOptions& options);

/// "host:port" -> (host, port).
std::pair<std::string, std::uint16_t> parse_address(const std::string& text);

}  // namespace vhsim
