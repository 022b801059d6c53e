#include <algorithm>
#include <atomic>
#include <csignal>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "vhsim/acceptance.hpp"
#include "vhsim/errors.hpp"
#include "vhsim/run.hpp"
#include "vhsim/scenario.hpp"
#include "vhsim/server.hpp"

namespace {

std::atomic<bool> stop_requested{false};

void on_signal(int) { stop_requested = true; }

std::vector<vhsim::Override> parse_overrides(const std::vector<std::string>& sets) {
  std::vector<vhsim::Override> out;
  for (const std::string& s : sets) out.push_back(vhsim::parse_override(s));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Passive virtual-human simulator"};
  app.require_subcommand(1);

  std::string scenario_name;
  std::vector<std::string> sets;
  std::string trace_path;
  std::string replay_path;
  auto* run = app.add_subcommand("run", "Run a scenario offline and write its trace");
  run->add_option("scenario", scenario_name, "Bundled scenario name or path to a scenario file")->required();
  run->add_option("--out", trace_path, "CSV trace file");
  run->add_option("--set", sets, "Override a scenario field, e.g. --set passivity.beta_sq=10");
  run->add_option("--replay", replay_path, "Reproduce a live session from its command log");

  std::string address = "127.0.0.1:8765";
  std::string record_path;
  double speed = 1.0;
  bool paused = false;
  bool exit_at_end = false;
  auto* serve = app.add_subcommand("serve", "Run a scenario live behind a WebSocket endpoint");
  serve->add_option("scenario", scenario_name, "Bundled scenario name or path to a scenario file")->required();
  serve->add_option("--addr", address, "host:port to listen on")->capture_default_str();
  serve->add_option("--set", sets, "Override a scenario field");
  serve->add_option("--out", trace_path, "CSV trace file");
  serve->add_option("--record", record_path, "Command log for headless replay");
  serve->add_option("--speed", speed, "Wall-clock speed factor")->capture_default_str();
  serve->add_flag("--paused", paused, "Start paused");
  serve->add_flag("--exit-at-end", exit_at_end, "Stop when the scenario duration is reached");

  std::vector<int> only;
  std::uint64_t seed = vhsim::AcceptanceOptions{}.seed;
  auto* verify = app.add_subcommand("verify", "Run the acceptance property suite on the bundled scenarios");
  verify->add_option("--only", only, "Criterion numbers to run (default: all)");
  verify->add_option("--seed", seed, "Seed of the random instances")->capture_default_str();

  auto* list = app.add_subcommand("list", "List bundled scenarios");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*list) {
      for (const auto& entry : std::filesystem::directory_iterator(vhsim::scenario_directory())) {
        if (entry.path().extension() == ".json") std::cout << entry.path().stem().string() << '\n';
      }
      return 0;
    }
    if (*verify) {
      vhsim::AcceptanceOptions options;
      options.only = only;
      options.seed = seed;
      options.on_result = [](const vhsim::CriterionResult& r) { std::cout << vhsim::format_result(r) << std::endl; };
      const auto results = vhsim::run_acceptance(options);
      const auto failed = std::ranges::count_if(results, [](const auto& r) { return !r.passed; });
      std::cout << (results.size() - static_cast<std::size_t>(failed)) << "/" << results.size() << " criteria passed\n";
      return failed == 0 ? 0 : 1;
    }
    const vhsim::Scenario scenario =
        vhsim::load_scenario(vhsim::resolve_scenario(scenario_name), parse_overrides(sets));
    if (*run) {
      vhsim::RunOptions options;
      if (!trace_path.empty()) options.trace = trace_path;
      if (!replay_path.empty()) options.replay = replay_path;
      std::cout << vhsim::format_summary(vhsim::run_scenario(scenario, options));
      return 0;
    }
    if (*serve) {
      vhsim::ServeOptions options;
      std::tie(options.host, options.port) = vhsim::parse_address(address);
      options.speed = speed;
      options.start_paused = paused;
      options.exit_when_finished = exit_at_end;
      if (!trace_path.empty()) options.trace = trace_path;
      if (!record_path.empty()) options.record = record_path;
      options.stop = &stop_requested;
      options.on_listen = [](std::uint16_t port) { std::cerr << "listening on port " << port << '\n'; };
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::cout << vhsim::format_summary(vhsim::serve(scenario, options));
      return 0;
    }
  } catch (const vhsim::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
