#include "vhsim/run.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include "vhsim/errors.hpp"
#include "vhsim/trace.hpp"

namespace vhsim {

SummaryAccumulator::SummaryAccumulator(const World& world) { restart(world); }

void SummaryAccumulator::restart(const World& world) {
  const Scenario& sc = world.scenario();
  s_ = RunSummary{};
  s_.scenario = sc.name;
  s_.hash = sc.hash;
  s_.beta_sq = world.beta_sq();
  axis_errors_.assign(sc.guides.size(), {});
  for (const GuideSpec& g : sc.guides) s_.guides.push_back({g.mechanism.name});
  step_seconds_ = 0.0;
}

void SummaryAccumulator::observe(const World& world, double step_seconds) {
  const StepReport& r = world.report();
  ++s_.steps;
  step_seconds_ += step_seconds;
  for (const ContactReport& c : r.contacts) s_.max_penetration = std::max(s_.max_penetration, -c.gap);
  s_.min_contact_force = std::min(s_.min_contact_force, r.min_constraint_force);
  s_.max_lcp_residual = std::max(s_.max_lcp_residual, r.lcp_residual);
  s_.max_limit_violation = std::max(s_.max_limit_violation, r.max_limit_violation);
  for (std::size_t g = 0; g < r.guides.size(); ++g) {
    if (!std::isnan(r.guides[g].axis_error)) axis_errors_[g].push_back(r.guides[g].axis_error);
  }
  s_.min_joint_dissipation = std::min(s_.min_joint_dissipation, world.joint_dissipation());
}

RunSummary SummaryAccumulator::summary(const World& world) const {
  RunSummary out = s_;
  out.duration = world.time();
  out.min_total_energy = world.ledger().min_total_energy();
  out.verdict = world.ledger().total_verdict();
  out.mean_step_seconds = out.steps > 0 ? step_seconds_ / static_cast<double>(out.steps) : 0.0;
  for (std::size_t g = 0; g < axis_errors_.size(); ++g) {
    const auto& e = axis_errors_[g];
    if (e.empty()) continue;
    GuideSummary& gs = out.guides[g];
    double sum_sq = 0.0;
    for (double x : e) {
      gs.max_axis_error = std::max(gs.max_axis_error, x);
      sum_sq += x * x;
    }
    gs.rms_axis_error = std::sqrt(sum_sq / static_cast<double>(e.size()));
    const std::size_t first = e.size() - std::max<std::size_t>(1, e.size() / 4);
    gs.final_quarter_max = *std::max_element(e.begin() + static_cast<std::ptrdiff_t>(first), e.end());
    out.max_axis_error = std::max(out.max_axis_error, gs.max_axis_error);
  }
  return out;
}

namespace {

class TraceFile {
 public:
  TraceFile(const std::optional<std::filesystem::path>& path, const World& world) : path_(path), world_(world) {
    restart();
  }

  void restart() {
    if (!path_) return;
    writer_.reset();
    out_.close();
    out_.open(*path_, std::ios::trunc);
    if (!out_) throw ConfigurationError("cannot write trace " + path_->string());
    writer_.emplace(out_, world_);
    writer_->write_header();
  }

  void row() {
    if (writer_) writer_->write_row();
  }

 private:
  std::optional<std::filesystem::path> path_;
  const World& world_;
  std::ofstream out_;
  std::optional<TraceWriter> writer_;
};

}  // namespace

RunSummary run_scenario(const Scenario& scenario, const RunOptions& options) {
  std::optional<CommandLog> log;
  if (options.replay) log = read_command_log(*options.replay, scenario);

  const auto wall_start = std::chrono::steady_clock::now();
  World world(scenario);
  TraceFile trace(options.trace, world);
  SummaryAccumulator acc(world);

  auto timed_step = [&] {
    const auto t0 = std::chrono::steady_clock::now();
    world.step();
    const auto t1 = std::chrono::steady_clock::now();
    acc.observe(world, std::chrono::duration<double>(t1 - t0).count());
    trace.row();
  };

  if (!log) {
    while (!world.finished()) timed_step();
  } else {
    bool paused = false;
    std::size_t next = 0;
    for (std::size_t tick = 0;; ++tick) {
      while (next < log->entries.size() && log->entries[next].tick == tick) {
        if (apply_command(world, log->entries[next].command, paused)) {
          trace.restart();
          acc.restart(world);
        }
        ++next;
      }
      if (tick == log->end_tick) break;
      if (world.finished()) throw ConfigurationError("command log runs past the end of the scenario");
      timed_step();
    }
  }

  RunSummary summary = acc.summary(world);
  summary.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start).count();
  return summary;
}

std::string format_summary(const RunSummary& s) {
  std::ostringstream out;
  out << "scenario          " << s.scenario << " (" << s.hash << ")\n";
  out << "steps             " << s.steps << " (" << s.duration << " s)\n";
  out << "max penetration   " << s.max_penetration << " m\n";
  out << "max axis error    " << s.max_axis_error << " rad\n";
  for (const GuideSummary& g : s.guides) {
    if (g.max_axis_error == 0.0 && g.rms_axis_error == 0.0) continue;
    out << "  guide " << g.name << ": max " << g.max_axis_error << ", rms " << g.rms_axis_error
        << ", final quarter max " << g.final_quarter_max << " rad\n";
  }
  out << "max limit excess  " << s.max_limit_violation << " rad\n";
  out << "min constr. force " << s.min_contact_force << "\n";
  out << "max LCP residual  " << s.max_lcp_residual << "\n";
  out << "min total energy  " << s.min_total_energy << " J (beta^2 " << s.beta_sq << " J)\n";
  out << "passivity         " << (s.verdict.violated ? "violated" : "ok");
  if (s.verdict.violated) out << " at t = " << s.verdict.violation_time << " s";
  out << '\n';
  out << "wall clock        " << s.wall_seconds << " s (mean step " << s.mean_step_seconds * 1e3 << " ms)\n";
  return out.str();
}

}  // namespace vhsim
