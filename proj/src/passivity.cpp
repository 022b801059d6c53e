#include "vhsim/passivity.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "vhsim/errors.hpp"

namespace vhsim {

const char* to_string(PortRole role) {
  switch (role) {
    case PortRole::task: return "task";
    case PortRole::contact: return "contact";
    case PortRole::limit: return "limit";
    case PortRole::guide: return "guide";
    case PortRole::internal: return "internal";
    case PortRole::external: return "external";
    case PortRole::operator_input: return "operator";
  }
  return "unknown";
}

Port make_port(std::string id, PortRole role, Eigen::MatrixXd jacobian, Eigen::VectorXd wrench,
               const Eigen::VectorXd& qdot) {
  if (jacobian.cols() != qdot.size()) throw ConfigurationError("port '" + id + "': Jacobian does not match qdot");
  Port p;
  p.twist = jacobian * qdot;
  p.id = std::move(id);
  p.role = role;
  p.jacobian = std::move(jacobian);
  p.wrench = std::move(wrench);
  return p;
}

double port_power(const Port& port) {
  if (port.wrench.size() != port.twist.size()) {
    std::ostringstream msg;
    msg << "port '" << port.id << "': wrench has " << port.wrench.size() << " entries, twist has "
        << port.twist.size();
    throw ConfigurationError(msg.str());
  }
  return port.wrench.dot(port.twist);
}

PassivityLedger::PassivityLedger(double beta_sq, IntegrationRule rule, std::size_t history_capacity)
    : beta_sq_(beta_sq), rule_(rule), history_(history_capacity) {
  if (!(beta_sq >= 0.0) || !std::isfinite(beta_sq)) throw ConfigurationError("beta^2 must be finite and non-negative");
}

std::size_t PassivityLedger::declare(const std::string& id, PortRole role) {
  for (std::size_t i = 0; i < accounts_.size(); ++i) {
    if (accounts_[i].id == id) return i;
  }
  PortAccount account;
  account.id = id;
  account.role = role;
  accounts_.push_back(std::move(account));
  return accounts_.size() - 1;
}

const PortAccount* PassivityLedger::find(const std::string& id) const {
  for (const PortAccount& a : accounts_) {
    if (a.id == id) return &a;
  }
  return nullptr;
}

void PassivityLedger::record_step(std::span<const Port> ports, double dt) {
  std::vector<PortPower> powers;
  powers.reserve(ports.size());
  for (const Port& p : ports) powers.push_back(PortPower{p.id, p.role, port_power(p)});
  record_powers(powers, dt);
}

void PassivityLedger::record_powers(std::span<const PortPower> powers, double dt) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigurationError("ledger step must be positive");
  for (const PortPower& p : powers) {
    if (!std::isfinite(p.power)) {
      ++faults_;
      throw NumericalFault("non-finite power at port '" + p.id + "'");
    }
  }
  for (const PortPower& p : powers) declare(p.id, p.role);

  std::vector<double> now(accounts_.size(), 0.0);
  std::vector<bool> present(accounts_.size(), false);
  for (const PortPower& p : powers) {
    for (std::size_t i = 0; i < accounts_.size(); ++i) {
      if (accounts_[i].id == p.id) {
        now[i] += p.power;
        present[i] = true;
        break;
      }
    }
  }

  t_ += dt;
  ++steps_;
  double total_energy = 0.0;
  double total_power = 0.0;
  for (std::size_t i = 0; i < accounts_.size(); ++i) {
    PortAccount& a = accounts_[i];
    if (!a.sampled && !present[i]) continue;
    double increment = now[i] * dt;
    if (rule_ == IntegrationRule::trapezoidal && a.sampled) increment = 0.5 * (a.power + now[i]) * dt;
    a.energy += increment;
    a.power = now[i];
    a.sampled = true;
    if (!a.verdict.violated && a.energy < -beta_sq_) a.verdict = Verdict{true, t_};
    total_energy += a.energy;
    total_power += a.power;
  }
  total_energy_ = total_energy;
  total_power_ = total_power;
  min_total_energy_ = std::min(min_total_energy_, total_energy);
  if (!verdict_.violated && total_energy < -beta_sq_) verdict_ = Verdict{true, t_};
  history_.push_back(LedgerSample{t_, total_power, total_energy});
}

PassivityReport passivity_verdict(const PassivityLedger& ledger) {
  PassivityReport r;
  r.total = ledger.total_verdict();
  r.min_total_energy = ledger.min_total_energy();
  for (const PortAccount& a : ledger.accounts()) r.ports.emplace_back(a.id, a.verdict);
  return r;
}

Counterexample build_counterexample(const Eigen::MatrixXd& j1, const Eigen::MatrixXd& damping,
                                    const Eigen::VectorXd& w2_seed) {
  if (w2_seed.size() != j1.rows()) throw ConfigurationError("wrench seed does not match the port Jacobian");
  Counterexample ce;
  ce.j1 = j1;
  ce.j2 = j1;
  ce.w2 = w2_seed;
  ce.damping = damping;
  ce.projection = build_internal_projection(j1, damping);

  const Eigen::VectorXd seed_torque = ce.j2.transpose() * ce.w2;
  ce.seed_norm = seed_torque.norm();
  const double scale = std::max(1.0, j1.norm() * w2_seed.norm());
  if (!(ce.seed_norm > 1e-12 * scale)) {
    throw ConstructionFailed("degenerate wrench seed: J1^T W2 vanishes");
  }
  ce.w1 = pseudo_inverse(j1.transpose()) * (-0.5 * seed_torque);
  ce.balance_residual = (j1.transpose() * ce.w1 + 0.5 * seed_torque).norm();
  if (ce.balance_residual > 1e-8 * scale) {
    std::ostringstream msg;
    msg << "balance equation J1^T W1 + J2^T W2 / 2 = 0 not solvable (residual " << ce.balance_residual << ")";
    throw ConstructionFailed(msg.str());
  }

  const Eigen::LLT<Eigen::MatrixXd> llt(damping);
  const Eigen::MatrixXd mobility = llt.solve(ce.j2.transpose());  // B_a^-1 J2^T
  ce.annihilation_residual = (mobility.transpose() * ce.projection.matrix * ce.j2.transpose()).norm();
  ce.predicted_power = -0.25 * ce.w2.dot(ce.j2 * mobility * ce.w2);
  return ce;
}

Eigen::VectorXd prioritized_torque(const Eigen::MatrixXd& j1, const Eigen::VectorXd& w1, const Eigen::MatrixXd& j2,
                                   const Eigen::VectorXd& w2, const Projection& projection) {
  return j1.transpose() * w1 + projection.matrix * (j2.transpose() * w2);
}

CounterexampleRun run_counterexample(const Counterexample& ce, double dt, double duration, double beta_sq) {
  if (!(dt > 0.0) || !(duration >= dt)) throw ConfigurationError("counterexample run needs 0 < dt <= duration");
  const Eigen::LLT<Eigen::MatrixXd> llt(ce.damping);
  if (llt.info() != Eigen::Success) throw SingularityError("counterexample requires a definite B_a");
  const Eigen::VectorXd qdot = llt.solve(prioritized_torque(ce.j1, ce.w1, ce.j2, ce.w2, ce.projection));

  CounterexampleRun run{PassivityLedger(beta_sq, IntegrationRule::zero_order_hold), {}, 0.0};
  run.ledger.declare("port1", PortRole::external);
  run.ledger.declare("port2", PortRole::external);
  const auto steps = static_cast<std::size_t>(std::llround(duration / dt));
  run.total_power.reserve(steps);
  double sum = 0.0;
  for (std::size_t k = 0; k < steps; ++k) {
    const Port ports[] = {make_port("port1", PortRole::external, ce.j1, ce.w1, qdot),
                          make_port("port2", PortRole::external, ce.j2, ce.w2, qdot)};
    run.ledger.record_step(ports, dt);
    run.total_power.push_back(run.ledger.total_power());
    sum += run.ledger.total_power();
  }
  run.mean_power = steps > 0 ? sum / static_cast<double>(steps) : 0.0;
  return run;
}

double leak_cross_term(const Eigen::MatrixXd& j2, const Eigen::VectorXd& w2, const Eigen::MatrixXd& damping,
                       const Projection& projection, const Eigen::VectorXd& gradient, double alpha) {
  const Eigen::LLT<Eigen::MatrixXd> llt(damping);
  if (llt.info() != Eigen::Success) throw SingularityError("leak evaluation requires a definite B_a");
  return -alpha * w2.dot(j2 * llt.solve(projection.matrix * gradient));
}

std::vector<LeakSample> two_port_internal_leak_demo(const KinematicChain& chain, const InternalPotential& potential,
                                                    const FrameRef& task_port, const FrameRef& contact_port,
                                                    std::span<const SimState> configurations,
                                                    const std::optional<Vector6d>& contact_wrench) {
  const Eigen::LLT<Eigen::MatrixXd> llt(chain.damping());
  if (llt.info() != Eigen::Success) throw SingularityError("leak demo requires a definite B_a");
  std::vector<LeakSample> out;
  out.reserve(configurations.size());
  for (const SimState& state : configurations) {
    const auto frames = forward_kinematics(chain, state);
    const Eigen::MatrixXd j1 = frame_jacobian(chain, frames, task_port.link, task_port.point);
    const Eigen::MatrixXd j2 = frame_jacobian(chain, frames, contact_port.link, contact_port.point);
    const Projection projection = build_internal_projection(j1, chain.damping());
    const Eigen::VectorXd gradient = potential.gradient(state);
    const Eigen::VectorXd drift = j2 * llt.solve(projection.matrix * gradient);  // J2 B^-1 Pi^T g

    Vector6d w2 = Vector6d::Zero();
    if (contact_wrench) {
      w2 = *contact_wrench;
    } else if (drift.norm() > 0.0) {
      w2 = drift / drift.norm();
    }
    LeakSample s;
    s.direct_term = w2.dot(j2 * llt.solve(j2.transpose() * w2));
    s.cross_term = -potential.alpha * w2.dot(drift);
    s.power = s.direct_term + s.cross_term;
    out.push_back(s);
  }
  return out;
}

}  // namespace vhsim
