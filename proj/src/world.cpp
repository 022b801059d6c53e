#include "vhsim/world.hpp"

#include <algorithm>
#include <limits>
#include <sstream>

#include "vhsim/errors.hpp"

namespace vhsim {

namespace {

Eigen::MatrixXd select_rows(const Eigen::MatrixXd& m, const std::vector<int>& rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(rows[i]);
  return out;
}

double task_energy(const TaskSpec& task, const Eigen::Isometry3d& target, const Eigen::Isometry3d& pose) {
  const Vector6d e = lie::pose_error(target, pose);
  return 0.5 * e.dot(task.stiffness * e);
}

struct ActiveGuide {
  std::size_t index = 0;
  Eigen::Index offset = 0;
  Eigen::Index dof = 0;
  CouplingGeometry geometry;
};

}  // namespace

World::World(Scenario scenario)
    : scenario_(std::move(scenario)),
      ledger_(0.0, scenario_.integration_rule),
      joint_ledger_(0.0, scenario_.integration_rule) {
  initialize();
}

void World::initialize() {
  state_ = scenario_.initial_state;
  state_.t = 0.0;
  step_ = 0;
  report_ = StepReport{};
  joint_dissipation_ = 0.0;
  dissipated_ = 0.0;
  const std::size_t ng = scenario_.guides.size();
  guide_states_.clear();
  guide_on_.assign(ng, false);
  next_event_.assign(ng, 0);
  pending_switch_energy_.assign(ng, 0.0);
  overrides_.assign(scenario_.tasks.size(), std::nullopt);
  predicted_targets_.assign(scenario_.tasks.size(), std::nullopt);
  for (std::size_t g = 0; g < ng; ++g) {
    guide_states_.push_back(scenario_.guides[g].initial_state);
    guide_on_[g] = scenario_.guides[g].initially_on;
    if (guide_on_[g] && scenario_.guides[g].reseat) {
      guide_states_[g] = reseat_guide(scenario_.guides[g].mechanism, scenario_.chain, state_, guide_states_[g]);
    }
  }

  const auto frames = forward_kinematics(scenario_.chain, state_);
  double storage = 0.0;
  for (std::size_t i = 0; i < scenario_.tasks.size(); ++i) {
    const TaskSpec& task = scenario_.tasks[i];
    storage += task_energy(task, target(i, 0.0), frame_pose(frames, task.frame));
  }
  for (std::size_t g = 0; g < ng; ++g) {
    if (guide_on_[g]) storage += guide_energy(g);
  }
  initial_storage_ = storage;
  beta_sq_ = scenario_.beta_sq ? *scenario_.beta_sq : storage;

  ledger_ = PassivityLedger(beta_sq_, scenario_.integration_rule);
  joint_ledger_ = PassivityLedger(0.0, scenario_.integration_rule);
  for (const TaskSpec& task : scenario_.tasks) ledger_.declare(task.name, PortRole::operator_input);
  for (const GuideSpec& g : scenario_.guides) ledger_.declare(g.mechanism.name, PortRole::guide);
  if (scenario_.counterexample) {
    ledger_.declare("port1", PortRole::external);
    ledger_.declare("port2", PortRole::external);
  }
  if (scenario_.constant_torque.size() > 0) ledger_.declare("constant_torque", PortRole::external);
  for (PortRole r : {PortRole::task, PortRole::contact, PortRole::limit, PortRole::guide, PortRole::internal,
                     PortRole::external}) {
    joint_ledger_.declare(to_string(r), r);
  }
}

void World::reset() { initialize(); }

Eigen::Isometry3d World::target(std::size_t task, double t) const {
  if (overrides_.at(task)) return *overrides_[task];
  return scripted_target(scenario_.tasks[task], t);
}

void World::set_target(const std::string& task, const Eigen::Isometry3d& pose) {
  const int i = scenario_.find_task(task);
  if (i < 0) throw ConfigurationError("unknown task '" + task + "'");
  overrides_[static_cast<std::size_t>(i)] = pose;
}

void World::clear_target(const std::string& task) {
  const int i = scenario_.find_task(task);
  if (i < 0) throw ConfigurationError("unknown task '" + task + "'");
  overrides_[static_cast<std::size_t>(i)].reset();
}

void World::set_guide(const std::string& guide, bool on) {
  const int i = scenario_.find_guide(guide);
  if (i < 0) throw ConfigurationError("unknown guide '" + guide + "'");
  switch_guide(static_cast<std::size_t>(i), on);
}

double World::guide_energy(std::size_t index) const {
  const VirtualMechanism& mech = scenario_.guides[index].mechanism;
  return coupling_potential(mech, coupling_geometry(mech, scenario_.chain, state_, guide_states_[index]));
}

void World::switch_guide(std::size_t index, bool on) {
  if (guide_on_[index] == on) return;
  const double before = guide_on_[index] ? guide_energy(index) : 0.0;
  if (on && scenario_.guides[index].reseat) {
    guide_states_[index] =
        reseat_guide(scenario_.guides[index].mechanism, scenario_.chain, state_, guide_states_[index]);
  }
  guide_on_[index] = on;
  const double after = on ? guide_energy(index) : 0.0;
  // Switching is an operator action: the change of stored spring energy is
  // booked on the guide's port at the next step.
  pending_switch_energy_[index] += after - before;
}

void World::apply_schedule(double t) {
  const double eps = 1e-9 * scenario_.dt;
  for (std::size_t g = 0; g < scenario_.guides.size(); ++g) {
    const auto& schedule = scenario_.guides[g].schedule;
    while (next_event_[g] < schedule.size() && schedule[next_event_[g]].t <= t + eps) {
      switch_guide(g, schedule[next_event_[g]].on);
      ++next_event_[g];
    }
  }
}

void World::step() {
  // Work on copies so a failed step leaves the world untouched.
  const SimState saved_state = state_;
  const auto saved_guides = guide_states_;
  const auto saved_on = guide_on_;
  const auto saved_events = next_event_;
  const auto saved_pending = pending_switch_energy_;
  const auto saved_predicted = predicted_targets_;
  try {
    do_step();
  } catch (const Error& e) {
    state_ = saved_state;
    guide_states_ = saved_guides;
    guide_on_ = saved_on;
    next_event_ = saved_events;
    pending_switch_energy_ = saved_pending;
    predicted_targets_ = saved_predicted;
    if (dynamic_cast<const StepError*>(&e)) throw;
    throw StepError(step_, e.what());
  }
}

void World::do_step() {
  const KinematicChain& chain = scenario_.chain;
  const double dt = scenario_.dt;
  const double t = time();
  const double t_next = static_cast<double>(step_ + 1) * dt;
  const int n = chain.dof();
  const Eigen::MatrixXd& ba = chain.damping();

  apply_schedule(t);

  const auto frames = forward_kinematics(chain, state_);

  // (1)-(2) targets and task springs
  const std::size_t nt = scenario_.tasks.size();
  std::vector<ImplicitTask> tasks(nt);
  std::vector<Eigen::Isometry3d> next_targets(nt);
  std::vector<double> retarget_energy(nt, 0.0);
  for (std::size_t i = 0; i < nt; ++i) {
    const TaskSpec& spec = scenario_.tasks[i];
    const Eigen::Isometry3d x_d = target(i, t);
    next_targets[i] = target(i, t_next);
    const Eigen::Isometry3d pose = frame_pose(frames, spec.frame);
    if (predicted_targets_[i] && !predicted_targets_[i]->isApprox(x_d, 0.0)) {
      retarget_energy[i] = task_energy(spec, x_d, pose) - task_energy(spec, *predicted_targets_[i], pose);
    }
    ImplicitTask& it = tasks[i];
    it.jacobian = frame_jacobian(chain, frames, spec.frame.link, spec.frame.point);
    it.stiffness = spec.stiffness;
    // Springs are evaluated at the midpoint of the step: K (e + dt/2 * slip)
    // folds into the implicit damping as B + dt/2 K. For a linear spring the
    // stored energy then changes by exactly the spring's share of the port
    // power, and the scheme stays passive for any dt.
    it.damping = spec.damping + 0.5 * dt * spec.stiffness;
    it.error = lie::pose_error(x_d, pose);
    it.desired_twist = lie::finite_twist(x_d, next_targets[i], dt);
  }

  // (3) internal and external joint torques
  Eigen::VectorXd internal = Eigen::VectorXd::Zero(n);
  if (scenario_.internal.enabled && scenario_.internal.alpha > 0.0) {
    const InternalSpec& in = scenario_.internal;
    const auto& j1 = tasks[static_cast<std::size_t>(scenario_.find_task(in.task))].jacobian;
    const Projection projection = build_internal_projection(j1, ba, in.metric);
    const InternalPotential potential = quadratic_posture(chain, in.reference, in.weights, in.alpha);
    internal = internal_torque(potential, projection, state_).values;
  }
  Eigen::VectorXd external = Eigen::VectorXd::Zero(n);
  if (scenario_.constant_torque.size() > 0) external += scenario_.constant_torque;
  std::optional<Counterexample> ce;
  if (scenario_.counterexample) {
    const CounterexampleSpec& spec = *scenario_.counterexample;
    const Eigen::MatrixXd j = frame_jacobian(chain, frames, spec.frame.link, spec.frame.point);
    ce = build_counterexample(select_rows(j, spec.rows), ba, spec.seed);
    external += prioritized_torque(ce->j1, ce->w1, ce->j2, ce->w2, ce->projection);
  }

  // (4) guides taking part in this step
  std::vector<ActiveGuide> active;
  Eigen::Index total = n;
  for (std::size_t g = 0; g < scenario_.guides.size(); ++g) {
    const VirtualMechanism& mech = scenario_.guides[g].mechanism;
    if (!guide_on_[g] || is_inert(mech.coupling)) continue;
    ActiveGuide a;
    a.index = g;
    a.offset = total;
    a.dof = mech.chain.dof();
    a.geometry = coupling_geometry(mech, chain, state_, guide_states_[g]);
    total += a.dof;
    active.push_back(std::move(a));
  }

  // (5) constraints on the manikin
  const auto constraints = detect_constraints(chain, state_, scenario_.obstacles, scenario_.constraint_options);

  // (6) stacked implicit solve: manikin velocities first, then each guide's
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(total, total);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(total);
  s.topLeftCorner(n, n) = ba;
  for (const ImplicitTask& it : tasks) {
    const Eigen::MatrixXd jtb = it.jacobian.transpose() * it.damping;
    s.topLeftCorner(n, n) += jtb * it.jacobian;
    rhs.head(n) += it.jacobian.transpose() * (it.stiffness * it.error) + jtb * it.desired_twist;
  }
  rhs.head(n) += internal + external;
  for (const ActiveGuide& a : active) {
    const VirtualMechanism& mech = scenario_.guides[a.index].mechanism;
    const Eigen::MatrixXd& jm = a.geometry.manikin_jacobian;
    const Eigen::MatrixXd& jg = a.geometry.guide_jacobian;
    const Matrix6d bg = mech.coupling.damping + 0.5 * dt * mech.coupling.stiffness;
    const Vector6d spring = mech.coupling.stiffness * a.geometry.error;
    s.topLeftCorner(n, n) += jm.transpose() * bg * jm;
    s.block(a.offset, a.offset, a.dof, a.dof) = mech.chain.damping() + jg.transpose() * bg * jg;
    const Eigen::MatrixXd cross = -jm.transpose() * bg * jg;
    s.block(0, a.offset, n, a.dof) = cross;
    s.block(a.offset, 0, a.dof, n) = cross.transpose();
    rhs.head(n) += jm.transpose() * spring;
    rhs.segment(a.offset, a.dof) = -jg.transpose() * spring;
  }

  const VelocitySystem system(s);
  if (!system.solvable()) {
    std::ostringstream msg;
    msg << "velocity system is singular (condition " << system.condition() << ")";
    throw SingularityError(msg.str());
  }
  Eigen::VectorXd x = system.solve(rhs);

  std::vector<UnilateralConstraint> padded = constraints;
  for (UnilateralConstraint& c : padded) {
    Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(total);
    row.head(n) = c.row;
    c.row = std::move(row);
  }
  ContactSolution contact;
  contact.f = Eigen::VectorXd::Zero(0);
  if (!padded.empty()) {
    const LcpProblem lcp = assemble_lcp(padded, system, x, dt, scenario_.baumgarte);
    contact = solve_lcp(lcp.m, lcp.w, scenario_.lcp);
    x += system.solve(Eigen::VectorXd(lcp.rows.transpose() * contact.f));
  }
  if (!x.allFinite()) throw NumericalFault("non-finite velocity from the implicit solve");
  const Eigen::VectorXd qdot = x.head(n);

  // (7) integrate manikin and guides with velocities held over the step
  SimState next = integrate(chain, state_, qdot, dt);
  next.t = t_next;
  std::vector<SimState> next_guides = guide_states_;
  for (const ActiveGuide& a : active) {
    const VirtualMechanism& mech = scenario_.guides[a.index].mechanism;
    next_guides[a.index] = integrate(mech.chain, guide_states_[a.index], x.segment(a.offset, a.dof), dt);
    next_guides[a.index].t = t_next;
  }

  // (8) ledgers and report
  StepReport r;
  r.step = step_ + 1;
  r.t = t_next;
  r.qdot = qdot;
  r.system_condition = system.condition();
  r.joint_dissipation_rate = qdot.dot(ba * qdot);
  double dissipation = r.joint_dissipation_rate;

  std::vector<PortPower> inputs;
  double task_joint_power = 0.0;
  r.tasks.resize(nt);
  for (std::size_t i = 0; i < nt; ++i) {
    const ImplicitTask& it = tasks[i];
    const Vector6d v = it.jacobian * qdot;
    const Vector6d slip = it.desired_twist - v;
    TaskReport& tr = r.tasks[i];
    tr.wrench = it.stiffness * it.error + it.damping * slip;
    tr.desired_twist = it.desired_twist;
    tr.target = next_targets[i];
    tr.overridden = overrides_[i].has_value();
    tr.operator_power = tr.wrench.dot(it.desired_twist);
    task_joint_power += tr.wrench.dot(v);
    dissipation += slip.dot(scenario_.tasks[i].damping * slip);
    inputs.push_back(PortPower{scenario_.tasks[i].name, PortRole::operator_input,
                               tr.operator_power + retarget_energy[i] / dt});
  }

  double guide_joint_power = 0.0;
  for (const ActiveGuide& a : active) {
    const VirtualMechanism& mech = scenario_.guides[a.index].mechanism;
    const Eigen::VectorXd guide_qdot = x.segment(a.offset, a.dof);
    const Vector6d rel = a.geometry.guide_jacobian * guide_qdot - a.geometry.manikin_jacobian * qdot;
    const Vector6d on_manikin = mech.coupling.stiffness * (a.geometry.error + 0.5 * dt * rel) + mech.coupling.damping * rel;
    guide_joint_power += on_manikin.dot(a.geometry.manikin_jacobian * qdot);
    dissipation += rel.dot(mech.coupling.damping * rel) + guide_qdot.dot(mech.chain.damping() * guide_qdot);
  }
  for (std::size_t g = 0; g < scenario_.guides.size(); ++g) {
    if (pending_switch_energy_[g] != 0.0) {
      inputs.push_back(PortPower{scenario_.guides[g].mechanism.name, PortRole::guide, pending_switch_energy_[g] / dt});
    }
  }

  double external_joint_power = external.dot(qdot);
  if (ce) {
    const Eigen::VectorXd v1 = ce->j1 * qdot;
    inputs.push_back(PortPower{"port1", PortRole::external, ce->w1.dot(v1)});
    inputs.push_back(PortPower{"port2", PortRole::external, ce->w2.dot(ce->j2 * qdot)});
  }
  if (scenario_.constant_torque.size() > 0) {
    inputs.push_back(PortPower{"constant_torque", PortRole::external, scenario_.constant_torque.dot(qdot)});
  }

  // Contacts: forces of this step, gaps after it.
  const auto& probes = chain.probes();
  const auto& obstacles = scenario_.obstacles;
  r.contacts.resize(probes.size() * obstacles.size());
  double contact_power = 0.0;
  double limit_power = 0.0;
  r.active_constraints = constraints.size();
  r.lcp_iterations = contact.iterations;
  r.lcp_residual = contact.residual;
  r.min_constraint_force = contact.f.size() > 0 ? contact.f.minCoeff() : 0.0;
  for (std::size_t i = 0; i < constraints.size(); ++i) {
    const UnilateralConstraint& c = constraints[i];
    const double f = contact.f[static_cast<Eigen::Index>(i)];
    const double p = f * c.row.dot(qdot);
    if (c.kind == ConstraintKind::point_contact) {
      ContactReport& cr = r.contacts[static_cast<std::size_t>(c.probe) * obstacles.size() +
                                     static_cast<std::size_t>(c.obstacle)];
      cr.force += f;
      cr.power += p;
      contact_power += p;
    } else {
      limit_power += p;
    }
  }
  // Energy drawn by unilateral constraints counts as dissipated (negative
  // only while pushing out of a penetration).
  dissipation -= contact_power + limit_power;

  if (!probes.empty() && !obstacles.empty()) {
    const auto next_frames = forward_kinematics(chain, next);
    for (std::size_t p = 0; p < probes.size(); ++p) {
      const Eigen::Vector3d point = next_frames[static_cast<std::size_t>(probes[p].link)] * probes[p].point;
      for (std::size_t o = 0; o < obstacles.size(); ++o) {
        ContactReport& cr = r.contacts[p * obstacles.size() + o];
        cr.probe = static_cast<int>(p);
        cr.obstacle = static_cast<int>(o);
        cr.gap = obstacles[o].signed_distance(point);
      }
    }
  }
  if (scenario_.constraint_options.joint_limits) {
    const auto& links = chain.links();
    for (std::size_t i = 0; i < links.size(); ++i) {
      if (!links[i].limit || links[i].joint.kind == JointKind::floating_base) continue;
      const double q = next.joints[chain.coordinate_index(static_cast<int>(i))];
      r.max_limit_violation =
          std::max({r.max_limit_violation, links[i].limit->lower - q, q - links[i].limit->upper});
    }
  }

  const std::vector<PortPower> joint_powers = {
      {"task", PortRole::task, task_joint_power},
      {"contact", PortRole::contact, contact_power},
      {"limit", PortRole::limit, limit_power},
      {"guide", PortRole::guide, guide_joint_power},
      {"internal", PortRole::internal, internal.dot(qdot)},
      {"external", PortRole::external, external_joint_power},
  };

  // Commit: ledgers first since they may reject non-finite samples.
  PassivityLedger ledger = ledger_;
  PassivityLedger joint_ledger = joint_ledger_;
  ledger.record_powers(inputs, dt);
  joint_ledger.record_powers(joint_powers, dt);
  ledger_ = std::move(ledger);
  joint_ledger_ = std::move(joint_ledger);

  state_ = std::move(next);
  guide_states_ = std::move(next_guides);
  std::fill(pending_switch_energy_.begin(), pending_switch_energy_.end(), 0.0);
  for (std::size_t i = 0; i < nt; ++i) predicted_targets_[i] = next_targets[i];
  joint_dissipation_ += r.joint_dissipation_rate * dt;
  dissipated_ += dissipation * dt;
  ++step_;

  const auto new_frames = forward_kinematics(chain, state_);
  double storage = 0.0;
  for (std::size_t i = 0; i < nt; ++i) {
    const TaskSpec& spec = scenario_.tasks[i];
    TaskReport& tr = r.tasks[i];
    tr.pose = frame_pose(new_frames, spec.frame);
    tr.error = lie::pose_error(next_targets[i], tr.pose);
    storage += 0.5 * tr.error.dot(spec.stiffness * tr.error);
  }
  r.guides.resize(scenario_.guides.size());
  for (std::size_t g = 0; g < scenario_.guides.size(); ++g) {
    const VirtualMechanism& mech = scenario_.guides[g].mechanism;
    const CouplingGeometry geo = coupling_geometry(mech, chain, state_, guide_states_[g]);
    GuideReport& gr = r.guides[g];
    gr.on = guide_on_[g];
    gr.tool_pose = geo.tool_pose;
    gr.manikin_pose = geo.manikin_pose;
    gr.axis_error = scenario_.guides[g].track_axis ? axis_error(geo.manikin_pose, mech.ideal_axis, mech.tool_axis_local)
                                                   : std::numeric_limits<double>::quiet_NaN();
    gr.spring_energy = coupling_potential(mech, geo);
    if (gr.on) storage += gr.spring_energy;
  }
  for (const ActiveGuide& a : active) {
    const VirtualMechanism& mech = scenario_.guides[a.index].mechanism;
    const Eigen::VectorXd guide_qdot = x.segment(a.offset, a.dof);
    const Vector6d rel = a.geometry.guide_jacobian * guide_qdot - a.geometry.manikin_jacobian * qdot;
    r.guides[a.index].dissipated =
        (rel.dot(mech.coupling.damping * rel) + guide_qdot.dot(mech.chain.damping() * guide_qdot)) * dt;
  }
  r.storage = storage;
  report_ = std::move(r);
}

}  // namespace vhsim
