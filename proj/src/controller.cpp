#include "twinsync/controller.hpp"

#include "twinsync/errors.hpp"

#include <algorithm>
#include <cmath>

namespace twinsync {

namespace {

JointVector default_seed(const KinematicChain& chain) {
  if (chain.joint_count() == 7) {
    JointVector ready = panda_ready_pose();
    if (chain.within_limits(ready)) return ready;
  }
  return chain.clamp(JointVector::Zero(static_cast<Eigen::Index>(chain.joint_count())));
}

std::vector<JointVector> solve_plan(const KinematicChain& chain, const WaypointPlan& plan,
                                    JointVector seed, const IkOptions& ik) {
  std::vector<JointVector> out;
  out.reserve(plan.waypoints.size());
  for (const auto& w : plan.waypoints) {
    seed = solve_ik(chain, w, seed, ik).q;
    out.push_back(seed);
  }
  return out;
}

bool near(const TwinState& s, const Pose& p, double radius) {
  return (s.pose.position() - p.position()).norm() <= radius;
}

}  // namespace

TwinController::TwinController(ScenarioConfig config) : config_(std::move(config)), gate_(config_.tick_ms) {
  config_.validate();
  const auto& chain = config_.chain;

  JointVector start_q;
  Pose start_pose;
  if (config_.initial_joints) {
    start_q = *config_.initial_joints;
    start_pose = forward_kinematics(chain, start_q);
  } else if (config_.start) {
    start_pose = *config_.start;
    try {
      start_q = solve_ik(chain, start_pose, default_seed(chain), config_.control.ik).q;
    } catch (const UnreachableTarget& e) {
      throw ConfigError("/start", e.what());
    }
  } else {
    start_q = default_seed(chain);
    start_pose = forward_kinematics(chain, start_q);
  }

  WaypointPlan plan = plan_waypoints(start_pose, config_.goal);
  if (config_.obstacle_detection == ObstacleDetection::a_priori && !config_.obstacles.empty()) {
    try {
      plan = replan_avoid_all(plan, config_.obstacles,
                              config_.bounds.delta_b_m + config_.control.avoidance_margin_m);
    } catch (const ReplanInfeasible& e) {
      throw ConfigError("/obstacles", e.what());
    }
  }
  std::vector<JointVector> joints;
  try {
    joints = solve_plan(chain, plan, start_q, config_.control.ik);
  } catch (const UnreachableTarget& e) {
    throw ConfigError("/goal/target", e.what());
  }
  set_plan(std::move(plan), std::move(joints));
  // The twins already stand on the first waypoint.
  commanded_index_ = 0;

  const std::array<RobotConfig*, 2> robot_cfg{&config_.physical, &config_.virtual_twin};
  const std::array<TwinId, 2> ids{TwinId::physical, TwinId::virtual_twin};
  const std::array<std::array<ChannelIndex, 2>, 2> chan{
      {{ChannelIndex::cmd_physical, ChannelIndex::state_physical},
       {ChannelIndex::cmd_virtual, ChannelIndex::state_virtual}}};
  for (std::size_t i = 0; i < 2; ++i) {
    RobotConfig rc = *robot_cfg[i];
    rc.chain = chain;
    rc.tick_ms = config_.tick_ms;
    robots_[i] = std::make_unique<RobotTwin>(ids[i], rc, start_q);
    ChannelConfig down = config_.channel(chan[i][0]);
    ChannelConfig up = config_.channel(chan[i][1]);
    down.seed = effective_channel_seed(config_.seed, chan[i][0], down.seed);
    up.seed = effective_channel_seed(config_.seed, chan[i][1], up.seed);
    links_[i] = std::make_unique<DuplexLink>(down, up);
  }

  gate_.set_audit_sink([this](AuditEntry a) {
    a.order = next_order();
    log_.audit.push_back(std::move(a));
  });
  log_.tick_ms = config_.tick_ms;
  log_.config_fingerprint = fingerprint(config_);
  watchdog_tick_ = std::min(config_.max_ticks, nominal_ticks(plan_));
}

void TwinController::set_plan(WaypointPlan plan, std::vector<JointVector> joints) {
  plan_ = std::move(plan);
  plan_joints_ = std::move(joints);
  index_ = 0;
  commanded_index_.reset();
}

std::int64_t TwinController::nominal_ticks(const WaypointPlan& plan) const {
  double length = 0.0;
  for (std::size_t i = 1; i < plan.waypoints.size(); ++i) {
    length += (plan.waypoints[i].position() - plan.waypoints[i - 1].position()).norm();
  }
  const double k = std::min(config_.physical.gain, config_.virtual_twin.gain);
  double seconds = length / (k * config_.control.advance_radius_m) + 5.0 / k;
  double round_trip = 0.0;
  for (std::size_t i = 0; i < 2; ++i) {
    const auto& down = config_.channels[i];
    const auto& up = config_.channels[i + 2];
    round_trip = std::max(round_trip, down.latency_ms + down.jitter_ms + up.latency_ms + up.jitter_ms);
  }
  seconds += static_cast<double>(plan.waypoints.size()) * (round_trip + 2.0 * config_.tick_ms) / 1000.0;
  seconds += std::max(config_.physical.actuation_latency_ms, config_.virtual_twin.actuation_latency_ms) / 1000.0;
  const double ticks = config_.control.watchdog_factor * seconds * 1000.0 / config_.tick_ms;
  return std::max<std::int64_t>(1000, static_cast<std::int64_t>(std::ceil(ticks)));
}

bool TwinController::step() {
  switch (state_) {
    case TerminalState::completed:
    case TerminalState::watchdog_timeout:
      return false;
    case TerminalState::blocked:
      if (!try_deploy()) return false;
      command_phase(now());
      deliver_commands(now());
      return true;
    case TerminalState::idle:
      state_ = TerminalState::running;
      acquire_initial();
      break;
    case TerminalState::running: {
      ++tick_;
      const double t = now();
      for (std::size_t i = 0; i < 2; ++i) {
        robots_[i]->step(config_.tick_ms);
        links_[i]->up.send(robots_[i]->snapshot(), t);
      }
      acquire(t);
      break;
    }
  }
  monitor_and_log(now());
  if (state_ == TerminalState::blocked) try_deploy();
  if (state_ == TerminalState::running) {
    command_phase(now());
    deliver_commands(now());
  }
  return true;
}

void TwinController::acquire_initial() {
  for (std::size_t i = 0; i < 2; ++i) acquired_[i] = robots_[i]->snapshot();
}

void TwinController::acquire(double now_ms) {
  for (std::size_t i = 0; i < 2; ++i) {
    for (auto& s : links_[i]->up.deliver_due(now_ms)) {
      acked_[i] = std::max(acked_[i], s.ack_sequence);
      acquired_[i] = std::move(s);
    }
  }
}

void TwinController::monitor_and_log(double now_ms) {
  const TwinState& r = *acquired_[0];
  const TwinState& v = *acquired_[1];
  LogRow row;
  row.tick = tick_;
  row.physical = r;
  row.virtual_twin = v;
  row.dev_pos_m = position_deviation(r.pose, v.pose);
  row.dev_ts_ms = std::abs(r.timestamp_ms - v.timestamp_ms);
  row.clearance_min_m = min_pair_clearance(r.pose, v.pose, config_.obstacles);

  std::vector<Incident> found;
  if (auto i = check_pose_deviation(r.pose, v.pose, config_.bounds.delta_q_m)) found.push_back(*i);
  if (config_.bounds.delta_orientation_rad) {
    if (auto i = check_orientation_deviation(r.pose, v.pose, *config_.bounds.delta_orientation_rad)) {
      found.push_back(*i);
    }
  }
  if (auto i = check_timing(r.timestamp_ms, v.timestamp_ms, config_.bounds.delta_alpha_ms)) {
    found.push_back(*i);
  }
  if (!config_.obstacles.empty()) {
    const Obstacle* nearest = nullptr;
    double best = 0.0;
    for (const auto& o : config_.obstacles) {
      const double c = std::min(clearance(r.pose, o), clearance(v.pose, o));
      if (!nearest || c < best) {
        nearest = &o;
        best = c;
      }
    }
    if (auto i = check_obstacle(r.pose, v.pose, *nearest, config_.bounds.delta_b_m)) found.push_back(*i);
  }
  for (std::size_t t = 0; t < 2; ++t) {
    auto& out = outstanding_[t];
    if (!out || out->timed_out || acked(t)) continue;
    if (config_.channels[t].mode != LinkMode::synchronous) continue;
    const double waited = now_ms - out->first_sent_ms;
    if (waited >= config_.control.link_timeout_ms) {
      out->timed_out = true;
      Incident inc;
      inc.kind = IncidentKind::link_timeout;
      inc.measured = waited;
      inc.bound = config_.control.link_timeout_ms;
      inc.unit = "ms";
      found.push_back(inc);
    }
  }

  for (auto& inc : found) {
    inc.tick = tick_;
    inc.physical = r;
    inc.virtual_twin = v;
    row.incidents |= bit(inc.kind);
    log_.incidents.push_back(inc);
  }
  log_.rows.push_back(std::move(row));

  const std::size_t last = plan_.waypoints.size() - 1;
  const Pose& goal = plan_.waypoints[last];
  if (index_ == last && commanded_index_ == last && near(r, goal, config_.control.goal_tolerance_m) &&
      near(v, goal, config_.control.goal_tolerance_m)) {
    state_ = TerminalState::completed;
  } else if (tick_ >= watchdog_tick_) {
    state_ = TerminalState::watchdog_timeout;
  } else {
    // Link loss outranks proximity; both outrank the advisory kinds.
    const IncidentKind priority[] = {IncidentKind::link_timeout, IncidentKind::obstacle_proximity,
                                     IncidentKind::pose_deviation, IncidentKind::timing_deviation};
    for (auto k : priority) {
      if (!(config_.control.gate_on & bit(k))) continue;
      const auto it = std::find_if(found.begin(), found.end(), [&](const Incident& i) { return i.kind == k; });
      if (it == found.end()) continue;
      handle_anomaly(*it);
      if (state_ == TerminalState::blocked) break;
    }
  }
  log_.terminal = state_;
  publish();
}

WaypointPlan TwinController::remaining_plan() const {
  const auto& wps = plan_.waypoints;
  std::size_t from = index_;
  if (!config_.obstacles.empty()) {
    // Back off to the last waypoint clear of every grown footprint so the
    // candidate can climb before it crosses.
    const double grow = config_.bounds.delta_b_m + config_.control.avoidance_margin_m;
    auto clear = [&](const Pose& p) {
      return std::none_of(config_.obstacles.begin(), config_.obstacles.end(),
                          [&](const Obstacle& o) { return o.footprint_contains(p.x, p.y, grow); });
    };
    std::size_t j = from;
    while (j > 0 && !clear(wps[j])) --j;
    from = j;
  }
  WaypointPlan out;
  out.max_step = plan_.max_step;
  out.provenance = plan_.provenance;
  out.waypoints.assign(wps.begin() + static_cast<std::ptrdiff_t>(from), wps.end());
  return out;
}

void TwinController::handle_anomaly(const Incident& incident) {
  const WaypointPlan remaining =
      incident.kind == IncidentKind::obstacle_proximity ? remaining_plan() : [&] {
        WaypointPlan w;
        w.max_step = plan_.max_step;
        w.provenance = plan_.provenance;
        w.waypoints.assign(plan_.waypoints.begin() + static_cast<std::ptrdiff_t>(index_), plan_.waypoints.end());
        return w;
      }();
  const double lift = config_.bounds.delta_b_m + config_.control.avoidance_margin_m;
  if (incident.kind == IncidentKind::obstacle_proximity) {
    try {
      // The plan in force already clears the obstacle: nothing to review.
      if (replan_avoid_all(remaining, config_.obstacles, lift).waypoints == remaining.waypoints) return;
    } catch (const ReplanInfeasible&) {
    }
  }

  ReplanContext ctx;
  ctx.chain = config_.chain;
  ctx.seed = acquired_[0]->joints;
  ctx.obstacles = config_.obstacles;
  ctx.lift_clearance = lift;
  ctx.ik = config_.control.ik;
  const PendingPlan& p = gate_.raise_anomaly(incident, remaining, ctx, tick_);
  state_ = TerminalState::blocked;
  blocking_plan_ = p.id;

  if (p.status == PlanStatus::awaiting_rehearsal) {
    RehearsalSetup setup;
    setup.robot = config_.virtual_twin;
    setup.robot.chain = config_.chain;
    setup.robot.tick_ms = config_.tick_ms;
    setup.bounds = config_.bounds;
    setup.obstacles = config_.obstacles;
    setup.advance_radius_m = config_.control.advance_radius_m;
    setup.goal_tolerance_m = config_.control.goal_tolerance_m;
    setup.max_ticks = nominal_ticks(p.candidate);
    const auto& rep = gate_.rehearse(p.id, setup, tick_);
    if (config_.hitl_mode == HitlMode::auto_approve && rep.completed &&
        incident.kind != IncidentKind::link_timeout) {
      gate_.decide(p.id, Verdict::approve, "auto-approve", tick_);
    }
  }
}

bool TwinController::try_deploy() {
  if (blocking_plan_.empty()) return false;
  const PendingPlan& p = gate_.find(blocking_plan_);
  if (p.status != PlanStatus::approved) return false;
  set_plan(p.candidate, p.candidate_joints);
  outstanding_ = {};
  gate_.mark_deployed(p.id, tick_);
  watchdog_tick_ = std::min(config_.max_ticks, tick_ + nominal_ticks(plan_));
  blocking_plan_.clear();
  state_ = TerminalState::running;
  log_.terminal = state_;
  return true;
}

bool TwinController::acked(std::size_t twin) const {
  const auto& out = outstanding_[twin];
  return !out || acked_[twin] >= out->sequence;
}

void TwinController::send_command(std::size_t twin, std::uint64_t command_id, double now_ms, bool retransmit) {
  CommandMsg cmd;
  cmd.target_joints = plan_joints_[index_];
  cmd.issue_time_ms = now_ms;
  cmd.sequence = next_sequence_[twin]++;
  cmd.command_id = command_id;
  links_[twin]->down.send(cmd, now_ms);
  auto& out = outstanding_[twin];
  if (!retransmit || !out) out = Outstanding{cmd.sequence, command_id, now_ms, now_ms, false};
  out->sequence = cmd.sequence;
  out->last_sent_ms = now_ms;
  log_.commands.push_back(
      {tick_, next_order(), robots_[twin]->id(), CommandEvent::sent, cmd.sequence, command_id});
}

void TwinController::command_phase(double now_ms) {
  for (std::size_t t = 0; t < 2; ++t) {
    const auto& out = outstanding_[t];
    if (out && !acked(t) && config_.channels[t].mode == LinkMode::synchronous &&
        now_ms - out->last_sent_ms >= config_.control.retransmit_ms) {
      send_command(t, out->command_id, now_ms, true);
    }
  }

  const std::size_t last = plan_.waypoints.size() - 1;
  bool fire = false;
  if (commanded_index_ != index_) {
    fire = true;
  } else if (index_ < last) {
    const Pose& w = plan_.waypoints[index_];
    const double r = config_.control.advance_radius_m;
    bool ready = near(*acquired_[0], w, r) && near(*acquired_[1], w, r);
    for (std::size_t t = 0; t < 2; ++t) {
      if (config_.channels[t].mode == LinkMode::synchronous) ready = ready && acked(t);
    }
    if (ready) {
      ++index_;
      fire = true;
    }
  }
  if (!fire) return;
  const std::uint64_t id = next_command_id_++;
  for (std::size_t t = 0; t < 2; ++t) send_command(t, id, now_ms, false);
  commanded_index_ = index_;
}

void TwinController::deliver_commands(double now_ms) {
  for (std::size_t t = 0; t < 2; ++t) {
    for (const auto& c : links_[t]->down.deliver_due(now_ms)) {
      CommandEvent ev = CommandEvent::applied;
      try {
        robots_[t]->apply_command(c, now_ms);
      } catch (const RejectedCommand&) {
        ev = CommandEvent::rejected;
      }
      log_.commands.push_back({tick_, next_order(), robots_[t]->id(), ev, c.sequence, c.command_id});
    }
  }
}

const PendingPlan& TwinController::decide(const std::string& plan_id, Verdict verdict, const std::string& actor) {
  return gate_.decide(plan_id, verdict, actor, tick_);
}

TerminalState TwinController::run(const std::vector<ScriptedDecision>& script) {
  while (true) {
    if (step()) continue;
    if (state_ != TerminalState::blocked) break;
    const PendingPlan& p = gate_.find(blocking_plan_);
    if (p.status != PlanStatus::awaiting_decision) break;
    const auto it = std::find_if(script.begin(), script.end(),
                                 [&](const ScriptedDecision& d) { return d.plan_id == p.id; });
    if (it == script.end()) break;
    decide(it->plan_id, it->verdict, it->actor);
  }
  return state_;
}

void TwinController::publish() {
  if (!frame_listener_) return;
  TickFrame f;
  f.row = &log_.rows.back();
  f.state = state_;
  f.waypoint_index = index_;
  f.waypoint_count = plan_.waypoints.size();
  frame_listener_(f);
}

RunLog run_scenario(const ScenarioConfig& config, const std::vector<ScriptedDecision>& script) {
  TwinController c(config);
  c.run(script);
  return c.log();
}

}  // namespace twinsync
