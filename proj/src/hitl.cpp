#include "twinsync/hitl.hpp"

#include "twinsync/errors.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>

namespace twinsync {

using nlohmann::json;

std::string_view to_string(PlanStatus s) {
  switch (s) {
    case PlanStatus::awaiting_rehearsal: return "awaiting-rehearsal";
    case PlanStatus::awaiting_decision: return "awaiting-decision";
    case PlanStatus::approved: return "approved";
    case PlanStatus::rejected: return "rejected";
    case PlanStatus::deployed: return "deployed";
  }
  return "unknown";
}

std::string_view to_string(Verdict v) { return v == Verdict::approve ? "approve" : "reject"; }

Verdict verdict_from_string(std::string_view s) {
  if (s == "approve") return Verdict::approve;
  if (s == "reject") return Verdict::reject;
  throw ContractError("verdict must be 'approve' or 'reject', got '" + std::string(s) + "'");
}

double distance_to_polyline(const Eigen::Vector3d& p, const std::vector<Pose>& waypoints) {
  if (waypoints.empty()) throw ContractError("distance_to_polyline: empty polyline");
  double best = (p - waypoints.front().position()).norm();
  for (std::size_t i = 1; i < waypoints.size(); ++i) {
    const Eigen::Vector3d a = waypoints[i - 1].position();
    const Eigen::Vector3d ab = waypoints[i].position() - a;
    const double len2 = ab.squaredNorm();
    const double s = len2 > 0.0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
    best = std::min(best, (p - (a + s * ab)).norm());
  }
  return best;
}

PendingPlan& HitlGate::raise_anomaly(const Incident& incident, const WaypointPlan& current,
                                     const ReplanContext& ctx, std::int64_t tick) {
  PendingPlan p;
  p.id = "plan-" + std::to_string(next_id_++);
  p.trigger = incident;
  p.raised_tick = tick;
  try {
    if (incident.kind == IncidentKind::obstacle_proximity && !ctx.obstacles.empty()) {
      p.candidate = replan_avoid_all(current, ctx.obstacles, ctx.lift_clearance);
    } else {
      p.candidate = current;
    }
    JointVector seed = ctx.seed;
    p.candidate_joints.reserve(p.candidate.waypoints.size());
    for (const auto& w : p.candidate.waypoints) {
      seed = solve_ik(ctx.chain, w, seed, ctx.ik).q;
      p.candidate_joints.push_back(seed);
    }
  } catch (const ReplanInfeasible& e) {
    p.infeasible_reason = e.what();
  } catch (const UnreachableTarget& e) {
    p.infeasible_reason = e.what();
  }
  if (!p.infeasible_reason.empty()) {
    p.candidate.waypoints.clear();
    p.candidate_joints.clear();
    p.status = PlanStatus::awaiting_decision;
  }

  plans_.push_back(std::move(p));
  PendingPlan& ref = plans_.back();
  json detail = {{"trigger", std::string(to_string(incident.kind))},
                 {"measured", incident.measured},
                 {"bound", incident.bound},
                 {"unit", incident.unit},
                 {"candidate_waypoints", ref.candidate.waypoints.size()}};
  if (!ref.infeasible_reason.empty()) detail["infeasible"] = ref.infeasible_reason;
  record(tick, "anomaly-raised", ref, detail.dump());
  emit("pending-plan", ref);
  return ref;
}

const RehearsalReport& HitlGate::rehearse(const std::string& plan_id, const RehearsalSetup& setup,
                                          std::int64_t tick) {
  PendingPlan& p = get(plan_id);
  if (p.candidate.waypoints.empty()) {
    throw UndefinedRehearsal(plan_id + ": nothing to rehearse, candidate is empty");
  }
  if (p.status != PlanStatus::awaiting_rehearsal) {
    throw Conflict(plan_id + ": rehearsal requires awaiting-rehearsal, status is " +
                   std::string(to_string(p.status)));
  }

  const auto& wps = p.candidate.waypoints;
  const auto& qs = p.candidate_joints;
  const std::size_t last = wps.size() - 1;
  RobotTwin twin(TwinId::virtual_twin, setup.robot, qs.front());
  const double dt = setup.robot.tick_ms;

  RehearsalReport rep;
  rep.log_ref = "rehearsal/" + plan_id;
  bool reached = false;
  std::size_t idx = 0;
  std::uint64_t seq = 0;
  for (std::int64_t t = 0; t <= setup.max_ticks; ++t) {
    const TwinState s = twin.snapshot();
    const Eigen::Vector3d pos = s.pose.position();
    for (const auto& o : setup.obstacles) {
      const double c = clearance(s.pose, o);
      rep.min_clearance_m = std::min(rep.min_clearance_m.value_or(c), c);
    }
    rep.max_pose_deviation_m = std::max(rep.max_pose_deviation_m, distance_to_polyline(pos, wps));
    rep.ticks = t;
    if (idx == last && (pos - wps[last].position()).norm() <= setup.goal_tolerance_m) {
      reached = true;
      break;
    }
    if (idx < last && (pos - wps[idx].position()).norm() <= setup.advance_radius_m) {
      ++idx;
      CommandMsg cmd;
      cmd.target_joints = qs[idx];
      cmd.issue_time_ms = static_cast<double>(t) * dt;
      cmd.sequence = ++seq;
      cmd.command_id = seq;
      twin.apply_command(cmd, cmd.issue_time_ms);
    }
    twin.step(dt);
  }
  rep.completed = reached &&
                  (!rep.min_clearance_m || *rep.min_clearance_m >= setup.bounds.delta_b_m) &&
                  rep.max_pose_deviation_m < setup.bounds.delta_q_m;

  p.rehearsal = rep;
  p.status = PlanStatus::awaiting_decision;
  json detail = {{"completed", rep.completed},
                 {"max_pose_deviation_m", rep.max_pose_deviation_m},
                 {"ticks", rep.ticks},
                 {"log_ref", rep.log_ref}};
  detail["min_clearance_m"] = rep.min_clearance_m ? json(*rep.min_clearance_m) : json();
  record(tick, "rehearsal", p, detail.dump());
  emit("rehearsal", p);
  return *p.rehearsal;
}

PendingPlan& HitlGate::decide(const std::string& plan_id, Verdict verdict, const std::string& actor,
                              std::int64_t tick) {
  PendingPlan& p = get(plan_id);
  if (p.decision) {
    throw Conflict(plan_id + ": already decided (" + std::string(to_string(p.decision->verdict)) +
                   " by " + p.decision->actor + ")");
  }
  if (p.status != PlanStatus::awaiting_decision) {
    throw Conflict(plan_id + ": not awaiting a decision, status is " + std::string(to_string(p.status)));
  }
  if (verdict == Verdict::approve && p.candidate.waypoints.empty()) {
    throw Conflict(plan_id + ": cannot approve an empty candidate");
  }
  Decision d;
  d.plan_id = plan_id;
  d.verdict = verdict;
  d.actor = actor;
  d.time_ms = static_cast<double>(tick) * tick_ms_;
  d.override_flag = verdict == Verdict::approve && (!p.rehearsal || !p.rehearsal->completed);
  p.decision = d;
  p.status = verdict == Verdict::approve ? PlanStatus::approved : PlanStatus::rejected;
  record(tick, "decision", p,
         json{{"verdict", std::string(to_string(verdict))}, {"actor", actor}, {"override", d.override_flag}}
             .dump());
  emit("decision", p);
  return p;
}

PendingPlan& HitlGate::mark_deployed(const std::string& plan_id, std::int64_t tick) {
  PendingPlan& p = get(plan_id);
  if (p.status != PlanStatus::approved) {
    throw Conflict(plan_id + ": only approved plans deploy, status is " + std::string(to_string(p.status)));
  }
  p.status = PlanStatus::deployed;
  record(tick, "deployed", p, "{}");
  emit("deployed", p);
  return p;
}

const PendingPlan& HitlGate::find(const std::string& plan_id) const {
  for (const auto& p : plans_) {
    if (p.id == plan_id) return p;
  }
  throw NotFound("no pending plan '" + plan_id + "'");
}

PendingPlan& HitlGate::get(const std::string& plan_id) {
  return const_cast<PendingPlan&>(std::as_const(*this).find(plan_id));
}

const PendingPlan* HitlGate::head() const {
  for (const auto& p : plans_) {
    if (p.status != PlanStatus::rejected && p.status != PlanStatus::deployed) return &p;
  }
  return nullptr;
}

void HitlGate::record(std::int64_t tick, std::string event, const PendingPlan& p, std::string detail) {
  AuditEntry a;
  a.tick = tick;
  a.event = std::move(event);
  a.plan_id = p.id;
  a.detail = std::move(detail);
  a.order = audit_.size();
  audit_.push_back(a);
  if (sink_) sink_(std::move(a));
}

void HitlGate::emit(std::string type, const PendingPlan& p) {
  if (listener_) listener_(GateEvent{std::move(type), p});
}

}  // namespace twinsync
