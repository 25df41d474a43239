#pragma once

#include "twinsync/monitor.hpp"
#include "twinsync/robotsim.hpp"
#include "twinsync/runlog.hpp"
#include "twinsync/trajectory.hpp"

#include <cstdint>
#include <deque>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace twinsync {

enum class PlanStatus { awaiting_rehearsal, awaiting_decision, approved, rejected, deployed };
enum class Verdict { approve, reject };

std::string_view to_string(PlanStatus s);
std::string_view to_string(Verdict v);
/// Throws ContractError on anything but "approve" / "reject".
Verdict verdict_from_string(std::string_view s);

struct RehearsalReport {
  /// Smallest clearance of the rehearsed poses to any obstacle; nullopt
  /// without obstacles.
  std::optional<double> min_clearance_m;
  /// Largest distance of a rehearsed pose from the candidate polyline.
  double max_pose_deviation_m = 0.0;
  bool completed = false;
  std::string log_ref;
  std::int64_t ticks = 0;
};

struct Decision {
  std::string plan_id;
  Verdict verdict = Verdict::reject;
  std::string actor;
  double time_ms = 0.0;
  bool override_flag = false;
};

struct PendingPlan {
  std::string id;
  Incident trigger;
  WaypointPlan candidate;
  /// IK solution per candidate waypoint.
  std::vector<JointVector> candidate_joints;
  std::optional<RehearsalReport> rehearsal;
  PlanStatus status = PlanStatus::awaiting_rehearsal;
  std::optional<Decision> decision;
  /// Why the candidate is empty, when it is.
  std::string infeasible_reason;
  std::int64_t raised_tick = 0;
};

/// What raise_anomaly needs to build and solve a candidate.
struct ReplanContext {
  KinematicChain chain = panda_chain();
  JointVector seed;
  std::vector<Obstacle> obstacles;
  /// delta_b plus any avoidance margin.
  double lift_clearance = 0.05;
  IkOptions ik;
};

/// Fresh virtual-only run used to vet a candidate.
struct RehearsalSetup {
  RobotConfig robot;
  Bounds bounds;
  std::vector<Obstacle> obstacles;
  double advance_radius_m = 0.02;
  double goal_tolerance_m = 1e-3;
  std::int64_t max_ticks = 200000;
};

struct GateEvent {
  std::string type;  ///< pending-plan, rehearsal, decision, deployed
  PendingPlan plan;
};

/// Anomaly review queue. Plans move awaiting-rehearsal -> awaiting-decision ->
/// approved -> deployed, or awaiting-decision -> rejected; nothing else.
class HitlGate {
 public:
  using AuditSink = std::function<void(AuditEntry)>;
  using Listener = std::function<void(const GateEvent&)>;

  explicit HitlGate(double tick_ms = 1.0) : tick_ms_(tick_ms) {}

  /// Every audit entry is also forwarded to `sink`.
  void set_audit_sink(AuditSink sink) { sink_ = std::move(sink); }
  void set_listener(Listener l) { listener_ = std::move(l); }

  /// Builds the candidate: a lift-over of `current` for obstacle incidents,
  /// `current` unchanged otherwise. An infeasible replan or an unreachable
  /// waypoint leaves the candidate empty and skips straight to
  /// awaiting-decision. Plans queue FIFO.
  PendingPlan& raise_anomaly(const Incident& incident, const WaypointPlan& current,
                             const ReplanContext& ctx, std::int64_t tick);

  /// Runs the candidate on a fresh virtual twin starting at its first
  /// waypoint. completed = goal reached, clearance >= delta_b and deviation
  /// from the candidate < delta_q. Throws UndefinedRehearsal on an empty
  /// candidate, Conflict unless awaiting rehearsal, NotFound on unknown ids.
  const RehearsalReport& rehearse(const std::string& plan_id, const RehearsalSetup& setup,
                                  std::int64_t tick);

  /// Throws NotFound, or Conflict when the plan is not awaiting a decision
  /// (including a second decision). Approving a failed rehearsal is recorded
  /// as an override; approving an empty candidate is a Conflict.
  PendingPlan& decide(const std::string& plan_id, Verdict verdict, const std::string& actor,
                      std::int64_t tick);

  /// approved -> deployed. Throws Conflict from any other status.
  PendingPlan& mark_deployed(const std::string& plan_id, std::int64_t tick);

  const PendingPlan& find(const std::string& plan_id) const;
  const std::deque<PendingPlan>& plans() const noexcept { return plans_; }
  /// Oldest plan still awaiting rehearsal or a decision, or approved but not
  /// deployed.
  const PendingPlan* head() const;
  const std::vector<AuditEntry>& audit() const noexcept { return audit_; }

 private:
  PendingPlan& get(const std::string& plan_id);
  void record(std::int64_t tick, std::string event, const PendingPlan& p, std::string detail);
  void emit(std::string type, const PendingPlan& p);

  double tick_ms_;
  std::deque<PendingPlan> plans_;
  std::uint64_t next_id_ = 1;
  std::vector<AuditEntry> audit_;
  AuditSink sink_;
  Listener listener_;
};

/// Distance from a point to the polyline through the waypoint positions.
double distance_to_polyline(const Eigen::Vector3d& p, const std::vector<Pose>& waypoints);

}  // namespace twinsync
