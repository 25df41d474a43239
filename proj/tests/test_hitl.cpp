#include "support/oracles.hpp"
#include "support/scenarios.hpp"
#include "twinsync/errors.hpp"
#include "twinsync/hitl.hpp"

#include <doctest.h>

#include <vector>

using namespace twinsync;
using testing_support::at;
using testing_support::central_box;

namespace {

WaypointPlan sweep() { return plan_waypoints(at(0.5, -0.4, 0.3), {at(0.5, 0.4, 0.3), 0.01}); }

ReplanContext context(std::vector<Obstacle> obstacles) {
  ReplanContext ctx;
  ctx.seed = solve_ik(ctx.chain, at(0.5, -0.4, 0.3), panda_ready_pose()).q;
  ctx.obstacles = std::move(obstacles);
  ctx.lift_clearance = 0.08;
  return ctx;
}

RehearsalSetup setup(std::vector<Obstacle> obstacles) {
  RehearsalSetup s;
  s.robot.gain = 10.0;
  s.obstacles = std::move(obstacles);
  return s;
}

Incident incident(IncidentKind k, std::int64_t tick = 100) {
  Incident i;
  i.kind = k;
  i.tick = tick;
  i.measured = 0.04;
  i.bound = 0.05;
  i.unit = "m";
  return i;
}

}  // namespace

TEST_CASE("obstacle anomaly proposes a lift-over") {
  HitlGate gate;
  const auto& p = gate.raise_anomaly(incident(IncidentKind::obstacle_proximity), sweep(), context({central_box()}), 100);
  CHECK(p.id == "plan-1");
  CHECK(p.status == PlanStatus::awaiting_rehearsal);
  CHECK(p.candidate.provenance == PlanProvenance::avoidance_replanned);
  CHECK(min_clearance(p.candidate, central_box()) >= 0.08);
  CHECK(p.candidate_joints.size() == p.candidate.waypoints.size());
  CHECK(p.raised_tick == 100);
}

TEST_CASE("other anomalies re-propose the current plan") {
  HitlGate gate;
  const auto& p = gate.raise_anomaly(incident(IncidentKind::timing_deviation), sweep(), context({}), 5);
  CHECK(p.candidate.waypoints == sweep().waypoints);
  CHECK(p.candidate.provenance == PlanProvenance::direct);
}

TEST_CASE("plans queue in arrival order") {
  HitlGate gate;
  gate.raise_anomaly(incident(IncidentKind::obstacle_proximity), sweep(), context({central_box()}), 1);
  gate.raise_anomaly(incident(IncidentKind::link_timeout), sweep(), context({}), 2);
  REQUIRE(gate.plans().size() == 2);
  CHECK(gate.plans()[0].id == "plan-1");
  CHECK(gate.plans()[1].id == "plan-2");
  CHECK(gate.head()->id == "plan-1");
}

TEST_CASE("rehearsal of a sound lift-over completes") {
  HitlGate gate;
  gate.raise_anomaly(incident(IncidentKind::obstacle_proximity), sweep(), context({central_box()}), 1);
  const auto& r = gate.rehearse("plan-1", setup({central_box()}), 1);
  CHECK(r.completed);
  REQUIRE(r.min_clearance_m);
  CHECK(*r.min_clearance_m >= 0.05);
  CHECK(r.max_pose_deviation_m < 0.1);
  CHECK(r.log_ref == "rehearsal/plan-1");
  CHECK(gate.find("plan-1").status == PlanStatus::awaiting_decision);
}

TEST_CASE("rehearsal catches a planted violation") {
  // A candidate straight through the box: the rehearsal must not pass it.
  HitlGate gate;
  gate.raise_anomaly(incident(IncidentKind::timing_deviation), sweep(), context({}), 1);
  const auto& r = gate.rehearse("plan-1", setup({central_box()}), 1);
  CHECK_FALSE(r.completed);
  CHECK(*r.min_clearance_m < 0.05);

  const auto& p = gate.decide("plan-1", Verdict::approve, "alice", 2);
  CHECK(p.status == PlanStatus::approved);
  REQUIRE(p.decision);
  CHECK(p.decision->override_flag);
}

TEST_CASE("infeasible replans leave an empty candidate") {
  HitlGate gate;
  // Goal sits inside the grown footprint.
  const auto into = plan_waypoints(at(0.5, -0.4, 0.3), {at(0.5, 0.0, 0.3), 0.01});
  const auto& p = gate.raise_anomaly(incident(IncidentKind::obstacle_proximity), into, context({central_box()}), 1);
  CHECK(p.candidate.waypoints.empty());
  CHECK_FALSE(p.infeasible_reason.empty());
  CHECK(p.status == PlanStatus::awaiting_decision);
  CHECK_THROWS_AS(gate.rehearse("plan-1", setup({central_box()}), 1), UndefinedRehearsal);
  CHECK_THROWS_AS(gate.decide("plan-1", Verdict::approve, "bob", 1), Conflict);
  CHECK(gate.decide("plan-1", Verdict::reject, "bob", 1).status == PlanStatus::rejected);
}

TEST_CASE("decision semantics") {
  HitlGate gate;
  gate.raise_anomaly(incident(IncidentKind::obstacle_proximity), sweep(), context({central_box()}), 1);
  CHECK_THROWS_AS(gate.decide("plan-9", Verdict::approve, "a", 1), NotFound);
  CHECK_THROWS_AS(gate.decide("plan-1", Verdict::approve, "a", 1), Conflict);  // not rehearsed yet
  gate.rehearse("plan-1", setup({central_box()}), 1);
  CHECK_THROWS_AS(gate.mark_deployed("plan-1", 1), Conflict);
  const auto& p = gate.decide("plan-1", Verdict::approve, "a", 3);
  CHECK_FALSE(p.decision->override_flag);
  CHECK(p.decision->time_ms == 3.0);
  CHECK_THROWS_AS(gate.decide("plan-1", Verdict::reject, "b", 4), Conflict);
  CHECK_THROWS_AS(gate.rehearse("plan-1", setup({central_box()}), 4), Conflict);
  CHECK(gate.mark_deployed("plan-1", 5).status == PlanStatus::deployed);
  CHECK_THROWS_AS(gate.mark_deployed("plan-1", 6), Conflict);
  CHECK(gate.head() == nullptr);
}

TEST_CASE("rejected plans never deploy") {
  HitlGate gate;
  gate.raise_anomaly(incident(IncidentKind::obstacle_proximity), sweep(), context({central_box()}), 1);
  gate.rehearse("plan-1", setup({central_box()}), 1);
  gate.decide("plan-1", Verdict::reject, "carol", 2);
  CHECK_THROWS_AS(gate.mark_deployed("plan-1", 3), Conflict);
  CHECK(gate.find("plan-1").status == PlanStatus::rejected);
}

TEST_CASE("audit trail and events follow every transition") {
  HitlGate gate;
  std::vector<std::string> events;
  std::vector<AuditEntry> sunk;
  gate.set_listener([&](const GateEvent& e) { events.push_back(e.type); });
  gate.set_audit_sink([&](AuditEntry a) { sunk.push_back(std::move(a)); });
  gate.raise_anomaly(incident(IncidentKind::obstacle_proximity), sweep(), context({central_box()}), 1);
  gate.rehearse("plan-1", setup({central_box()}), 1);
  gate.decide("plan-1", Verdict::approve, "dave", 2);
  gate.mark_deployed("plan-1", 2);
  CHECK(events == std::vector<std::string>{"pending-plan", "rehearsal", "decision", "deployed"});
  REQUIRE(gate.audit().size() == 4);
  REQUIRE(sunk.size() == 4);
  const char* expected[] = {"anomaly-raised", "rehearsal", "decision", "deployed"};
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(gate.audit()[i].event == expected[i]);
    CHECK(gate.audit()[i].plan_id == "plan-1");
    CHECK(gate.audit()[i].order == i);
  }
  CHECK(gate.audit()[2].detail.find("\"actor\":\"dave\"") != std::string::npos);
}

TEST_CASE("verdict parsing") {
  CHECK(verdict_from_string("approve") == Verdict::approve);
  CHECK(verdict_from_string("reject") == Verdict::reject);
  CHECK_THROWS_AS(verdict_from_string("maybe"), ContractError);
}

TEST_CASE("distance to a polyline") {
  const std::vector<Pose> line{at(0, 0, 0), at(1, 0, 0)};
  CHECK(distance_to_polyline({0.5, 0.3, 0.0}, line) == doctest::Approx(0.3));
  CHECK(distance_to_polyline({2.0, 0.0, 0.0}, line) == doctest::Approx(1.0));
  CHECK_THROWS_AS(distance_to_polyline({0, 0, 0}, {}), ContractError);
}
