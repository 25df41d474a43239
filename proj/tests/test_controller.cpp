#include "support/oracles.hpp"
#include "support/scenarios.hpp"
#include "twinsync/controller.hpp"
#include "twinsync/errors.hpp"
#include "twinsync/metrics.hpp"

#include <doctest.h>

#include <cmath>

using namespace twinsync;
using testing_support::at;
using testing_support::central_box;
using testing_support::sweep_config;

namespace {

std::uint64_t anomaly_order(const RunLog& log) {
  for (const auto& a : log.audit) {
    if (a.event == "anomaly-raised") return a.order;
  }
  FAIL("no anomaly in the audit trail");
  return 0;
}

std::size_t physical_after(const RunLog& log, std::uint64_t order, CommandEvent ev) {
  std::size_t n = 0;
  for (const auto& c : log.commands) {
    if (c.twin == TwinId::physical && c.event == ev && c.order > order) ++n;
  }
  return n;
}

ScenarioConfig runtime_obstacle() {
  auto cfg = sweep_config();
  cfg.obstacles = {central_box()};
  cfg.obstacle_detection = ObstacleDetection::runtime;
  return cfg;
}

}  // namespace

TEST_CASE("identical twins on perfect links never deviate") {
  auto cfg = sweep_config();
  cfg.physical.gain = 10.0;
  cfg.physical.actuation_latency_ms = 0.0;
  const RunLog log = run_scenario(cfg);
  CHECK(log.terminal == TerminalState::completed);
  CHECK(log.incidents.empty());
  for (const auto& r : log.rows) REQUIRE(r.dev_pos_m == 0.0);
  const auto& last = log.rows.back();
  CHECK(std::hypot(last.physical.pose.x - 0.5, last.physical.pose.y - 0.4, last.physical.pose.z - 0.3) <= 1e-3);
}

TEST_CASE("a gain mismatch deviates but stays inside the pose bound") {
  auto cfg = sweep_config();
  cfg.physical.actuation_latency_ms = 0.0;
  cfg.bounds.delta_q_m = 0.15;
  const RunLog log = run_scenario(cfg);
  CHECK(log.terminal == TerminalState::completed);
  const auto m = compute_metrics(log);
  CHECK(m.count(IncidentKind::pose_deviation) == 0);
  double worst = 0.0;
  for (const auto& r : log.rows) worst = std::max(worst, r.dev_pos_m);
  CHECK(worst > 0.0);
}

TEST_CASE("every logged pose is the forward kinematics of its joints") {
  TwinController ctl(sweep_config());
  ctl.run();
  const auto& chain = ctl.config().chain;
  for (const auto& r : ctl.log().rows) {
    REQUIRE(r.physical.pose == forward_kinematics(chain, r.physical.joints));
    REQUIRE(r.virtual_twin.pose == forward_kinematics(chain, r.virtual_twin.joints));
  }
}

TEST_CASE("same config and seed give a bit-identical log") {
  auto cfg = sweep_config();
  for (auto& ch : cfg.channels) {
    ch.latency_ms = 4.0;
    ch.jitter_ms = 3.0;
    ch.drop_prob = 0.05;
  }
  CHECK(to_csv(run_scenario(cfg)) == to_csv(run_scenario(cfg)));
  auto other = cfg;
  other.seed = 43;
  CHECK(to_csv(run_scenario(cfg)) != to_csv(run_scenario(other)));
}

TEST_CASE("a severed command link blocks with a link timeout") {
  auto cfg = sweep_config();
  cfg.channel(ChannelIndex::cmd_physical).drop_prob = 1.0;
  const RunLog log = run_scenario(cfg);
  CHECK(log.terminal == TerminalState::blocked);
  REQUIRE_FALSE(log.incidents.empty());
  CHECK(log.incidents.back().kind == IncidentKind::link_timeout);
  for (const auto& c : log.commands) {
    if (c.twin == TwinId::physical) REQUIRE(c.event == CommandEvent::sent);
  }
}

TEST_CASE("link timeouts are never auto-approved") {
  auto cfg = sweep_config();
  cfg.channel(ChannelIndex::cmd_physical).drop_prob = 1.0;
  cfg.hitl_mode = HitlMode::auto_approve;
  TwinController ctl(cfg);
  CHECK(ctl.run() == TerminalState::blocked);
  CHECK(ctl.gate().plans().front().status == PlanStatus::awaiting_decision);
}

TEST_CASE("timing offsets beyond the bound are flagged on every row") {
  auto cfg = sweep_config();
  cfg.physical.clock_offset_ms = 3.0;
  cfg.bounds.delta_alpha_ms = 2.0;
  const RunLog log = run_scenario(cfg);
  CHECK(log.terminal == TerminalState::completed);
  for (const auto& r : log.rows) REQUIRE((r.incidents & bit(IncidentKind::timing_deviation)) != 0);
}

TEST_CASE("watchdog stops a run that cannot finish in time") {
  auto cfg = sweep_config();
  cfg.max_ticks = 500;
  const RunLog log = run_scenario(cfg);
  CHECK(log.terminal == TerminalState::watchdog_timeout);
  CHECK(log.rows.size() <= 501);
}

TEST_CASE("runtime obstacle blocks until a decision") {
  TwinController ctl(runtime_obstacle());
  CHECK(ctl.run() == TerminalState::blocked);
  const auto rows = ctl.log().rows.size();
  const auto cmds = ctl.log().commands.size();
  CHECK_FALSE(ctl.step());
  CHECK_FALSE(ctl.step());
  CHECK(ctl.log().rows.size() == rows);
  CHECK(ctl.log().commands.size() == cmds);
  const auto& plan = ctl.gate().find(ctl.blocking_plan());
  CHECK(plan.status == PlanStatus::awaiting_decision);
  CHECK(plan.trigger.kind == IncidentKind::obstacle_proximity);
  REQUIRE(plan.rehearsal);
  CHECK(plan.rehearsal->completed);
}

TEST_CASE("approval resumes the run and clears the obstacle") {
  TwinController ctl(runtime_obstacle());
  ctl.run();
  const std::string id = ctl.blocking_plan();
  CHECK_THROWS_AS(ctl.decide("plan-42", Verdict::approve, "erin"), NotFound);
  ctl.decide(id, Verdict::approve, "erin");
  CHECK_THROWS_AS(ctl.decide(id, Verdict::approve, "erin"), Conflict);
  CHECK(ctl.run() == TerminalState::completed);
  CHECK(ctl.gate().find(id).status == PlanStatus::deployed);
  CHECK(ctl.plan().provenance == PlanProvenance::avoidance_replanned);
}

TEST_CASE("rejection keeps the physical twin idle") {
  TwinController ctl(runtime_obstacle());
  ctl.run();
  ctl.decide(ctl.blocking_plan(), Verdict::reject, "frank");
  CHECK(ctl.run() == TerminalState::blocked);
  const auto order = anomaly_order(ctl.log());
  CHECK(physical_after(ctl.log(), order, CommandEvent::sent) == 0);
  CHECK(physical_after(ctl.log(), order, CommandEvent::applied) == 0);
}

TEST_CASE("no physical command between anomaly and approval") {
  TwinController ctl(runtime_obstacle());
  ctl.run();
  const auto anomaly = anomaly_order(ctl.log());
  ctl.decide(ctl.blocking_plan(), Verdict::approve, "gina");
  ctl.run();
  std::uint64_t decision = 0;
  for (const auto& a : ctl.log().audit) {
    if (a.event == "decision") decision = a.order;
  }
  for (const auto& c : ctl.log().commands) {
    if (c.twin == TwinId::physical && c.order > anomaly) REQUIRE(c.order > decision);
  }
}

TEST_CASE("scripted decisions drive run()") {
  auto cfg = runtime_obstacle();
  const RunLog log = run_scenario(cfg, {{"plan-1", Verdict::approve, "script"}});
  CHECK(log.terminal == TerminalState::completed);
}

TEST_CASE("auto-approve handles obstacle anomalies") {
  auto cfg = runtime_obstacle();
  cfg.hitl_mode = HitlMode::auto_approve;
  const RunLog log = run_scenario(cfg);
  CHECK(log.terminal == TerminalState::completed);
  bool deployed = false;
  for (const auto& a : log.audit) deployed = deployed || a.event == "deployed";
  CHECK(deployed);
}

TEST_CASE("a-priori obstacles are planned around from the start") {
  auto cfg = runtime_obstacle();
  cfg.obstacle_detection = ObstacleDetection::a_priori;
  const RunLog log = run_scenario(cfg);
  CHECK(log.terminal == TerminalState::completed);
  CHECK(log.incidents.empty());
  const auto m = compute_metrics(log);
  REQUIRE(m.min_clearance_m);
  CHECK(*m.min_clearance_m >= cfg.bounds.delta_b_m);
}

TEST_CASE("frames are published once per logged tick in order") {
  TwinController ctl(sweep_config());
  std::int64_t last = -1;
  std::size_t frames = 0;
  ctl.set_frame_listener([&](const TickFrame& f) {
    REQUIRE(f.row != nullptr);
    REQUIRE(f.row->tick == last + 1);
    last = f.row->tick;
    ++frames;
  });
  ctl.run();
  CHECK(frames == ctl.log().rows.size());
}

TEST_CASE("online incident flags match an offline recomputation") {
  auto cfg = runtime_obstacle();
  cfg.hitl_mode = HitlMode::auto_approve;
  cfg.bounds.delta_q_m = 0.004;
  cfg.physical.clock_offset_ms = 1.5;
  cfg.bounds.delta_alpha_ms = 1.5;
  for (auto& ch : cfg.channels) {
    ch.latency_ms = 3.0;
    ch.jitter_ms = 2.0;
  }
  const RunLog log = run_scenario(cfg);
  const std::uint8_t mask = bit(IncidentKind::pose_deviation) | bit(IncidentKind::timing_deviation) |
                            bit(IncidentKind::obstacle_proximity);
  std::size_t flagged = 0;
  for (const auto& r : log.rows) {
    REQUIRE((r.incidents & mask) == oracle::offline_flags(r, cfg.bounds, cfg.obstacles));
    flagged += r.incidents != 0;
  }
  CHECK(flagged > 0);
}

TEST_CASE("unreachable or infeasible setups are config errors naming the field") {
  auto far = sweep_config();
  far.goal.target = at(3.0, 0.0, 0.3);
  try {
    TwinController ctl(far);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.field() == "/goal/target");
  }

  auto start_far = sweep_config();
  start_far.start = at(0.0, 0.0, 3.0);
  CHECK_THROWS_WITH_AS(TwinController{start_far}, doctest::Contains("/start"), ConfigError);

  auto blocked_goal = sweep_config();
  blocked_goal.goal.target = at(0.5, 0.0, 0.3);
  blocked_goal.obstacles = {central_box()};
  blocked_goal.obstacle_detection = ObstacleDetection::a_priori;
  CHECK_THROWS_WITH_AS(TwinController{blocked_goal}, doctest::Contains("/obstacles"), ConfigError);
}
