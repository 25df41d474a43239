#pragma once

#include "twinsync/hitl.hpp"
#include "twinsync/runlog.hpp"
#include "twinsync/scenario_config.hpp"
#include "twinsync/twinlink.hpp"

#include <array>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace twinsync {

/// A scripted operator decision, applied when its plan awaits a decision.
struct ScriptedDecision {
  std::string plan_id;
  Verdict verdict = Verdict::approve;
  std::string actor;
};

/// Published after every logged tick.
struct TickFrame {
  const LogRow* row = nullptr;
  TerminalState state = TerminalState::running;
  std::size_t waypoint_index = 0;
  std::size_t waypoint_count = 0;
};

/// The bi-directional control loop. Each tick n (simulated time n * tick):
///   1. both twins integrate one step and report their state upstream;
///   2. the controller takes whatever reports have arrived, runs the pose,
///      timing, obstacle and link checks, and appends row n;
///   3. unless blocked, it retransmits unacknowledged commands and, once both
///      twins are near the current waypoint, commands the next one to both;
///   4. the twins take delivery of due commands.
/// A gated anomaly blocks the loop: simulated time stops until the pending
/// plan is decided, and an approved plan is deployed within the same tick.
class TwinController {
 public:
  using FrameListener = std::function<void(const TickFrame&)>;

  explicit TwinController(ScenarioConfig config);

  void set_frame_listener(FrameListener l) { frame_listener_ = std::move(l); }
  void set_gate_listener(HitlGate::Listener l) { gate_.set_listener(std::move(l)); }

  /// Advances one tick. While blocked, deploys an approved plan if there is
  /// one and otherwise does nothing. Returns false when no progress is
  /// possible (terminal, or blocked awaiting a decision).
  bool step();

  /// Records an operator decision on the plan currently awaiting one. Throws
  /// NotFound / Conflict as HitlGate::decide.
  const PendingPlan& decide(const std::string& plan_id, Verdict verdict, const std::string& actor);

  /// Steps until terminal or blocked with no applicable scripted decision.
  TerminalState run(const std::vector<ScriptedDecision>& script = {});

  TerminalState state() const noexcept { return state_; }
  bool blocked() const noexcept { return state_ == TerminalState::blocked; }
  std::int64_t tick() const noexcept { return tick_; }
  const RunLog& log() const noexcept { return log_; }
  const HitlGate& gate() const noexcept { return gate_; }
  const ScenarioConfig& config() const noexcept { return config_; }
  const WaypointPlan& plan() const noexcept { return plan_; }
  std::size_t waypoint_index() const noexcept { return index_; }
  const RobotTwin& robot(TwinId id) const { return *robots_[slot(id)]; }
  const DuplexLink& link(TwinId id) const { return *links_[slot(id)]; }
  std::int64_t watchdog_tick() const noexcept { return watchdog_tick_; }
  /// Id of the plan the run is blocked on; empty while running.
  const std::string& blocking_plan() const noexcept { return blocking_plan_; }

 private:
  static std::size_t slot(TwinId id) { return id == TwinId::physical ? 0 : 1; }

  struct Outstanding {
    std::uint64_t sequence = 0;  ///< latest sequence sent for the current command
    std::uint64_t command_id = 0;
    double first_sent_ms = 0.0;
    double last_sent_ms = 0.0;
    bool timed_out = false;
  };

  void acquire_initial();
  void acquire(double now_ms);
  void monitor_and_log(double now_ms);
  void command_phase(double now_ms);
  void deliver_commands(double now_ms);
  void send_command(std::size_t twin, std::uint64_t command_id, double now_ms, bool retransmit);
  bool acked(std::size_t twin) const;
  void handle_anomaly(const Incident& incident);
  bool try_deploy();
  WaypointPlan remaining_plan() const;
  std::int64_t nominal_ticks(const WaypointPlan& plan) const;
  void set_plan(WaypointPlan plan, std::vector<JointVector> joints);
  void publish();
  std::uint64_t next_order() { return order_++; }
  double now() const { return static_cast<double>(tick_) * config_.tick_ms; }

  ScenarioConfig config_;
  std::array<std::unique_ptr<RobotTwin>, 2> robots_;
  std::array<std::unique_ptr<DuplexLink>, 2> links_;
  std::array<std::optional<TwinState>, 2> acquired_;
  std::array<std::uint64_t, 2> acked_{};
  std::array<std::uint64_t, 2> next_sequence_{1, 1};
  std::array<std::optional<Outstanding>, 2> outstanding_;

  WaypointPlan plan_;
  std::vector<JointVector> plan_joints_;
  std::size_t index_ = 0;
  std::optional<std::size_t> commanded_index_;
  std::uint64_t next_command_id_ = 1;

  HitlGate gate_;
  RunLog log_;
  TerminalState state_ = TerminalState::idle;
  std::int64_t tick_ = 0;
  std::int64_t watchdog_tick_ = 0;
  std::uint64_t order_ = 0;
  std::string blocking_plan_;
  FrameListener frame_listener_;
};

/// Runs a scenario to a terminal state (or a block with no scripted answer).
/// Auto-approve mode is taken from the config.
RunLog run_scenario(const ScenarioConfig& config, const std::vector<ScriptedDecision>& script = {});

}  // namespace twinsync
