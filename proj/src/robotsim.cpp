#include "twinsync/robotsim.hpp"

#include "twinsync/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace twinsync {

std::string_view to_string(TwinId id) {
  return id == TwinId::physical ? "physical" : "virtual";
}

void RobotConfig::validate() const {
  if (!std::isfinite(gain) || !(gain > 0.0)) throw ContractError("robot gain must be > 0");
  if (!std::isfinite(tick_ms) || !(tick_ms > 0.0)) throw ContractError("robot tick must be > 0");
  if (!std::isfinite(actuation_latency_ms) || actuation_latency_ms < 0.0) {
    throw ContractError("actuation latency must be >= 0");
  }
  if (!std::isfinite(clock_offset_ms) || !std::isfinite(clock_drift_ppm)) {
    throw ContractError("clock parameters must be finite");
  }
  if (gain * tick_ms / 1000.0 >= 1.0) {
    throw ContractError("gain * tick must stay below 1 for a stable first-order lag");
  }
}

RobotTwin::RobotTwin(TwinId id, RobotConfig config, JointVector initial)
    : id_(id), config_(std::move(config)), q_(std::move(initial)) {
  config_.validate();
  if (!config_.chain.within_limits(q_)) {
    throw ContractError("initial joints outside limits or wrong dimension");
  }
  target_ = q_;
}

void RobotTwin::apply_command(const CommandMsg& cmd, double now_ms) {
  if (!config_.chain.within_limits(cmd.target_joints)) {
    ++rejected_;
    throw RejectedCommand(std::string(to_string(id_)) + " twin rejected command seq " +
                          std::to_string(cmd.sequence) + ": target outside joint limits");
  }
  ack_sequence_ = std::max(ack_sequence_, cmd.sequence);
  queue_.push_back({now_ms + config_.actuation_latency_ms, cmd});
  // Latency 0 takes effect at once.
  activate_due(std::max(now_ms, sim_time_ms_));
}

void RobotTwin::activate_due(double now_ms) {
  const CommandMsg* winner = nullptr;
  std::deque<Queued> keep;
  std::deque<Queued> due;
  for (auto& q : queue_) {
    (q.activate_at_ms <= now_ms ? due : keep).push_back(std::move(q));
  }
  for (const auto& d : due) {
    if (d.cmd.sequence > active_sequence_ && (!winner || d.cmd.sequence > winner->sequence)) {
      winner = &d.cmd;
    }
  }
  if (winner) {
    target_ = winner->target_joints;
    active_sequence_ = winner->sequence;
    active_command_ = winner->command_id;
  }
  queue_ = std::move(keep);
}

void RobotTwin::step(double dt_ms) {
  if (std::abs(dt_ms - config_.tick_ms) > 1e-12) {
    throw ContractError("step: dt " + std::to_string(dt_ms) + " ms differs from configured tick " +
                        std::to_string(config_.tick_ms) + " ms");
  }
  // Commands due at the start of the interval drive it, so a snapshot's
  // active_command is always the one that produced its latest motion.
  activate_due(sim_time_ms_);
  const double alpha = config_.gain * dt_ms / 1000.0;
  q_ += alpha * (target_ - q_);
  sim_time_ms_ += dt_ms;
}

TwinState RobotTwin::snapshot() const {
  TwinState s;
  s.pose = forward_kinematics(config_.chain, q_);
  s.joints = q_;
  s.timestamp_ms = sim_time_ms_ * (1.0 + config_.clock_drift_ppm * 1e-6) + config_.clock_offset_ms;
  s.twin = id_;
  s.active_command = active_command_;
  s.ack_sequence = ack_sequence_;
  return s;
}

}  // namespace twinsync
