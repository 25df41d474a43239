#pragma once

#include "twinsync/kinematics.hpp"

#include <cstdint>
#include <deque>
#include <string_view>

namespace twinsync {

enum class TwinId { physical, virtual_twin };

std::string_view to_string(TwinId id);

struct RobotConfig {
  KinematicChain chain = panda_chain();
  double gain = 10.0;  ///< first-order tracking gain, 1/s
  double clock_offset_ms = 0.0;
  /// Optional clock drift; local clock = sim_time * (1 + drift_ppm * 1e-6) + offset.
  double clock_drift_ppm = 0.0;
  double tick_ms = 1.0;
  double actuation_latency_ms = 0.0;

  /// Throws ContractError on gain <= 0, tick <= 0, latency < 0 or non-finite values.
  void validate() const;
};

/// One twin's report: pose P, joints K, timestamp TS. `active_command` is the
/// controller command id currently driving the plant, `ack_sequence` the
/// highest command sequence received so far (0 = none).
struct TwinState {
  Pose pose;
  JointVector joints;
  double timestamp_ms = 0.0;
  TwinId twin = TwinId::physical;
  std::uint64_t active_command = 0;
  std::uint64_t ack_sequence = 0;
};

struct CommandMsg {
  JointVector target_joints;
  double issue_time_ms = 0.0;
  /// Strictly increasing per sender channel.
  std::uint64_t sequence = 0;
  /// Shared by the commands the controller fires at both twins for the same
  /// waypoint; retransmissions keep it.
  std::uint64_t command_id = 0;
};

/// Simulated arm: per-joint first-order lag toward the active target, fed by a
/// fixed actuation delay line.
class RobotTwin {
 public:
  RobotTwin(TwinId id, RobotConfig config, JointVector initial);

  /// Queues the command to take effect at now + actuation_latency. Throws
  /// RejectedCommand (and counts it) for out-of-limit targets; the robot holds.
  void apply_command(const CommandMsg& cmd, double now_ms);

  /// One Euler step of q += gain * dt * (target - q). dt must equal the tick.
  void step(double dt_ms);

  TwinState snapshot() const;

  TwinId id() const noexcept { return id_; }
  const RobotConfig& config() const noexcept { return config_; }
  const JointVector& joints() const noexcept { return q_; }
  const JointVector& target() const noexcept { return target_; }
  double sim_time_ms() const noexcept { return sim_time_ms_; }
  std::uint64_t active_command() const noexcept { return active_command_; }
  std::uint64_t active_sequence() const noexcept { return active_sequence_; }
  std::uint64_t rejected_count() const noexcept { return rejected_; }
  std::size_t queued() const noexcept { return queue_.size(); }

 private:
  struct Queued {
    double activate_at_ms;
    CommandMsg cmd;
  };
  void activate_due(double now_ms);

  TwinId id_;
  RobotConfig config_;
  JointVector q_;
  JointVector target_;
  double sim_time_ms_ = 0.0;
  std::deque<Queued> queue_;
  std::uint64_t active_sequence_ = 0;
  std::uint64_t active_command_ = 0;
  std::uint64_t ack_sequence_ = 0;
  std::uint64_t rejected_ = 0;
};

}  // namespace twinsync
