#pragma once

#include "twinsync/kinematics.hpp"
#include "twinsync/monitor.hpp"
#include "twinsync/robotsim.hpp"
#include "twinsync/trajectory.hpp"
#include "twinsync/twinlink.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace twinsync {

enum class HitlMode { gate, auto_approve };

/// a_priori: obstacles are known when the task is planned and the initial plan
/// already avoids them. runtime: the arm only learns about them through the
/// proximity monitor, which raises an anomaly.
enum class ObstacleDetection { a_priori, runtime };

std::string_view to_string(HitlMode m);
std::string_view to_string(ObstacleDetection d);

/// Index order of the four channels, also used to derive their seeds.
enum class ChannelIndex : std::size_t { cmd_physical = 0, cmd_virtual, state_physical, state_virtual };

inline constexpr std::string_view kChannelNames[] = {"cmd_physical", "cmd_virtual", "state_physical",
                                                     "state_virtual"};

struct ControlOptions {
  /// Next waypoint is commanded once both acquired poses are this close (m).
  double advance_radius_m = 0.02;
  double goal_tolerance_m = 1e-3;
  /// Extra lift and footprint growth on top of delta_b for avoidance plans (m).
  double avoidance_margin_m = 0.03;
  double link_timeout_ms = 250.0;
  double retransmit_ms = 50.0;
  double watchdog_factor = 10.0;
  IkOptions ik;
  /// Incident kinds that block the run and go through the gate.
  std::uint8_t gate_on = bit(IncidentKind::obstacle_proximity) | bit(IncidentKind::link_timeout);
};

struct ScenarioConfig {
  std::string name;
  std::uint64_t seed = 0;
  double tick_ms = 1.0;
  KinematicChain chain = panda_chain();
  std::optional<JointVector> initial_joints;
  std::optional<Pose> start;
  TrajectoryGoal goal;
  RobotConfig physical;
  RobotConfig virtual_twin;
  std::array<ChannelConfig, 4> channels{};
  Bounds bounds;
  std::vector<Obstacle> obstacles;
  ObstacleDetection obstacle_detection = ObstacleDetection::runtime;
  HitlMode hitl_mode = HitlMode::gate;
  std::int64_t max_ticks = 600000;
  ControlOptions control;

  ScenarioConfig();

  const ChannelConfig& channel(ChannelIndex i) const { return channels[static_cast<std::size_t>(i)]; }
  ChannelConfig& channel(ChannelIndex i) { return channels[static_cast<std::size_t>(i)]; }

  /// Throws ConfigError naming the offending field as a JSON pointer.
  void validate() const;
};

/// Seed actually fed to a channel generator; mixes the scenario seed, the
/// channel index and the channel's own seed.
std::uint64_t effective_channel_seed(std::uint64_t scenario_seed, ChannelIndex index,
                                     std::uint64_t channel_seed);

/// Parses and validates a JSON scenario document ("v": 1). Unknown keys are
/// errors. Syntax errors name "line N, column M"; semantic errors name the
/// field as a JSON pointer.
ScenarioConfig parse_scenario(std::string_view text);
ScenarioConfig load_scenario(const std::filesystem::path& path);

/// Replaces the seed when TWINSYNC_SEED is set. Throws ConfigError on a
/// malformed value.
void apply_seed_override(ScenarioConfig& config, const char* env_value);

/// Canonical JSON form of a config (all defaults spelled out).
std::string canonical_json(const ScenarioConfig& config);

/// FNV-1a 64 of the canonical JSON, as 16 hex digits.
std::string fingerprint(const ScenarioConfig& config);

}  // namespace twinsync
