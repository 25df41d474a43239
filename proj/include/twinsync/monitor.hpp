#pragma once

#include "twinsync/robotsim.hpp"
#include "twinsync/trajectory.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>

namespace twinsync {

/// Safety thresholds checked every tick.
struct Bounds {
  double delta_q_m = 0.1;        ///< pose (position) deviation
  double delta_alpha_ms = 20.0;  ///< timestamp deviation
  double delta_b_m = 0.05;       ///< obstacle clearance
  /// Optional orientation deviation bound (rad), off when unset.
  std::optional<double> delta_orientation_rad;

  void validate() const;
};

enum class IncidentKind : std::uint8_t {
  pose_deviation = 0,
  timing_deviation = 1,
  obstacle_proximity = 2,
  link_timeout = 3,
};

inline constexpr IncidentKind kAllIncidentKinds[] = {
    IncidentKind::pose_deviation, IncidentKind::timing_deviation,
    IncidentKind::obstacle_proximity, IncidentKind::link_timeout};

std::string_view to_string(IncidentKind k);
/// Throws CsvError on unknown names.
IncidentKind incident_kind_from_string(std::string_view s);

constexpr std::uint8_t bit(IncidentKind k) { return static_cast<std::uint8_t>(1u << static_cast<int>(k)); }

struct Incident {
  IncidentKind kind = IncidentKind::pose_deviation;
  std::int64_t tick = 0;
  double measured = 0.0;
  double bound = 0.0;
  std::string unit;
  TwinState physical;
  TwinState virtual_twin;
};

/// Euclidean distance between the two positions.
double position_deviation(const Pose& pr, const Pose& pv);
/// Largest wrapped roll/pitch/yaw difference.
double orientation_deviation(const Pose& pr, const Pose& pv);

/// Incident iff the position distance >= delta_q (inclusive).
std::optional<Incident> check_pose_deviation(const Pose& pr, const Pose& pv, double delta_q);
/// Incident iff the orientation deviation >= bound; reported as pose-deviation in rad.
std::optional<Incident> check_orientation_deviation(const Pose& pr, const Pose& pv, double bound);
/// Incident iff |tsr - tsv| >= delta_alpha.
std::optional<Incident> check_timing(double tsr_ms, double tsv_ms, double delta_alpha_ms);
/// Proximity trigger: incident iff min(clearance(pr), clearance(pv)) <= delta_b.
std::optional<Incident> check_obstacle(const Pose& pr, const Pose& pv, const Obstacle& obs,
                                       double delta_b);

/// Smallest clearance of either pose to any obstacle; nullopt without obstacles.
std::optional<double> min_pair_clearance(const Pose& pr, const Pose& pv,
                                         std::span<const Obstacle> obstacles);

}  // namespace twinsync
