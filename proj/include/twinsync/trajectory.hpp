#pragma once

#include "twinsync/kinematics.hpp"

#include <span>
#include <string_view>
#include <vector>

namespace twinsync {

/// User trajectory goal: where to end up and how far apart waypoints may be.
struct TrajectoryGoal {
  Pose target;
  double max_step = 0.01;
};

enum class PlanProvenance { direct, avoidance_replanned };

std::string_view to_string(PlanProvenance p);

struct WaypointPlan {
  std::vector<Pose> waypoints;
  PlanProvenance provenance = PlanProvenance::direct;
  double max_step = 0.01;
};

/// Axis-aligned box standing on the floor: footprint centred at (center_x,
/// center_y), extending from z = 0 to z = height.
struct Obstacle {
  double center_x = 0.0;
  double center_y = 0.0;
  double size_x = 0.0;
  double size_y = 0.0;
  double height = 0.0;

  /// Throws ContractError unless sizes > 0 and height >= 0 (all finite).
  void validate() const;
  /// True if (x, y) lies in the footprint grown by `margin` on every side.
  bool footprint_contains(double x, double y, double margin) const;
};

/// Straight-line position interpolation with uniform spacing <= max_step;
/// orientation follows the shortest wrapped arc per axis. Both endpoints are
/// reproduced exactly.
WaypointPlan plan_waypoints(const Pose& start, const TrajectoryGoal& goal);

/// Euclidean distance from the pose position to the closest point of the box
/// (0 inside or on the surface).
double clearance(const Pose& p, const Obstacle& obs);

/// Minimum clearance over all waypoints. Throws ContractError on an empty plan.
double min_clearance(const WaypointPlan& plan, const Obstacle& obs);

/// Lift-over avoidance. Waypoints whose X-Y falls inside the footprint grown by
/// `delta_b` are raised to at least height + delta_b; vertical ramps at the
/// neighbouring outside waypoints keep spacing within the plan's max step.
/// Throws ReplanInfeasible when the first or last waypoint would need lifting.
WaypointPlan replan_avoid(const WaypointPlan& plan, const Obstacle& obs, double delta_b);

/// Applies replan_avoid for each obstacle in order.
WaypointPlan replan_avoid_all(const WaypointPlan& plan, std::span<const Obstacle> obstacles,
                              double delta_b);

}  // namespace twinsync
