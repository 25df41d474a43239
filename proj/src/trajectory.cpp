#include "twinsync/trajectory.hpp"

#include "twinsync/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace twinsync {

namespace {

// Guards ceil() against quotients like 80.00000000000001.
constexpr double kDivisionSlack = 1e-9;

int segments_for(double distance, double max_step) {
  return std::max(1, static_cast<int>(std::ceil(distance / max_step - kDivisionSlack)));
}

bool finite_pose(const Pose& p) {
  return std::isfinite(p.x) && std::isfinite(p.y) && std::isfinite(p.z) && std::isfinite(p.roll) &&
         std::isfinite(p.pitch) && std::isfinite(p.yaw);
}

double lerp_angle(double from, double to, double s) {
  return wrap_angle(from + s * wrap_angle(to - from));
}

void append_vertical_ramp(std::vector<Pose>& out, const Pose& at, double z_from, double z_to,
                          double max_step, bool include_first) {
  const int m = segments_for(std::abs(z_to - z_from), max_step);
  for (int k = include_first ? 0 : 1; k <= m; ++k) {
    Pose p = at;
    p.z = k == m ? z_to : z_from + (z_to - z_from) * (static_cast<double>(k) / m);
    out.push_back(p);
  }
}

}  // namespace

std::string_view to_string(PlanProvenance p) {
  return p == PlanProvenance::direct ? "direct" : "avoidance-replanned";
}

void Obstacle::validate() const {
  if (!std::isfinite(center_x) || !std::isfinite(center_y) || !std::isfinite(size_x) ||
      !std::isfinite(size_y) || !std::isfinite(height)) {
    throw ContractError("obstacle has a non-finite field");
  }
  if (!(size_x > 0.0) || !(size_y > 0.0)) throw ContractError("obstacle sizes must be > 0");
  if (height < 0.0) throw ContractError("obstacle height must be >= 0");
}

bool Obstacle::footprint_contains(double x, double y, double margin) const {
  return std::abs(x - center_x) <= size_x / 2 + margin &&
         std::abs(y - center_y) <= size_y / 2 + margin;
}

WaypointPlan plan_waypoints(const Pose& start, const TrajectoryGoal& goal) {
  if (!finite_pose(start) || !finite_pose(goal.target)) {
    throw DomainError("plan_waypoints: non-finite pose");
  }
  if (!(goal.max_step > 0.0)) throw ContractError("plan_waypoints: max_step must be > 0");

  WaypointPlan plan;
  plan.max_step = goal.max_step;
  const Eigen::Vector3d a = start.position();
  const Eigen::Vector3d b = goal.target.position();
  const double dist = (b - a).norm();
  if (dist == 0.0) {
    plan.waypoints.push_back(goal.target);
    return plan;
  }
  const int n = segments_for(dist, goal.max_step);
  plan.waypoints.reserve(static_cast<std::size_t>(n) + 1);
  plan.waypoints.push_back(start);
  for (int k = 1; k < n; ++k) {
    const double s = static_cast<double>(k) / n;
    Pose p;
    p.x = a.x() + (b.x() - a.x()) * s;
    p.y = a.y() + (b.y() - a.y()) * s;
    p.z = a.z() + (b.z() - a.z()) * s;
    p.roll = lerp_angle(start.roll, goal.target.roll, s);
    p.pitch = lerp_angle(start.pitch, goal.target.pitch, s);
    p.yaw = lerp_angle(start.yaw, goal.target.yaw, s);
    plan.waypoints.push_back(p);
  }
  plan.waypoints.push_back(goal.target);
  return plan;
}

double clearance(const Pose& p, const Obstacle& obs) {
  const double hx = obs.size_x / 2, hy = obs.size_y / 2;
  const double dx = std::max({obs.center_x - hx - p.x, 0.0, p.x - (obs.center_x + hx)});
  const double dy = std::max({obs.center_y - hy - p.y, 0.0, p.y - (obs.center_y + hy)});
  const double dz = std::max({0.0 - p.z, 0.0, p.z - obs.height});
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

double min_clearance(const WaypointPlan& plan, const Obstacle& obs) {
  if (plan.waypoints.empty()) throw ContractError("min_clearance: empty plan");
  double best = std::numeric_limits<double>::infinity();
  for (const auto& w : plan.waypoints) best = std::min(best, clearance(w, obs));
  return best;
}

WaypointPlan replan_avoid(const WaypointPlan& plan, const Obstacle& obs, double delta_b) {
  if (!(delta_b > 0.0)) throw ContractError("replan_avoid: delta_b must be > 0");
  if (plan.waypoints.empty()) throw ContractError("replan_avoid: empty plan");
  obs.validate();

  const auto& in = plan.waypoints;
  const std::size_t n = in.size();
  // Smallest lift whose clearance, as clearance() rounds it, still reaches delta_b.
  double lift_z = obs.height + delta_b;
  Pose above;
  above.x = obs.center_x;
  above.y = obs.center_y;
  above.z = lift_z;
  while (clearance(above, obs) < delta_b) {
    lift_z = std::nextafter(lift_z, std::numeric_limits<double>::infinity());
    above.z = lift_z;
  }

  // The square test alone can leave an edge waypoint an ulp short of delta_b;
  // the floor-level clearance check catches those.
  std::vector<bool> inside(n);
  for (std::size_t i = 0; i < n; ++i) {
    Pose floor = in[i];
    floor.z = 0.0;
    inside[i] = obs.footprint_contains(in[i].x, in[i].y, delta_b) || clearance(floor, obs) < delta_b;
  }

  WaypointPlan out;
  out.max_step = plan.max_step;
  out.provenance = PlanProvenance::avoidance_replanned;
  out.waypoints.reserve(n);

  std::size_t i = 0;
  while (i < n) {
    if (!inside[i]) {
      out.waypoints.push_back(in[i]);
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j + 1 < n && inside[j + 1]) ++j;

    const bool first_lifted = in[i].z < lift_z;
    const bool last_lifted = in[j].z < lift_z;
    if (first_lifted && i == 0) {
      throw ReplanInfeasible("replan_avoid: plan starts inside the clearance zone below z=" +
                             std::to_string(lift_z));
    }
    if (last_lifted && j == n - 1) {
      throw ReplanInfeasible("replan_avoid: goal lies inside the clearance zone below z=" +
                             std::to_string(lift_z));
    }
    if (first_lifted) {
      // out.back() is in[i-1], outside the grown footprint.
      const Pose before = out.waypoints.back();
      append_vertical_ramp(out.waypoints, before, before.z, lift_z, plan.max_step, false);
    }
    for (std::size_t k = i; k <= j; ++k) {
      Pose p = in[k];
      p.z = std::max(p.z, lift_z);
      out.waypoints.push_back(p);
    }
    if (last_lifted) {
      const Pose& after = in[j + 1];
      append_vertical_ramp(out.waypoints, after, lift_z, after.z, plan.max_step, true);
      i = j + 2;  // in[j+1] is the ramp's last point
    } else {
      i = j + 1;
    }
  }
  return out;
}

WaypointPlan replan_avoid_all(const WaypointPlan& plan, std::span<const Obstacle> obstacles,
                              double delta_b) {
  WaypointPlan out = plan;
  for (const auto& obs : obstacles) out = replan_avoid(out, obs, delta_b);
  if (!obstacles.empty()) out.provenance = PlanProvenance::avoidance_replanned;
  return out;
}

}  // namespace twinsync
