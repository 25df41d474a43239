#include "twinsync/monitor.hpp"

#include "twinsync/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace twinsync {

void Bounds::validate() const {
  if (!(delta_q_m > 0.0) || !std::isfinite(delta_q_m)) throw ContractError("delta_q must be > 0");
  if (!(delta_alpha_ms > 0.0) || !std::isfinite(delta_alpha_ms)) {
    throw ContractError("delta_alpha must be > 0");
  }
  if (!(delta_b_m > 0.0) || !std::isfinite(delta_b_m)) throw ContractError("delta_b must be > 0");
  if (delta_orientation_rad && !(*delta_orientation_rad > 0.0)) {
    throw ContractError("orientation bound must be > 0");
  }
}

std::string_view to_string(IncidentKind k) {
  switch (k) {
    case IncidentKind::pose_deviation: return "pose-deviation";
    case IncidentKind::timing_deviation: return "timing-deviation";
    case IncidentKind::obstacle_proximity: return "obstacle-proximity";
    case IncidentKind::link_timeout: return "link-timeout";
  }
  return "unknown";
}

IncidentKind incident_kind_from_string(std::string_view s) {
  for (auto k : kAllIncidentKinds) {
    if (to_string(k) == s) return k;
  }
  throw CsvError("unknown incident kind '" + std::string(s) + "'");
}

double position_deviation(const Pose& pr, const Pose& pv) {
  const double dx = pr.x - pv.x, dy = pr.y - pv.y, dz = pr.z - pv.z;
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

double orientation_deviation(const Pose& pr, const Pose& pv) {
  return std::max({std::abs(wrap_angle(pr.roll - pv.roll)), std::abs(wrap_angle(pr.pitch - pv.pitch)),
                   std::abs(wrap_angle(pr.yaw - pv.yaw))});
}

std::optional<Incident> check_pose_deviation(const Pose& pr, const Pose& pv, double delta_q) {
  const double d = position_deviation(pr, pv);
  if (d < delta_q) return std::nullopt;
  Incident inc;
  inc.kind = IncidentKind::pose_deviation;
  inc.measured = d;
  inc.bound = delta_q;
  inc.unit = "m";
  return inc;
}

std::optional<Incident> check_orientation_deviation(const Pose& pr, const Pose& pv, double bound) {
  const double d = orientation_deviation(pr, pv);
  if (d < bound) return std::nullopt;
  Incident inc;
  inc.kind = IncidentKind::pose_deviation;
  inc.measured = d;
  inc.bound = bound;
  inc.unit = "rad";
  return inc;
}

std::optional<Incident> check_timing(double tsr_ms, double tsv_ms, double delta_alpha_ms) {
  const double d = std::abs(tsr_ms - tsv_ms);
  if (d < delta_alpha_ms) return std::nullopt;
  Incident inc;
  inc.kind = IncidentKind::timing_deviation;
  inc.measured = d;
  inc.bound = delta_alpha_ms;
  inc.unit = "ms";
  return inc;
}

std::optional<Incident> check_obstacle(const Pose& pr, const Pose& pv, const Obstacle& obs,
                                       double delta_b) {
  // The pseudocode reads "distance >= bound" but is followed by avoidance, so
  // it is implemented as a proximity trigger.
  const double c = std::min(clearance(pr, obs), clearance(pv, obs));
  if (c > delta_b) return std::nullopt;
  Incident inc;
  inc.kind = IncidentKind::obstacle_proximity;
  inc.measured = c;
  inc.bound = delta_b;
  inc.unit = "m";
  return inc;
}

std::optional<double> min_pair_clearance(const Pose& pr, const Pose& pv,
                                         std::span<const Obstacle> obstacles) {
  if (obstacles.empty()) return std::nullopt;
  double best = std::numeric_limits<double>::infinity();
  for (const auto& o : obstacles) best = std::min({best, clearance(pr, o), clearance(pv, o)});
  return best;
}

}  // namespace twinsync
