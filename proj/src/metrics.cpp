#include "twinsync/metrics.hpp"

#include "twinsync/errors.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <map>

namespace twinsync {

namespace {

double axis_value(const Pose& p, Axis a) {
  switch (a) {
    case Axis::x: return p.x;
    case Axis::y: return p.y;
    case Axis::z: return p.z;
    case Axis::roll: return p.roll;
    case Axis::pitch: return p.pitch;
    case Axis::yaw: return p.yaw;
  }
  return 0.0;
}

bool rotational(Axis a) { return a == Axis::roll || a == Axis::pitch || a == Axis::yaw; }

// command id -> tick of the first row in which that command moved the twin.
std::map<std::uint64_t, std::int64_t> onsets(const RunLog& log, TwinId twin) {
  std::map<std::uint64_t, std::int64_t> out;
  for (std::size_t i = 1; i < log.rows.size(); ++i) {
    const auto& cur = twin == TwinId::physical ? log.rows[i].physical : log.rows[i].virtual_twin;
    const auto& prev =
        twin == TwinId::physical ? log.rows[i - 1].physical : log.rows[i - 1].virtual_twin;
    if (cur.active_command == 0 || out.contains(cur.active_command)) continue;
    if ((cur.pose.position() - prev.pose.position()).norm() > kMotionEpsilon) {
      out.emplace(cur.active_command, log.rows[i].tick);
    }
  }
  return out;
}

}  // namespace

std::string_view to_string(Axis a) {
  switch (a) {
    case Axis::x: return "x";
    case Axis::y: return "y";
    case Axis::z: return "z";
    case Axis::roll: return "roll";
    case Axis::pitch: return "pitch";
    case Axis::yaw: return "yaw";
  }
  return "?";
}

double mae(const RunLog& log, Axis axis) {
  if (log.rows.empty()) throw UndefinedMetric("mae: empty log");
  double sum = 0.0;
  for (const auto& r : log.rows) {
    const double a = axis_value(r.physical.pose, axis);
    const double b = axis_value(r.virtual_twin.pose, axis);
    sum += rotational(axis) ? std::abs(wrap_angle(a - b)) : std::abs(a - b);
  }
  return sum / static_cast<double>(log.rows.size());
}

double actuation_delta(const RunLog& log) {
  const auto r = onsets(log, TwinId::physical);
  const auto v = onsets(log, TwinId::virtual_twin);
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& [id, tick_r] : r) {
    const auto it = v.find(id);
    if (it == v.end()) continue;
    sum += static_cast<double>(std::llabs(tick_r - it->second));
    ++n;
  }
  if (n == 0) throw UndefinedMetric("actuation_delta: no command moved both twins");
  return sum / static_cast<double>(n) * log.tick_ms;
}

MetricsReport compute_metrics(const RunLog& log) {
  if (log.rows.empty()) throw UndefinedMetric("metrics: empty log");
  MetricsReport m;
  for (auto a : kAllAxes) m.mae[static_cast<std::size_t>(a)] = mae(log, a);
  try {
    m.actuation_delta_ms = actuation_delta(log);
  } catch (const UndefinedMetric&) {
    m.actuation_delta_ms.reset();
  }
  for (const auto& r : log.rows) {
    for (auto k : kAllIncidentKinds) {
      if (r.incidents & bit(k)) ++m.incident_ticks[static_cast<std::size_t>(k)];
    }
    if (r.clearance_min_m) {
      m.min_clearance_m = std::min(m.min_clearance_m.value_or(*r.clearance_min_m), *r.clearance_min_m);
    }
  }
  m.terminal = log.terminal;
  m.ticks = static_cast<std::int64_t>(log.rows.size());
  return m;
}

std::string to_json(const MetricsReport& report) {
  nlohmann::ordered_json j;
  j["v"] = 1;
  nlohmann::ordered_json mae;
  for (auto a : kAllAxes) mae[std::string(to_string(a))] = report.mae_of(a);
  j["mae"] = mae;
  j["actuation_delta_ms"] =
      report.actuation_delta_ms ? nlohmann::ordered_json(*report.actuation_delta_ms) : nlohmann::ordered_json();
  nlohmann::ordered_json counts;
  for (auto k : kAllIncidentKinds) counts[std::string(to_string(k))] = report.count(k);
  j["incident_ticks"] = counts;
  j["min_clearance_m"] =
      report.min_clearance_m ? nlohmann::ordered_json(*report.min_clearance_m) : nlohmann::ordered_json();
  j["terminal_state"] = std::string(to_string(report.terminal));
  j["ticks"] = report.ticks;
  return j.dump(2);
}

}  // namespace twinsync
