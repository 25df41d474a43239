#include "twinsync/wire.hpp"

namespace twinsync::wire {

using nlohmann::json;

namespace {

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(); }

json incident_names(std::uint8_t mask) {
  json a = json::array();
  for (auto k : kAllIncidentKinds) {
    if (mask & bit(k)) a.push_back(std::string(to_string(k)));
  }
  return a;
}

json twin(const TwinState& s) {
  return {{"ts_ms", s.timestamp_ms}, {"pose", pose(s.pose)}, {"command_id", s.active_command}};
}

}  // namespace

json pose(const Pose& p) {
  return {{"x", p.x}, {"y", p.y}, {"z", p.z}, {"roll", p.roll}, {"pitch", p.pitch}, {"yaw", p.yaw}};
}

json incident(const Incident& i) {
  return {{"kind", std::string(to_string(i.kind))},
          {"tick", i.tick},
          {"measured", i.measured},
          {"bound", i.bound},
          {"unit", i.unit}};
}

json plan(const PendingPlan& p) {
  json wps = json::array();
  for (const auto& w : p.candidate.waypoints) wps.push_back({w.x, w.y, w.z});
  json j = {{"id", p.id},
            {"status", std::string(to_string(p.status))},
            {"raised_tick", p.raised_tick},
            {"trigger", incident(p.trigger)},
            {"candidate",
             {{"provenance", std::string(to_string(p.candidate.provenance))}, {"waypoints", wps}}},
            {"rehearsal", nullptr},
            {"decision", nullptr}};
  if (!p.infeasible_reason.empty()) j["infeasible_reason"] = p.infeasible_reason;
  if (p.rehearsal) {
    const auto& r = *p.rehearsal;
    j["rehearsal"] = {{"completed", r.completed},
                      {"min_clearance_m", optional_number(r.min_clearance_m)},
                      {"max_pose_deviation_m", r.max_pose_deviation_m},
                      {"ticks", r.ticks},
                      {"log_ref", r.log_ref}};
  }
  if (p.decision) {
    const auto& d = *p.decision;
    j["decision"] = {{"verdict", std::string(to_string(d.verdict))},
                     {"actor", d.actor},
                     {"time_ms", d.time_ms},
                     {"override", d.override_flag}};
  }
  return j;
}

json metrics(const MetricsReport& m) { return json::parse(to_json(m)); }

json frame(const TickFrame& f) {
  const LogRow& r = *f.row;
  return {{"v", kVersion},
          {"type", "frame"},
          {"tick", r.tick},
          {"state", std::string(to_string(f.state))},
          {"physical", twin(r.physical)},
          {"virtual", twin(r.virtual_twin)},
          {"dev_pos_m", r.dev_pos_m},
          {"dev_ts_ms", r.dev_ts_ms},
          {"clearance_min_m", optional_number(r.clearance_min_m)},
          {"incidents", incident_names(r.incidents)},
          {"waypoint", {{"index", f.waypoint_index}, {"count", f.waypoint_count}}}};
}

json gate_event(const GateEvent& e) {
  return {{"v", kVersion}, {"type", e.type}, {"plan", plan(e.plan)}};
}

json state(TerminalState s, std::int64_t tick, const json& latest) {
  return {{"v", kVersion}, {"terminal_state", std::string(to_string(s))}, {"tick", tick}, {"latest", latest}};
}

json error(int status, const std::string& message) {
  return {{"v", kVersion}, {"status", status}, {"error", message}};
}

}  // namespace twinsync::wire
