#pragma once

#include "twinsync/controller.hpp"
#include "twinsync/hitl.hpp"
#include "twinsync/metrics.hpp"

#include <nlohmann/json.hpp>

namespace twinsync::wire {

// Documents exchanged with the service; field names are fixed in
// docs/wire_schema.md. Every top-level document carries "v": 1.

inline constexpr int kVersion = 1;

nlohmann::json pose(const Pose& p);
nlohmann::json incident(const Incident& i);
nlohmann::json plan(const PendingPlan& p);
nlohmann::json metrics(const MetricsReport& m);

/// Stream document for one logged tick.
nlohmann::json frame(const TickFrame& f);
/// Stream document for a gate transition.
nlohmann::json gate_event(const GateEvent& e);

/// GET /api/state body. `latest` may be null before the first tick.
nlohmann::json state(TerminalState s, std::int64_t tick, const nlohmann::json& latest);

nlohmann::json error(int status, const std::string& message);

}  // namespace twinsync::wire
