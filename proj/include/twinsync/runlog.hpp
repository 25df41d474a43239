#pragma once

#include "twinsync/monitor.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace twinsync {

enum class TerminalState { idle, running, blocked, completed, watchdog_timeout };

std::string_view to_string(TerminalState s);
TerminalState terminal_state_from_string(std::string_view s);

/// One control-loop tick as seen by the controller (acquired, possibly
/// delayed, twin states).
struct LogRow {
  std::int64_t tick = 0;
  TwinState physical;
  TwinState virtual_twin;
  double dev_pos_m = 0.0;
  double dev_ts_ms = 0.0;
  std::optional<double> clearance_min_m;
  std::uint8_t incidents = 0;  ///< bit(IncidentKind) mask
};

enum class CommandEvent { sent, applied, rejected };

std::string_view to_string(CommandEvent e);

/// Command traffic. `order` is shared with AuditEntry and increases with
/// every record, so events within one tick can be sequenced.
struct CommandRecord {
  std::int64_t tick = 0;
  std::uint64_t order = 0;
  TwinId twin = TwinId::physical;
  CommandEvent event = CommandEvent::sent;
  std::uint64_t sequence = 0;
  std::uint64_t command_id = 0;
};

/// HITL audit trail entry; `detail` holds a JSON object.
struct AuditEntry {
  std::int64_t tick = 0;
  std::uint64_t order = 0;
  std::string event;
  std::string plan_id;
  std::string detail = "{}";
};

struct RunLog {
  std::vector<LogRow> rows;
  std::vector<Incident> incidents;
  std::vector<CommandRecord> commands;
  std::vector<AuditEntry> audit;
  TerminalState terminal = TerminalState::idle;
  double tick_ms = 1.0;
  std::string config_fingerprint;
};

/// Column contract of the CSV export, in order.
inline constexpr std::string_view kCsvColumns[] = {
    "tick",     "ts_r_ms",  "ts_v_ms",  "pr_x",      "pr_y",      "pr_z",
    "pr_roll",  "pr_pitch", "pr_yaw",   "pv_x",      "pv_y",      "pv_z",
    "pv_roll",  "pv_pitch", "pv_yaw",   "dev_pos_m", "dev_ts_ms", "clearance_min_m",
    "incident_kind", "cmd_r", "cmd_v"};

/// Shortest text that parses back to the identical double.
std::string format_double(double v);

/// Header row, one row per tick, then `#`-prefixed metadata and audit lines.
void write_csv(const RunLog& log, std::ostream& out);
std::string to_csv(const RunLog& log);

/// Parses what write_csv produces. Rows carry poses, timestamps and active
/// command ids only (no joints). Throws CsvError naming the offending line.
RunLog read_csv(std::istream& in);

}  // namespace twinsync
