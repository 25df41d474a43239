#pragma once

#include "twinsync/runlog.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <string>

namespace twinsync {

enum class Axis { x, y, z, roll, pitch, yaw };

inline constexpr Axis kAllAxes[] = {Axis::x, Axis::y, Axis::z, Axis::roll, Axis::pitch, Axis::yaw};

std::string_view to_string(Axis a);

/// Mean over rows of |axis_r - axis_v|; angles use the wrapped difference.
/// Throws UndefinedMetric on an empty log.
double mae(const RunLog& log, Axis axis);

/// Threshold on per-row end-effector displacement that counts as motion (m).
inline constexpr double kMotionEpsilon = 1e-9;

/// Mean over commands seen by both twins of |onset_r - onset_v| * tick_ms.
/// A twin's onset for command c is the first row whose reported active
/// command is c and whose position moved more than kMotionEpsilon since the
/// previous row. Throws UndefinedMetric when no command has both onsets.
double actuation_delta(const RunLog& log);

struct MetricsReport {
  std::array<double, 6> mae{};
  std::optional<double> actuation_delta_ms;
  std::array<std::int64_t, 4> incident_ticks{};  ///< rows flagged, indexed by IncidentKind
  std::optional<double> min_clearance_m;
  TerminalState terminal = TerminalState::idle;
  std::int64_t ticks = 0;

  double mae_of(Axis a) const { return mae[static_cast<std::size_t>(a)]; }
  std::int64_t count(IncidentKind k) const { return incident_ticks[static_cast<std::size_t>(k)]; }
};

/// Everything here is derived from the row columns that survive the CSV
/// export, so read_csv(write_csv(log)) yields the identical report.
MetricsReport compute_metrics(const RunLog& log);

/// Versioned JSON document ("v": 1).
std::string to_json(const MetricsReport& report);

}  // namespace twinsync
