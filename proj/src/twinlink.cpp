#include "twinsync/twinlink.hpp"

#include <cmath>

namespace twinsync {

std::string_view to_string(LinkMode m) {
  return m == LinkMode::synchronous ? "synchronous" : "asynchronous";
}

void ChannelConfig::validate() const {
  if (!std::isfinite(latency_ms) || latency_ms < 0.0) {
    throw ContractError("channel latency must be >= 0");
  }
  if (!std::isfinite(jitter_ms) || jitter_ms < 0.0 || jitter_ms > latency_ms) {
    throw ContractError("channel jitter must lie in [0, latency]");
  }
  if (!std::isfinite(drop_prob) || drop_prob < 0.0 || drop_prob > 1.0) {
    throw ContractError("channel drop probability must lie in [0, 1]");
  }
}

RoundTrip sync_round_trip(DuplexLink& link, RobotTwin& robot, const CommandMsg& cmd,
                          double now_ms, double timeout_ms) {
  if (link.down.config().mode != LinkMode::synchronous) {
    throw ContractError("sync_round_trip requires a synchronous link");
  }
  const double tick = robot.config().tick_ms;
  link.down.send(cmd, now_ms);
  for (double t = now_ms;; t += tick) {
    for (const auto& c : link.down.deliver_due(t)) {
      try {
        robot.apply_command(c, t);
      } catch (const RejectedCommand&) {
        continue;
      }
      link.up.send(robot.snapshot(), t);
    }
    for (auto& s : link.up.deliver_due(t)) {
      if (s.ack_sequence >= cmd.sequence) return {std::move(s), t};
    }
    if (t - now_ms >= timeout_ms) {
      throw LinkTimeout("no acknowledgement for command seq " + std::to_string(cmd.sequence) +
                        " within " + std::to_string(timeout_ms) + " ms");
    }
    robot.step(tick);
  }
}

}  // namespace twinsync
