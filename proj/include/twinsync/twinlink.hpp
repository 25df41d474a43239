#pragma once

#include "twinsync/errors.hpp"
#include "twinsync/robotsim.hpp"

#include <algorithm>
#include <cstdint>
#include <deque>
#include <limits>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace twinsync {

enum class LinkMode { synchronous, asynchronous };

std::string_view to_string(LinkMode m);

struct ChannelConfig {
  double latency_ms = 0.0;
  double jitter_ms = 0.0;  ///< half-width of the uniform jitter
  double drop_prob = 0.0;  ///< 1.0 models a severed link
  LinkMode mode = LinkMode::synchronous;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Uniform double in [0, 1) from the top 53 bits; identical on every platform.
inline double unit_uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

template <class Payload>
struct InFlightMsg {
  Payload payload;
  double send_time_ms = 0.0;
  double due_time_ms = 0.0;
  bool dropped = false;
};

struct ChannelCounters {
  std::uint64_t sent = 0;
  std::uint64_t delivered = 0;
  std::uint64_t dropped = 0;
};

/// One direction of a simulated link: seeded latency, jitter and loss, FIFO.
template <class Payload>
class Channel {
 public:
  explicit Channel(ChannelConfig config) : config_(config), rng_(config.seed) {
    config_.validate();
  }

  /// Every send draws exactly two numbers (jitter, loss) so the schedule only
  /// depends on the seed and the number of sends.
  void send(Payload payload, double now_ms) {
    if (now_ms < last_send_ms_) {
      throw ContractError("channel send time went backwards");
    }
    last_send_ms_ = now_ms;
    const double jitter = (2.0 * unit_uniform(rng_) - 1.0) * config_.jitter_ms;
    const bool dropped = unit_uniform(rng_) < config_.drop_prob;
    double due = now_ms + config_.latency_ms + jitter;
    due = std::max({due, now_ms, last_due_ms_});
    last_due_ms_ = due;
    ++counters_.sent;
    in_flight_.push_back({std::move(payload), now_ms, due, dropped});
  }

  /// Non-dropped messages with due_time <= now, in due-time order.
  std::vector<Payload> deliver_due(double now_ms) {
    std::vector<Payload> out;
    while (!in_flight_.empty() && in_flight_.front().due_time_ms <= now_ms) {
      auto msg = std::move(in_flight_.front());
      in_flight_.pop_front();
      if (msg.dropped) {
        ++counters_.dropped;
      } else {
        ++counters_.delivered;
        out.push_back(std::move(msg.payload));
      }
    }
    return out;
  }

  const ChannelConfig& config() const noexcept { return config_; }
  const ChannelCounters& counters() const noexcept { return counters_; }
  std::size_t in_flight() const noexcept { return in_flight_.size(); }
  const std::deque<InFlightMsg<Payload>>& pending() const noexcept { return in_flight_; }

 private:
  ChannelConfig config_;
  std::mt19937_64 rng_;
  std::deque<InFlightMsg<Payload>> in_flight_;
  double last_send_ms_ = -std::numeric_limits<double>::infinity();
  double last_due_ms_ = -std::numeric_limits<double>::infinity();
  ChannelCounters counters_;
};

/// Commands down to a twin, state reports back up.
struct DuplexLink {
  Channel<CommandMsg> down;
  Channel<TwinState> up;

  DuplexLink(ChannelConfig down_config, ChannelConfig up_config)
      : down(down_config), up(up_config) {}
};

struct RoundTrip {
  TwinState state;
  double returned_at_ms = 0.0;
};

/// Blocking command exchange: sends `cmd`, then advances simulated time one
/// tick at a time (stepping `robot`) until a state report acknowledging
/// cmd.sequence comes back. The twin answers every received command with an
/// immediate report. Throws LinkTimeout after `timeout_ms`.
RoundTrip sync_round_trip(DuplexLink& link, RobotTwin& robot, const CommandMsg& cmd,
                          double now_ms, double timeout_ms = 250.0);

}  // namespace twinsync
