#pragma once

#include "twinsync/scenario_config.hpp"

#include <cstdint>
#include <memory>

namespace twinsync {

struct ServiceOptions {
  std::uint16_t port = 0;  ///< 0 picks a free port
  /// Simulated ticks per wall-clock second; 0 runs unpaced.
  double ticks_per_second = 0.0;
  /// Ticks between stream frames.
  std::int64_t frame_every = 10;
};

/// HTTP + WebSocket front end for one scenario run.
///
///   GET  /api/state                  latest paired snapshot and run state
///   GET  /api/metrics                metrics of the log so far
///   GET  /api/pending                all pending plans
///   POST /api/pending/{id}/decision  {"verdict": ..., "actor": ...}
///   WS   /api/stream                 frames and gate events
///
/// The simulation runs on its own thread; readers only see published
/// snapshots, and decisions are the single write path into the loop.
class Service {
 public:
  Service(ScenarioConfig config, ServiceOptions options);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Binds and starts serving. Returns the bound port.
  std::uint16_t listen();
  /// Starts the simulation thread; until then the state is "idle".
  void start_run();
  /// Blocks until the run is terminal or blocked with no decision pending.
  void wait_idle();
  void stop();

  std::uint16_t port() const;

  struct Impl;

 private:
  std::unique_ptr<Impl> impl_;
};

}  // namespace twinsync
