#pragma once

#include <memory>
#include <string>

#include "tally/engine.hpp"
#include "tally/event_log.hpp"

namespace tally {

// Synchronous HTTP facade over one engine.
//
//   POST /classifications            submit one event (JSON body)
//   GET  /queue?user=&workflow=[&count=]   next subjects for a user
//   GET  /reductions/<workflow>/<subject>  one reduction
//   GET  /progress[?workflow=]             progress counters
//
// Submissions run through Engine::process under its lock, so concurrent
// requests see the pipeline per event as atomic. When a log writer is
// attached, every submission (accepted or rejected) is appended after
// processing, stamped with the timestamp the engine assigned, keeping the
// log replayable into the same state.
class Service {
 public:
  explicit Service(Engine& engine, EventLogWriter* log = nullptr);
  ~Service();

  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  // Blocks serving on host:port. False when the bind fails.
  bool listen(const std::string& host, int port);

  // Test hook: binds an OS-assigned port (returns -1 on failure), after
  // which listen_after_bind() blocks serving.
  int bind_any_port(const std::string& host);
  bool listen_after_bind();

  // Safe from other threads; unblocks listen.
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace tally
