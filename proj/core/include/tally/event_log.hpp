#pragma once

#include <fstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "tally/engine.hpp"
#include "tally/types.hpp"

namespace tally {

// Append-only JSONL event log, the engine's source of truth. Line 1 is a
// header record {"format":"tally-events","version":1}; each further line is
// one complete event object. Every submitted event is logged, accepted or
// rejected, so replaying a log through the same config re-derives the exact
// live state.

struct CorruptLine : std::runtime_error {
  CorruptLine(std::string message, std::size_t line_number)
      : std::runtime_error(std::move(message)), line(line_number) {}
  std::size_t line;  // 1-based, counting the header
};

nlohmann::json event_to_json(const ClassificationEvent& event);
// Throws std::invalid_argument on missing fields or wrong types.
ClassificationEvent event_from_json(const nlohmann::json& j);

class EventLogWriter {
 public:
  // Opens for append; writes the header when the file starts empty.
  explicit EventLogWriter(const std::string& path);
  // One complete line per call, flushed before returning.
  void append(const ClassificationEvent& event);

 private:
  std::ofstream out_;
  std::string path_;
};

struct ReplayStats {
  std::size_t lines = 0;  // event lines, excluding the header
  std::size_t accepted = 0;
  std::size_t rejected = 0;
};

// Feeds every logged event through engine.process in file order. Throws
// CorruptLine on the first unparsable line; the engine keeps all state from
// the lines before it.
ReplayStats replay_log(std::istream& in, Engine& engine);
ReplayStats replay_log_file(const std::string& path, Engine& engine);

}  // namespace tally
