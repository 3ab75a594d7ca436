#include "tally/event_log.hpp"

#include <fstream>

namespace tally {

namespace {

constexpr const char* kFormat = "tally-events";

const nlohmann::json& require(const nlohmann::json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) {
    throw std::invalid_argument(std::string("event missing field: ") + key);
  }
  return *it;
}

std::string require_string(const nlohmann::json& j, const char* key) {
  const nlohmann::json& v = require(j, key);
  if (!v.is_string()) {
    throw std::invalid_argument(std::string("event field not a string: ") +
                                key);
  }
  return v.get<std::string>();
}

}  // namespace

nlohmann::json event_to_json(const ClassificationEvent& event) {
  nlohmann::json j = nlohmann::json::object();
  j["event_id"] = event.event_id;
  j["user_id"] = event.user_id;
  j["subject_id"] = event.subject_id;
  j["workflow_id"] = event.workflow_id;
  j["task"] = event.task_id;
  nlohmann::json ann = nlohmann::json::object();
  if (const auto* single = std::get_if<SingleLabel>(&event.annotation)) {
    ann["kind"] = "single";
    ann["label"] = single->label;
  } else {
    const auto& group = std::get<GroupLabel>(event.annotation);
    ann["kind"] = "group";
    ann["label"] = group.label;
    ann["anomalies"] = group.anomaly_subject_ids;
  }
  j["annotation"] = std::move(ann);
  j["timestamp"] = event.timestamp;
  return j;
}

ClassificationEvent event_from_json(const nlohmann::json& j) {
  if (!j.is_object()) {
    throw std::invalid_argument("event record must be a JSON object");
  }
  ClassificationEvent event;
  event.event_id = require_string(j, "event_id");
  event.user_id = require_string(j, "user_id");
  event.subject_id = require_string(j, "subject_id");
  event.workflow_id = require_string(j, "workflow_id");
  event.task_id = require_string(j, "task");
  const nlohmann::json& ts = require(j, "timestamp");
  if (!ts.is_number_integer()) {
    throw std::invalid_argument("event timestamp must be an integer");
  }
  event.timestamp = ts.get<Timestamp>();
  const nlohmann::json& ann = require(j, "annotation");
  if (!ann.is_object()) {
    throw std::invalid_argument("event annotation must be an object");
  }
  const std::string kind = require_string(ann, "kind");
  const std::string label = require_string(ann, "label");
  if (kind == "single") {
    event.annotation = SingleLabel{label};
  } else if (kind == "group") {
    GroupLabel group;
    group.label = label;
    if (auto it = ann.find("anomalies"); it != ann.end()) {
      if (!it->is_array()) {
        throw std::invalid_argument("annotation anomalies must be an array");
      }
      for (const auto& id : *it) {
        if (!id.is_string()) {
          throw std::invalid_argument("anomaly ids must be strings");
        }
        group.anomaly_subject_ids.insert(id.get<std::string>());
      }
    }
    event.annotation = std::move(group);
  } else {
    throw std::invalid_argument("unknown annotation kind: " + kind);
  }
  return event;
}

EventLogWriter::EventLogWriter(const std::string& path) : path_(path) {
  out_.open(path, std::ios::app);
  if (!out_) {
    throw std::runtime_error("cannot open event log: " + path);
  }
  if (out_.tellp() == std::ofstream::pos_type(0)) {
    nlohmann::json header = nlohmann::json::object();
    header["format"] = kFormat;
    header["version"] = 1;
    out_ << header.dump() << '\n';
    out_.flush();
  }
}

void EventLogWriter::append(const ClassificationEvent& event) {
  out_ << event_to_json(event).dump() << '\n';
  out_.flush();
  if (!out_) {
    throw std::runtime_error("short write to event log: " + path_);
  }
}

ReplayStats replay_log(std::istream& in, Engine& engine) {
  ReplayStats stats;
  std::string line;
  std::size_t line_number = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    line_number += 1;
    if (!line.empty() && line.back() == '\r') {
      line.pop_back();
    }
    if (line.empty()) {
      // A trailing blank line is a complete final record's newline; a blank
      // line mid-file is a hole in an append-only log.
      if (in.peek() == std::char_traits<char>::eof()) {
        break;
      }
      throw CorruptLine("blank line inside event log", line_number);
    }
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded()) {
      throw CorruptLine("line is not valid JSON", line_number);
    }
    if (!header_seen) {
      if (!j.is_object() || j.value("format", "") != kFormat) {
        throw CorruptLine("first line is not a tally-events header",
                          line_number);
      }
      header_seen = true;
      continue;
    }
    ClassificationEvent event;
    try {
      event = event_from_json(j);
    } catch (const std::invalid_argument& e) {
      throw CorruptLine(e.what(), line_number);
    }
    stats.lines += 1;
    const ProcessOutcome outcome = engine.process(std::move(event));
    if (outcome.accepted) {
      stats.accepted += 1;
    } else {
      stats.rejected += 1;
    }
  }
  return stats;
}

ReplayStats replay_log_file(const std::string& path, Engine& engine) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open event log: " + path);
  }
  return replay_log(in, engine);
}

}  // namespace tally
