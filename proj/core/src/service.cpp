#include "tally/service.hpp"

#include <exception>
#include <mutex>
#include <string>
#include <utility>

#include <httplib.h>

#include "tally/lifecycle.hpp"
#include "tally/rules_json.hpp"

namespace tally {

namespace {

void send_json(httplib::Response& res, int status, const nlohmann::json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& what) {
  nlohmann::json body = nlohmann::json::object();
  body["error"] = what;
  send_json(res, status, body);
}

nlohmann::json effect_report(const FiredEffect& fired) {
  nlohmann::json j = effect_to_json(fired.effect);
  j["workflow_id"] = fired.workflow_id;
  j["subject_id"] = fired.subject_id;
  j["applied"] = fired.applied;
  return j;
}

nlohmann::json progress_to_json(const ProgressCounts& p) {
  nlohmann::json j = nlohmann::json::object();
  j["subjects"] = p.subjects;
  j["pending"] = p.pending;
  j["active"] = p.active;
  j["retired"] = p.retired;
  j["held_for_expert"] = p.held_for_expert;
  j["accepted_events"] = p.accepted_events;
  j["rejected_events"] = p.rejected_events;
  j["total_votes"] = p.total_votes;
  j["retired_by_reason"] = p.retired_by_reason;
  return j;
}

}  // namespace

struct Service::Impl {
  Engine& engine;
  EventLogWriter* log;
  httplib::Server server;
  // Keeps log order identical to processing order across concurrent
  // submissions; replay then reproduces the live state exactly.
  std::mutex submit_mu;

  Impl(Engine& eng, EventLogWriter* writer) : engine(eng), log(writer) {
    server.Post("/classifications", [this](const httplib::Request& req,
                                           httplib::Response& res) {
      nlohmann::json body;
      try {
        body = nlohmann::json::parse(req.body);
      } catch (const nlohmann::json::parse_error& e) {
        send_error(res, 400, std::string("body is not JSON: ") + e.what());
        return;
      }
      if (!body.is_object()) {
        send_error(res, 400, "body must be a JSON object");
        return;
      }
      // Optional on submission; the engine stamps both.
      if (!body.contains("event_id")) {
        body["event_id"] = "";
      }
      if (!body.contains("timestamp")) {
        body["timestamp"] = 0;
      }
      ClassificationEvent event;
      try {
        event = event_from_json(body);
      } catch (const std::invalid_argument& e) {
        send_error(res, 400, e.what());
        return;
      }
      ProcessOutcome outcome;
      {
        std::lock_guard guard(submit_mu);
        outcome = engine.process(event);
        if (log != nullptr) {
          event.event_id = outcome.event_id;
          event.timestamp = outcome.timestamp;
          log->append(event);
        }
      }
      nlohmann::json reply = nlohmann::json::object();
      reply["accepted"] = outcome.accepted;
      if (outcome.reject_reason) {
        reply["reject_reason"] = to_string(*outcome.reject_reason);
      }
      reply["event_id"] = outcome.event_id;
      reply["timestamp"] = outcome.timestamp;
      nlohmann::json effects = nlohmann::json::array();
      for (const FiredEffect& fired : outcome.effects) {
        effects.push_back(effect_report(fired));
      }
      reply["effects"] = std::move(effects);
      if (!outcome.skipped_subjects.empty()) {
        reply["skipped_subjects"] = outcome.skipped_subjects;
      }
      send_json(res, 200, reply);
    });

    server.Get("/queue", [this](const httplib::Request& req,
                                httplib::Response& res) {
      if (!req.has_param("user") || !req.has_param("workflow")) {
        send_error(res, 400, "queue requires user and workflow parameters");
        return;
      }
      const std::string user = req.get_param_value("user");
      const std::string workflow = req.get_param_value("workflow");
      std::size_t count = 1;
      if (req.has_param("count")) {
        try {
          const int parsed = std::stoi(req.get_param_value("count"));
          if (parsed < 1) {
            throw std::invalid_argument("count");
          }
          count = static_cast<std::size_t>(parsed);
        } catch (const std::exception&) {
          send_error(res, 400, "count must be a positive integer");
          return;
        }
      }
      try {
        const auto subjects =
            engine.next_subjects({user, workflow, count});
        nlohmann::json reply = nlohmann::json::object();
        reply["user"] = user;
        reply["workflow"] = workflow;
        reply["subjects"] = subjects;
        send_json(res, 200, reply);
      } catch (const UnknownWorkflowError& e) {
        send_error(res, 404, e.what());
      }
    });

    server.Get(R"(/reductions/([^/]+)/([^/]+))",
               [this](const httplib::Request& req, httplib::Response& res) {
                 const std::string workflow = req.matches[1];
                 const std::string subject = req.matches[2];
                 const auto reduction = engine.reduction(workflow, subject);
                 if (!reduction) {
                   send_error(res, 404, "no reduction for " + workflow + "/" +
                                            subject);
                   return;
                 }
                 nlohmann::json reply = nlohmann::json::object();
                 reply["workflow_id"] = workflow;
                 reply["subject_id"] = subject;
                 reply["reduction"] = reduction_to_json(*reduction);
                 send_json(res, 200, reply);
               });

    server.Get("/progress", [this](const httplib::Request& req,
                                   httplib::Response& res) {
      nlohmann::json reply = nlohmann::json::object();
      if (req.has_param("workflow")) {
        const std::string workflow = req.get_param_value("workflow");
        try {
          reply[workflow] = progress_to_json(engine.progress(workflow));
        } catch (const UnknownWorkflowError& e) {
          send_error(res, 404, e.what());
          return;
        }
      } else {
        for (const WorkflowId& id : engine.workflow_ids()) {
          reply[id] = progress_to_json(engine.progress(id));
        }
      }
      send_json(res, 200, reply);
    });
  }
};

Service::Service(Engine& engine, EventLogWriter* log)
    : impl_(std::make_unique<Impl>(engine, log)) {}

Service::~Service() { impl_->server.stop(); }

bool Service::listen(const std::string& host, int port) {
  return impl_->server.listen(host, port);
}

int Service::bind_any_port(const std::string& host) {
  return impl_->server.bind_to_any_port(host);
}

bool Service::listen_after_bind() { return impl_->server.listen_after_bind(); }

void Service::stop() { impl_->server.stop(); }

}  // namespace tally
