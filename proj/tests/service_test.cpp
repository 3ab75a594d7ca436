#include <gtest/gtest.h>

#include <cstdio>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "tally/engine.hpp"
#include "tally/event_log.hpp"
#include "tally/service.hpp"

namespace tally {
namespace {

using nlohmann::json;

EngineConfig service_config() {
  Workflow w;
  w.id = "main";
  w.task_id = "T0";
  w.class_set = {"yes", "no"};
  w.positive_class = "yes";
  RuleConfig retire;
  retire.expression = Expr::comparison(
      Expr::Op::Gte, Expr::lookup("total_votes"), Expr::constant(3));
  retire.effects = {RetireSubjectEffect{RetirementReason::VoteThreshold}};
  EngineConfig cfg;
  cfg.workflows = {w};
  cfg.rules["main"] = {retire};
  cfg.seed = 0xcafe;
  return cfg;
}

void seed_two_subjects(Engine& engine) {
  for (const char* id : {"sA", "sB"}) {
    Subject s;
    s.id = id;
    s.metadata["machine_score"] = 0.5;
    engine.add_subject(s);
    engine.add_subject_to_workflow(id, "main");
  }
}

json submission(const std::string& user, const std::string& subject,
                const std::string& label) {
  json body;
  body["user_id"] = user;
  body["subject_id"] = subject;
  body["workflow_id"] = "main";
  body["task"] = "T0";
  body["annotation"] = {{"kind", "single"}, {"label", label}};
  return body;
}

class ServiceFixture : public ::testing::Test {
 protected:
  void SetUp() override {
    engine_ = std::make_unique<Engine>(service_config());
    seed_two_subjects(*engine_);
    service_ = std::make_unique<Service>(*engine_);
    port_ = service_->bind_any_port("127.0.0.1");
    ASSERT_GT(port_, 0);
    server_ = std::thread([this] { service_->listen_after_bind(); });
    client_ = std::make_unique<httplib::Client>("127.0.0.1", port_);
    client_->set_connection_timeout(5);
  }

  void TearDown() override {
    service_->stop();
    if (server_.joinable()) {
      server_.join();
    }
  }

  std::unique_ptr<Engine> engine_;
  std::unique_ptr<Service> service_;
  std::unique_ptr<httplib::Client> client_;
  std::thread server_;
  int port_ = -1;
};

TEST_F(ServiceFixture, SubmitListsEffects) {
  for (int i = 0; i < 2; ++i) {
    const auto res = client_->Post(
        "/classifications",
        submission("u" + std::to_string(i), "sA", "yes").dump(),
        "application/json");
    ASSERT_TRUE(res);
    EXPECT_EQ(res->status, 200);
    const json reply = json::parse(res->body);
    EXPECT_TRUE(reply.at("accepted").get<bool>());
    EXPECT_TRUE(reply.at("effects").empty());
  }
  const auto res = client_->Post("/classifications",
                                 submission("u2", "sA", "yes").dump(),
                                 "application/json");
  ASSERT_TRUE(res);
  const json reply = json::parse(res->body);
  EXPECT_TRUE(reply.at("accepted").get<bool>());
  ASSERT_EQ(reply.at("effects").size(), 1u);
  EXPECT_EQ(reply["effects"][0].at("action"), "retire_subject");
  EXPECT_EQ(reply["effects"][0].at("subject_id"), "sA");
  EXPECT_TRUE(reply["effects"][0].at("applied").get<bool>());
  EXPECT_EQ(engine_->status("main", "sA")->state, SubjectState::Retired);
}

TEST_F(ServiceFixture, RejectionIsAValueNotAnError) {
  client_->Post("/classifications", submission("u1", "sA", "yes").dump(),
                "application/json");
  const auto res = client_->Post("/classifications",
                                 submission("u1", "sA", "no").dump(),
                                 "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  const json reply = json::parse(res->body);
  EXPECT_FALSE(reply.at("accepted").get<bool>());
  EXPECT_EQ(reply.at("reject_reason"), "duplicate_reviewer");
}

TEST_F(ServiceFixture, MalformedBodyIsBadRequest) {
  const auto res = client_->Post("/classifications", "{not json",
                                 "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 400);
  const auto arr = client_->Post("/classifications", "[1,2,3]",
                                 "application/json");
  ASSERT_TRUE(arr);
  EXPECT_EQ(arr->status, 400);
  json missing = submission("u1", "sA", "yes");
  missing.erase("annotation");
  const auto res2 = client_->Post("/classifications", missing.dump(),
                                  "application/json");
  ASSERT_TRUE(res2);
  EXPECT_EQ(res2->status, 400);
}

TEST_F(ServiceFixture, QueueServesBestEffortCount) {
  const auto res = client_->Get("/queue?user=u1&workflow=main&count=3");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  const json reply = json::parse(res->body);
  EXPECT_EQ(reply.at("user"), "u1");
  EXPECT_EQ(reply.at("workflow"), "main");
  EXPECT_EQ(reply.at("subjects").size(), 2u);  // pool holds only two
}

TEST_F(ServiceFixture, QueueValidatesParams) {
  EXPECT_EQ(client_->Get("/queue?workflow=main")->status, 400);
  EXPECT_EQ(client_->Get("/queue?user=u1")->status, 400);
  EXPECT_EQ(client_->Get("/queue?user=u1&workflow=ghost")->status, 404);
  EXPECT_EQ(client_->Get("/queue?user=u1&workflow=main&count=zero")->status,
            400);
  EXPECT_EQ(client_->Get("/queue?user=u1&workflow=main&count=0")->status, 400);
}

TEST_F(ServiceFixture, ReductionFetch) {
  client_->Post("/classifications", submission("u1", "sA", "yes").dump(),
                "application/json");
  const auto res = client_->Get("/reductions/main/sA");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  const json reply = json::parse(res->body);
  EXPECT_EQ(reply.at("subject_id"), "sA");
  EXPECT_EQ(reply["reduction"].at("total_votes"), 1);
  EXPECT_EQ(reply["reduction"]["vote_counts"].at("yes"), 1);

  EXPECT_EQ(client_->Get("/reductions/main/ghost")->status, 404);
  EXPECT_EQ(client_->Get("/reductions/ghost/sA")->status, 404);
}

TEST_F(ServiceFixture, ProgressCounters) {
  client_->Post("/classifications", submission("u1", "sA", "yes").dump(),
                "application/json");
  const auto res = client_->Get("/progress?workflow=main");
  ASSERT_TRUE(res);
  const json reply = json::parse(res->body);
  EXPECT_EQ(reply.at("main").at("subjects"), 2);
  EXPECT_EQ(reply.at("main").at("accepted_events"), 1);
  const auto all = client_->Get("/progress");
  ASSERT_TRUE(all);
  EXPECT_TRUE(json::parse(all->body).contains("main"));
  EXPECT_EQ(client_->Get("/progress?workflow=ghost")->status, 404);
}

TEST_F(ServiceFixture, UnknownRouteIs404) {
  EXPECT_EQ(client_->Get("/nope")->status, 404);
}

// Submissions through the service, logged by the attached writer, replay
// into the same canonical state.
TEST(ServiceLogTest, LoggedSubmissionsReplayToSameState) {
  const std::string path = "/tmp/tally_service_test.jsonl";
  std::remove(path.c_str());
  Engine engine(service_config());
  seed_two_subjects(engine);
  {
    EventLogWriter writer(path);
    Service service(engine, &writer);
    const int port = service.bind_any_port("127.0.0.1");
    ASSERT_GT(port, 0);
    std::thread server([&] { service.listen_after_bind(); });
    httplib::Client client("127.0.0.1", port);
    client.set_connection_timeout(5);
    const char* labels[] = {"yes", "no", "yes", "yes"};
    for (int i = 0; i < 4; ++i) {
      const auto res = client.Post(
          "/classifications",
          submission("u" + std::to_string(i % 3), i % 2 == 0 ? "sA" : "sB",
                     labels[i])
              .dump(),
          "application/json");
      ASSERT_TRUE(res);
      ASSERT_EQ(res->status, 200);
    }
    service.stop();
    server.join();
  }
  Engine replayed(service_config());
  seed_two_subjects(replayed);
  const ReplayStats stats = replay_log_file(path, replayed);
  EXPECT_EQ(stats.lines, 4u);
  EXPECT_EQ(engine.state_dump().dump(), replayed.state_dump().dump());
  std::remove(path.c_str());
}

}  // namespace
}  // namespace tally
