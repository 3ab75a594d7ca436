#include <gtest/gtest.h>

#include <algorithm>
#include <string>
#include <vector>

#include "tally/engine.hpp"
#include "tally/extract.hpp"
#include "tally/reduce.hpp"
#include "tally/rules.hpp"

namespace tally {
namespace {

ClassificationEvent vote_event(const std::string& user, const std::string& subject,
                               const std::string& label,
                               const std::string& task = "T0") {
  ClassificationEvent ev;
  ev.user_id = user;
  ev.subject_id = subject;
  ev.workflow_id = "main";
  ev.task_id = task;
  ev.annotation = SingleLabel{label};
  return ev;
}

TEST(ExtractVoteTest, SingleLabelMapsToOneExtract) {
  const auto extracts = extract_vote(vote_event("u1", "s1", "lion"));
  ASSERT_EQ(extracts.size(), 1u);
  EXPECT_EQ(extracts[0].subject_id, "s1");
  EXPECT_EQ(extracts[0].user_id, "u1");
  EXPECT_EQ(extracts[0].key, "T0.lion");
  EXPECT_DOUBLE_EQ(extracts[0].value, 1.0);

  const auto zebra = extract_vote(vote_event("u1", "s1", "zebra"));
  EXPECT_EQ(zebra[0].key, "T0.zebra");
}

TEST(ExtractVoteTest, GroupAnnotationRejected) {
  ClassificationEvent ev = vote_event("u1", "page", "muon");
  ev.annotation = GroupLabel{"muon", {}};
  EXPECT_THROW(extract_vote(ev), WrongAnnotationKind);
}

std::vector<SubjectId> grid_cells(int n) {
  std::vector<SubjectId> cells;
  cells.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    cells.push_back("cell" + std::to_string(i));
  }
  return cells;
}

TEST(ExtractGroupTest, FullPageWithOneAnomaly) {
  const auto page = grid_cells(100);
  ClassificationEvent ev = vote_event("u1", "page", "muon");
  ev.annotation = GroupLabel{"muon", {"cell42"}};
  const auto extracts = extract_group(ev, page);
  ASSERT_EQ(extracts.size(), 100u);
  int class_votes = 0;
  int anomalies = 0;
  for (const auto& ex : extracts) {
    if (ex.key == "T0.muon") {
      ++class_votes;
      EXPECT_NE(ex.subject_id, "cell42");
    } else if (ex.key == "T0.anomaly") {
      ++anomalies;
      EXPECT_EQ(ex.subject_id, "cell42");
    } else {
      FAIL() << "unexpected key " << ex.key;
    }
  }
  EXPECT_EQ(class_votes, 99);
  EXPECT_EQ(anomalies, 1);
}

TEST(ExtractGroupTest, EmptyAnomalySet) {
  const auto page = grid_cells(4);
  ClassificationEvent ev = vote_event("u1", "page", "muon");
  ev.annotation = GroupLabel{"muon", {}};
  const auto extracts = extract_group(ev, page);
  ASSERT_EQ(extracts.size(), 4u);
  for (const auto& ex : extracts) {
    EXPECT_EQ(ex.key, "T0.muon");
  }
}

TEST(ExtractGroupTest, AnomalyOutsidePageThrows) {
  const auto page = grid_cells(4);
  ClassificationEvent ev = vote_event("u1", "page", "muon");
  ev.annotation = GroupLabel{"muon", {"elsewhere"}};
  EXPECT_THROW(extract_group(ev, page), AnomalyOutsidePage);
}

TEST(ExtractLabelTest, SplitsTaskPrefix) {
  EXPECT_EQ(extract_label("T0.lion", "T0"), "lion");
  EXPECT_EQ(extract_label("T0.anomaly", "T0"), "anomaly");
  EXPECT_THROW(extract_label("T1.lion", "T0"), std::invalid_argument);
}

TEST(RegistryTest, BuiltinsPresentAndShadowable) {
  ExtractorRegistry reg;
  EXPECT_TRUE(reg.contains("vote"));
  EXPECT_TRUE(reg.contains("group"));
  EXPECT_FALSE(reg.contains("custom"));
  EXPECT_THROW(reg.get("custom"), std::invalid_argument);
  bool called = false;
  reg.add("vote", [&](const ClassificationEvent&, const ExtractionContext&) {
    called = true;
    return std::vector<Extract>{};
  });
  reg.get("vote")(vote_event("u", "s", "x"), {});
  EXPECT_TRUE(called);
}

Workflow binary_workflow() {
  Workflow w;
  w.id = "main";
  w.task_id = "T0";
  w.class_set = {"yes", "no"};
  w.positive_class = "yes";
  return w;
}

Subject labeled_subject(const std::string& id, const std::string& machine_label) {
  Subject s;
  s.id = id;
  s.metadata["machine_label"] = machine_label;
  return s;
}

Reduction fold_sequence(const std::vector<std::string>& labels,
                        const Workflow& w, const Subject& subject) {
  Reduction red;
  red.subject_id = subject.id;
  ReduceContext ctx;
  ctx.workflow = &w;
  int user = 0;
  for (const auto& label : labels) {
    ClassificationEvent ev =
        vote_event("u" + std::to_string(user++), subject.id, label);
    const auto extracts = extract_vote(ev);
    red = reduce(red, extracts, ev, subject, ctx);
  }
  return red;
}

TEST(ReduceTest, CounterArithmetic) {
  const Workflow w = binary_workflow();
  Subject s;
  s.id = "s1";
  const Reduction red = fold_sequence({"yes", "yes", "no"}, w, s);
  EXPECT_EQ(red.vote_counts.at("yes"), 2);
  EXPECT_EQ(red.vote_counts.at("no"), 1);
  EXPECT_EQ(red.total_votes, 3);
  EXPECT_EQ(red.reviewer_ids.size(), 3u);
  EXPECT_EQ(red.vote_order, (std::vector<std::string>{"yes", "yes", "no"}));
}

TEST(ReduceTest, InputReductionNotMutated) {
  const Workflow w = binary_workflow();
  Subject s;
  s.id = "s1";
  Reduction before;
  before.subject_id = "s1";
  ReduceContext ctx;
  ctx.workflow = &w;
  ClassificationEvent ev = vote_event("u1", "s1", "yes");
  const auto extracts = extract_vote(ev);
  const Reduction after = reduce(before, extracts, ev, s, ctx);
  EXPECT_EQ(before.total_votes, 0);
  EXPECT_TRUE(before.vote_counts.empty());
  EXPECT_EQ(after.total_votes, 1);
}

TEST(ReduceTest, AllSixFoldOrdersAgreeOnCounts) {
  const Workflow w = binary_workflow();
  Subject s;
  s.id = "s1";
  std::vector<std::string> labels = {"yes", "yes", "no"};
  std::sort(labels.begin(), labels.end());
  std::map<std::string, std::int64_t> reference;
  int orders = 0;
  do {
    const Reduction red = fold_sequence(labels, w, s);
    if (orders == 0) {
      reference = red.vote_counts;
    } else {
      EXPECT_EQ(red.vote_counts, reference);
    }
    EXPECT_EQ(red.total_votes, 3);
    ++orders;
  } while (std::next_permutation(labels.begin(), labels.end()));
  EXPECT_EQ(orders, 3);  // distinct permutations of {yes, yes, no}
}

TEST(ReduceTest, ExpertFlagSticks) {
  const Workflow w = binary_workflow();
  Subject s;
  s.id = "s1";
  Reduction red;
  red.subject_id = "s1";
  ReduceContext expert_ctx;
  expert_ctx.workflow = &w;
  expert_ctx.voter_is_expert = true;
  ClassificationEvent ev = vote_event("u1", "s1", "yes");
  red = reduce(red, extract_vote(ev), ev, s, expert_ctx);
  EXPECT_TRUE(red.expert_reviewed);
  ReduceContext plain_ctx;
  plain_ctx.workflow = &w;
  ClassificationEvent ev2 = vote_event("u2", "s1", "no");
  red = reduce(red, extract_vote(ev2), ev2, s, plain_ctx);
  EXPECT_TRUE(red.expert_reviewed);
}

TEST(AgreeTrackerTest, FirstTwoAgree) {
  const Subject s = labeled_subject("s1", "yes");
  Reduction red;
  red.subject_id = "s1";
  red.vote_order = {"yes", "yes"};
  red.total_votes = 2;
  EXPECT_EQ(track_agree_with_machine(red, s, 2), std::optional<bool>(true));
}

TEST(AgreeTrackerTest, DisagreementIsFalse) {
  const Subject s = labeled_subject("s1", "yes");
  Reduction red;
  red.subject_id = "s1";
  red.vote_order = {"yes", "no"};
  red.total_votes = 2;
  EXPECT_EQ(track_agree_with_machine(red, s, 2), std::optional<bool>(false));
}

TEST(AgreeTrackerTest, UndefinedUntilKVotes) {
  const Subject s = labeled_subject("s1", "yes");
  Reduction red;
  red.subject_id = "s1";
  red.vote_order = {"yes"};
  red.total_votes = 1;
  EXPECT_EQ(track_agree_with_machine(red, s, 2), std::nullopt);
}

TEST(AgreeTrackerTest, MissingLabelThrows) {
  Subject s;
  s.id = "s1";
  Reduction red;
  red.subject_id = "s1";
  red.vote_order = {"yes", "yes"};
  red.total_votes = 2;
  EXPECT_THROW(track_agree_with_machine(red, s, 2), MissingMachineLabel);
}

TEST(AgreeTrackerTest, FrozenValueSurvivesLaterVotes) {
  const Workflow w = binary_workflow();
  const Subject s = labeled_subject("s1", "yes");
  ReduceContext ctx;
  ctx.workflow = &w;
  Reduction red;
  red.subject_id = "s1";
  const char* labels[] = {"yes", "yes", "no", "no", "no"};
  int user = 0;
  for (const char* label : labels) {
    ClassificationEvent ev = vote_event("u" + std::to_string(user++), "s1", label);
    red = reduce(red, extract_vote(ev), ev, s, ctx);
  }
  // First two agreed; the three dissenting votes afterwards cannot unfreeze.
  EXPECT_EQ(red.first_k_agree_with_machine, std::optional<bool>(true));
}

TEST(FlattenTest, KeySpaceContents) {
  const Workflow w = binary_workflow();
  Reduction red;
  red.subject_id = "s1";
  red.vote_counts = {{"yes", 2}, {"no", 1}, {"anomaly", 1}};
  red.total_votes = 3;
  red.posterior = 0.75;
  red.reviewer_ids = {"u1", "u2", "u3"};
  red.expert_reviewed = true;
  red.first_k_agree_with_machine = true;
  const KeySpace keys = flatten_reduction(red, w);
  EXPECT_DOUBLE_EQ(keys.at("total_votes"), 3.0);
  EXPECT_DOUBLE_EQ(keys.at("reviewers"), 3.0);
  EXPECT_DOUBLE_EQ(keys.at("posterior"), 0.75);
  EXPECT_DOUBLE_EQ(keys.at("expert_reviewed"), 1.0);
  EXPECT_DOUBLE_EQ(keys.at("first_2_agree"), 1.0);
  EXPECT_DOUBLE_EQ(keys.at("T0.yes"), 2.0);
  EXPECT_DOUBLE_EQ(keys.at("T0.no"), 1.0);
  EXPECT_DOUBLE_EQ(keys.at("T0.anomaly"), 1.0);
}

TEST(RuleEvalTest, ComparatorsAndAbsentKeys) {
  const auto ten_votes = Expr::comparison(
      Expr::Op::Gte, Expr::lookup("total_votes"), Expr::constant(10));
  KeySpace keys = {{"total_votes", 10.0}};
  EXPECT_TRUE(evaluate_rule(*ten_votes, keys));
  keys["total_votes"] = 9.0;
  EXPECT_FALSE(evaluate_rule(*ten_votes, keys));

  const auto tracker = Expr::comparison(
      Expr::Op::Eq, Expr::lookup("first_2_agree"), Expr::constant(1));
  EXPECT_TRUE(evaluate_rule(*tracker, {{"first_2_agree", 1.0}}));
  EXPECT_FALSE(evaluate_rule(*tracker, {}));

  // Absent key reads as 0.
  const auto lions = Expr::comparison(Expr::Op::Gte, Expr::lookup("T0.lion"),
                                      Expr::constant(3));
  EXPECT_FALSE(evaluate_rule(*lions, {}));
}

TEST(RuleEvalTest, BooleanAlgebra) {
  const auto t = Expr::comparison(Expr::Op::Gte, Expr::constant(1),
                                  Expr::constant(0));
  const auto f = Expr::comparison(Expr::Op::Lt, Expr::constant(1),
                                  Expr::constant(0));
  EXPECT_FALSE(evaluate_rule(*Expr::conjunction({t, f}), {}));
  EXPECT_TRUE(evaluate_rule(*Expr::disjunction({t, f}), {}));
  EXPECT_TRUE(evaluate_rule(*Expr::negation(f), {}));
}

TEST(RuleEvalTest, EvaluationIsPure) {
  const auto expr = Expr::comparison(Expr::Op::Gt, Expr::lookup("total_votes"),
                                     Expr::constant(2));
  const KeySpace keys = {{"total_votes", 5.0}};
  const KeySpace snapshot = keys;
  const bool first = evaluate_rule(*expr, keys);
  const bool second = evaluate_rule(*expr, keys);
  EXPECT_EQ(first, second);
  EXPECT_EQ(keys, snapshot);
}

EngineConfig engine_config(std::vector<RuleConfig> rules,
                           Workflow w = binary_workflow()) {
  EngineConfig cfg;
  cfg.workflows = {std::move(w)};
  cfg.rules["main"] = std::move(rules);
  cfg.seed = 99;
  return cfg;
}

RuleConfig vote_threshold_rule(int threshold) {
  RuleConfig rule;
  rule.expression = Expr::comparison(
      Expr::Op::Gte, Expr::lookup("total_votes"), Expr::constant(threshold));
  rule.effects = {RetireSubjectEffect{RetirementReason::VoteThreshold}};
  return rule;
}

void add_linked_subject(Engine& engine, Subject s) {
  const SubjectId id = s.id;
  engine.add_subject(std::move(s));
  engine.add_subject_to_workflow(id, "main");
}

TEST(EngineTest, TenVoteRetirement) {
  Workflow w = binary_workflow();
  w.positive_class.reset();
  w.class_set = {"real", "bogus"};
  Engine engine(engine_config({vote_threshold_rule(10)}, w));
  Subject s;
  s.id = "sn1";
  add_linked_subject(engine, s);
  for (int i = 0; i < 10; ++i) {
    const auto out = engine.process(
        vote_event("u" + std::to_string(i), "sn1", "real"));
    ASSERT_TRUE(out.accepted);
    if (i < 9) {
      EXPECT_EQ(engine.status("main", "sn1")->state, SubjectState::Active);
    }
  }
  EXPECT_EQ(engine.status("main", "sn1")->state, SubjectState::Retired);
  EXPECT_EQ(*engine.status("main", "sn1")->retirement_reason,
            RetirementReason::VoteThreshold);
}

TEST(EngineTest, AgreeWithMachineRetiresAtTwo) {
  RuleConfig agree;
  agree.expression = Expr::comparison(
      Expr::Op::Eq, Expr::lookup("first_2_agree"), Expr::constant(1));
  agree.effects = {RetireSubjectEffect{RetirementReason::RuleFired}};
  Engine engine(engine_config({agree, vote_threshold_rule(5)}));
  Subject s = labeled_subject("s1", "yes");
  add_linked_subject(engine, s);
  engine.process(vote_event("u1", "s1", "yes"));
  EXPECT_EQ(engine.status("main", "s1")->state, SubjectState::Active);
  const auto out = engine.process(vote_event("u2", "s1", "yes"));
  ASSERT_TRUE(out.accepted);
  EXPECT_EQ(engine.status("main", "s1")->state, SubjectState::Retired);
  EXPECT_EQ(*engine.status("main", "s1")->retirement_reason,
            RetirementReason::RuleFired);
  EXPECT_EQ(engine.reduction("main", "s1")->total_votes, 2);
}

TEST(EngineTest, DisagreementFallsBackToVoteThreshold) {
  RuleConfig agree;
  agree.expression = Expr::comparison(
      Expr::Op::Eq, Expr::lookup("first_2_agree"), Expr::constant(1));
  agree.effects = {RetireSubjectEffect{RetirementReason::RuleFired}};
  Engine engine(engine_config({agree, vote_threshold_rule(5)}));
  Subject s = labeled_subject("s1", "yes");
  add_linked_subject(engine, s);
  engine.process(vote_event("u1", "s1", "yes"));
  engine.process(vote_event("u2", "s1", "no"));
  for (int i = 3; i <= 5; ++i) {
    EXPECT_EQ(engine.status("main", "s1")->state, SubjectState::Active);
    engine.process(vote_event("u" + std::to_string(i), "s1", "yes"));
  }
  EXPECT_EQ(engine.status("main", "s1")->state, SubjectState::Retired);
  EXPECT_EQ(*engine.status("main", "s1")->retirement_reason,
            RetirementReason::VoteThreshold);
}

TEST(EngineTest, VoteOnRetiredSubjectRejectedStateUnchanged) {
  Engine engine(engine_config({vote_threshold_rule(1)}));
  Subject s;
  s.id = "s1";
  add_linked_subject(engine, s);
  engine.process(vote_event("u1", "s1", "yes"));
  ASSERT_EQ(engine.status("main", "s1")->state, SubjectState::Retired);
  const auto before = engine.state_dump();
  const auto out = engine.process(vote_event("u2", "s1", "no"));
  EXPECT_FALSE(out.accepted);
  EXPECT_EQ(*out.reject_reason, RejectReason::SubjectRetired);
  // Rejection bumps the rejected-event counter; everything else is frozen.
  auto after = engine.state_dump();
  EXPECT_EQ(after["workflows"]["main"]["subjects"],
            before["workflows"]["main"]["subjects"]);
  EXPECT_EQ(after["subjects"], before["subjects"]);
  EXPECT_EQ(after["users"], before["users"]);
}

TEST(EngineTest, DuplicateReviewerRejected) {
  Engine engine(engine_config({vote_threshold_rule(5)}));
  Subject s;
  s.id = "s1";
  add_linked_subject(engine, s);
  ASSERT_TRUE(engine.process(vote_event("u1", "s1", "yes")).accepted);
  const auto out = engine.process(vote_event("u1", "s1", "no"));
  EXPECT_FALSE(out.accepted);
  EXPECT_EQ(*out.reject_reason, RejectReason::DuplicateReviewer);
  EXPECT_EQ(engine.reduction("main", "s1")->total_votes, 1);
}

TEST(EngineTest, UnknownIdsRejected) {
  Engine engine(engine_config({}));
  Subject s;
  s.id = "s1";
  engine.add_subject(s);
  EXPECT_EQ(*engine.process(vote_event("u1", "ghost", "yes")).reject_reason,
            RejectReason::UnknownSubject);
  EXPECT_EQ(*engine.process(vote_event("u1", "s1", "yes")).reject_reason,
            RejectReason::SubjectNotInWorkflow);
  ClassificationEvent ev = vote_event("u1", "s1", "yes");
  ev.workflow_id = "ghost";
  EXPECT_EQ(*engine.process(std::move(ev)).reject_reason,
            RejectReason::UnknownWorkflow);
}

TEST(EngineTest, AddToWorkflowEffect) {
  Workflow second = binary_workflow();
  second.id = "followup";
  RuleConfig promote_subject;
  promote_subject.expression = Expr::comparison(
      Expr::Op::Gte, Expr::lookup("total_votes"), Expr::constant(1));
  promote_subject.effects = {AddSubjectToWorkflowEffect{"followup"}};
  EngineConfig cfg;
  cfg.workflows = {binary_workflow(), second};
  cfg.rules["main"] = {promote_subject};
  Engine engine(cfg);
  Subject s;
  s.id = "s1";
  add_linked_subject(engine, s);
  const auto out = engine.process(vote_event("u1", "s1", "yes"));
  ASSERT_TRUE(out.accepted);
  ASSERT_EQ(out.effects.size(), 1u);
  EXPECT_TRUE(out.effects[0].applied);
  // Pending in the target pool, unchanged in the source pool.
  EXPECT_EQ(engine.status("followup", "s1")->state, SubjectState::Pending);
  EXPECT_EQ(engine.status("main", "s1")->state, SubjectState::Active);
}

TEST(EngineTest, PromoteUserEffectRecomputesExpert) {
  RuleConfig promote;
  promote.expression = Expr::comparison(
      Expr::Op::Gte, Expr::lookup("total_votes"), Expr::constant(1));
  promote.effects = {PromoteUserEffect{"expert"}};
  Engine engine(engine_config({promote}));
  Subject s;
  s.id = "s1";
  add_linked_subject(engine, s);
  UserProfile p;
  p.user_id = "u1";
  engine.upsert_user(p);
  EXPECT_FALSE(engine.user_is_expert("u1"));
  engine.process(vote_event("u1", "s1", "yes"));
  EXPECT_TRUE(engine.user_is_expert("u1"));
  EXPECT_TRUE(engine.user("u1")->groups.count("expert") > 0);
}

TEST(EngineTest, UnknownPromoteGroupRejectedAtConfig) {
  RuleConfig promote;
  promote.expression = Expr::comparison(
      Expr::Op::Gte, Expr::lookup("total_votes"), Expr::constant(1));
  promote.effects = {PromoteUserEffect{"wizards"}};
  EXPECT_THROW(Engine{engine_config({promote})}, ConfigError);
}

TEST(EngineTest, UnknownEffectWorkflowRejectedAtConfig) {
  RuleConfig add;
  add.expression = Expr::comparison(
      Expr::Op::Gte, Expr::lookup("total_votes"), Expr::constant(1));
  add.effects = {AddSubjectToWorkflowEffect{"ghost"}};
  EXPECT_THROW(Engine{engine_config({add})}, ConfigError);
}

TEST(EngineTest, RetireEffectIdempotent) {
  // Two rules retiring on the same condition: second application is a no-op
  // and the original reason wins.
  RuleConfig first = vote_threshold_rule(1);
  RuleConfig second;
  second.expression = Expr::comparison(
      Expr::Op::Gte, Expr::lookup("total_votes"), Expr::constant(1));
  second.effects = {RetireSubjectEffect{RetirementReason::RuleFired}};
  Engine engine(engine_config({first, second}));
  Subject s;
  s.id = "s1";
  add_linked_subject(engine, s);
  const auto out = engine.process(vote_event("u1", "s1", "yes"));
  ASSERT_TRUE(out.accepted);
  EXPECT_EQ(engine.status("main", "s1")->state, SubjectState::Retired);
  EXPECT_EQ(*engine.status("main", "s1")->retirement_reason,
            RetirementReason::VoteThreshold);
  const auto counts = engine.progress("main");
  EXPECT_EQ(counts.retired, 1);
}

TEST(EngineTest, GridPageFoldsWholePage) {
  Workflow w;
  w.id = "main";
  w.task_id = "T0";
  w.class_set = {"muon", "other"};
  Engine engine(engine_config({}, w));
  Subject page;
  page.id = "page1";
  engine.add_subject(page);
  std::vector<SubjectId> members;
  for (int i = 0; i < 100; ++i) {
    Subject cell;
    cell.id = "cell" + std::to_string(i);
    engine.add_subject(cell);
    members.push_back(cell.id);
  }
  engine.add_subject_to_workflow("page1", "main");
  for (const auto& id : members) {
    engine.add_subject_to_workflow(id, "main");
  }
  engine.register_grid_page("page1", members);

  ClassificationEvent ev = vote_event("u1", "page1", "muon");
  ev.annotation = GroupLabel{"muon", {"cell42"}};
  const auto out = engine.process(std::move(ev));
  ASSERT_TRUE(out.accepted);

  int class_votes = 0;
  int anomaly_votes = 0;
  for (const auto& id : members) {
    const auto red = engine.reduction("main", id);
    ASSERT_TRUE(red.has_value());
    if (id == "cell42") {
      EXPECT_EQ(red->vote_counts.at("anomaly"), 1);
      EXPECT_EQ(red->total_votes, 0);  // anomaly flags are not class votes
      ++anomaly_votes;
    } else {
      EXPECT_EQ(red->vote_counts.at("muon"), 1);
      EXPECT_EQ(red->total_votes, 1);
      ++class_votes;
    }
  }
  EXPECT_EQ(class_votes, 99);
  EXPECT_EQ(anomaly_votes, 1);

  // Same user cannot classify the page twice.
  ClassificationEvent again = vote_event("u1", "page1", "muon");
  again.annotation = GroupLabel{"muon", {}};
  EXPECT_EQ(*engine.process(std::move(again)).reject_reason,
            RejectReason::DuplicateReviewer);
}

TEST(EngineTest, GroupEventOnNonPageRejected) {
  Workflow w;
  w.id = "main";
  w.task_id = "T0";
  w.class_set = {"muon", "other"};
  Engine engine(engine_config({}, w));
  Subject s;
  s.id = "s1";
  add_linked_subject(engine, s);
  ClassificationEvent ev = vote_event("u1", "s1", "muon");
  ev.annotation = GroupLabel{"muon", {}};
  EXPECT_EQ(*engine.process(std::move(ev)).reject_reason,
            RejectReason::UnknownPage);
}

TEST(EngineTest, GroupAnomalyOutsidePageRejected) {
  Workflow w;
  w.id = "main";
  w.task_id = "T0";
  w.class_set = {"muon", "other"};
  Engine engine(engine_config({}, w));
  Subject page;
  page.id = "page1";
  engine.add_subject(page);
  Subject cell;
  cell.id = "cell0";
  engine.add_subject(cell);
  engine.add_subject_to_workflow("page1", "main");
  engine.add_subject_to_workflow("cell0", "main");
  engine.register_grid_page("page1", {"cell0"});
  ClassificationEvent ev = vote_event("u1", "page1", "muon");
  ev.annotation = GroupLabel{"muon", {"elsewhere"}};
  const auto out = engine.process(std::move(ev));
  EXPECT_FALSE(out.accepted);
  EXPECT_EQ(*out.reject_reason, RejectReason::AnomalyOutsidePage);
}

TEST(EngineTest, RetiredPageMembersAreSkippedNotFolded) {
  Workflow w;
  w.id = "main";
  w.task_id = "T0";
  w.class_set = {"muon", "other"};
  Engine engine(engine_config({vote_threshold_rule(1)}, w));
  Subject page;
  page.id = "page1";
  engine.add_subject(page);
  for (int i = 0; i < 3; ++i) {
    Subject cell;
    cell.id = "cell" + std::to_string(i);
    engine.add_subject(cell);
    engine.add_subject_to_workflow(cell.id, "main");
  }
  engine.add_subject_to_workflow("page1", "main");
  engine.register_grid_page("page1", {"cell0", "cell1", "cell2"});

  // Retire cell1 with a direct vote, then classify the page.
  engine.process(vote_event("u0", "cell1", "muon"));
  ASSERT_EQ(engine.status("main", "cell1")->state, SubjectState::Retired);
  const auto frozen = *engine.reduction("main", "cell1");

  ClassificationEvent ev = vote_event("u1", "page1", "muon");
  ev.annotation = GroupLabel{"muon", {}};
  const auto out = engine.process(std::move(ev));
  ASSERT_TRUE(out.accepted);
  EXPECT_EQ(out.skipped_subjects, std::vector<SubjectId>{"cell1"});
  EXPECT_EQ(engine.reduction("main", "cell1")->total_votes,
            frozen.total_votes);
  EXPECT_EQ(engine.reduction("main", "cell0")->total_votes, 1);
}

TEST(EngineTest, ProgressCounters) {
  Engine engine(engine_config({vote_threshold_rule(2)}));
  for (int i = 0; i < 3; ++i) {
    Subject s;
    s.id = "s" + std::to_string(i);
    add_linked_subject(engine, s);
  }
  engine.process(vote_event("u1", "s0", "yes"));
  engine.process(vote_event("u2", "s0", "yes"));
  engine.process(vote_event("u1", "s1", "no"));
  engine.process(vote_event("u1", "s1", "no"));  // duplicate, rejected
  const auto p = engine.progress("main");
  EXPECT_EQ(p.subjects, 3);
  EXPECT_EQ(p.retired, 1);
  EXPECT_EQ(p.active, 1);
  EXPECT_EQ(p.pending, 1);
  EXPECT_EQ(p.accepted_events, 3);
  EXPECT_EQ(p.rejected_events, 1);
  EXPECT_EQ(p.total_votes, 3);
  EXPECT_EQ(p.retired_by_reason.at("vote_threshold"), 1);
  EXPECT_THROW(engine.progress("ghost"), UnknownWorkflowError);
}

// Gold bookkeeping: classifying a gold subject updates the voter's per-class
// history, which in turn drives the posterior weight of later votes.
TEST(EngineTest, GoldSubjectsTrainSkill) {
  Engine engine(engine_config({}));
  Subject gold;
  gold.id = "g1";
  gold.metadata["gold_label"] = "yes";
  add_linked_subject(engine, gold);
  const auto out = engine.process(vote_event("u1", "g1", "yes"));
  ASSERT_TRUE(out.accepted);
  EXPECT_TRUE(out.seen_gold);
  const auto prof = engine.user("u1");
  EXPECT_EQ(prof->gold_seen.at("yes"), 1);
  EXPECT_EQ(prof->gold_correct.at("yes"), 1);
  EXPECT_EQ(prof->total_classifications, 1);
}

}  // namespace
}  // namespace tally
