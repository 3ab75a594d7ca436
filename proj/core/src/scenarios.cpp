#include "tally/scenarios.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <unordered_map>
#include <utility>

#include "tally/engine.hpp"

namespace tally {
namespace {

// Stream tags keep the per-purpose hash draws disjoint.
constexpr std::uint64_t kTruthStream = 1;
constexpr std::uint64_t kMachineLabelStream = 2;
constexpr std::uint64_t kMachineScoreStream = 3;
constexpr std::uint64_t kVoteStream = 4;
constexpr std::uint64_t kArrivalStream = 5;
constexpr std::uint64_t kEngineStream = 6;

std::uint64_t hash64(std::uint64_t seed, std::uint64_t stream,
                     std::uint64_t rep) {
  std::uint64_t h = splitmix64(seed ^ 0x6a09e667f3bcc909ULL);
  h = splitmix64(h ^ stream);
  h = splitmix64(h ^ rep);
  return h;
}

std::string subject_name(int i) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "s%05d", i);
  return buf;
}

std::string user_name(int i) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "u%03d", i);
  return buf;
}

constexpr const char* kWorkflowId = "main";
constexpr const char* kTask = "classify";
constexpr const char* kPositive = "positive";
constexpr const char* kNegative = "negative";

struct Population {
  std::vector<VolunteerModel> volunteers;
  std::vector<UserProfile> profiles;
  std::vector<double> cumulative_weight;
  double total_weight = 0.0;
};

Population build_population(const ScenarioConfig& config) {
  Population pop;
  int index = 0;
  for (const CohortSpec& cohort : config.cohorts) {
    for (int i = 0; i < cohort.count; ++i, ++index) {
      VolunteerModel model;
      model.user_id = user_name(index);
      model.true_tpr = cohort.true_tpr;
      model.true_fpr = cohort.true_fpr;
      model.activity_weight = cohort.activity_weight;

      UserProfile profile;
      profile.user_id = model.user_id;
      if (cohort.seeded_gold_per_class > 0) {
        // Pre-run gold history at the cohort's true rates, so measured
        // skill starts at the smoothed estimate of the real thing.
        const std::int64_t seen = cohort.seeded_gold_per_class;
        profile.gold_seen[kPositive] = seen;
        profile.gold_seen[kNegative] = seen;
        profile.gold_correct[kPositive] =
            std::llround(cohort.true_tpr * static_cast<double>(seen));
        profile.gold_correct[kNegative] =
            std::llround((1.0 - cohort.true_fpr) * static_cast<double>(seen));
        profile.total_classifications = 2 * seen;
      }

      pop.total_weight += model.activity_weight;
      pop.cumulative_weight.push_back(pop.total_weight);
      pop.volunteers.push_back(std::move(model));
      pop.profiles.push_back(std::move(profile));
    }
  }
  return pop;
}

struct World {
  std::vector<bool> truth;
  std::vector<Subject> subjects;
  std::unordered_map<SubjectId, int> index;
  std::int64_t positives = 0;
};

World build_world(const ScenarioConfig& config, int rep) {
  World world;
  const auto r = static_cast<std::uint64_t>(rep);
  world.truth.resize(static_cast<std::size_t>(config.n_subjects));
  world.subjects.reserve(static_cast<std::size_t>(config.n_subjects));
  for (int i = 0; i < config.n_subjects; ++i) {
    const auto s = static_cast<std::uint64_t>(i);
    const bool truth_positive =
        hash01(config.seed, kTruthStream, r, s) < config.prevalence;
    world.truth[static_cast<std::size_t>(i)] = truth_positive;
    if (truth_positive) {
      ++world.positives;
    }

    Subject subject;
    subject.id = subject_name(i);
    const double u_label = hash01(config.seed, kMachineLabelStream, r, s);
    const double u_score = hash01(config.seed, kMachineScoreStream, r, s);
    const MachineOutput machine =
        simulate_machine_u(config.machine, truth_positive, u_label, u_score);
    if (config.machine.attach_labels) {
      subject.metadata[meta_keys::kMachineLabel] =
          machine.predicted_positive ? kPositive : kNegative;
    }
    if (config.machine.attach_scores) {
      subject.metadata[meta_keys::kMachineScore] = machine.score;
    }
    world.index.emplace(subject.id, i);
    world.subjects.push_back(std::move(subject));
  }
  return world;
}

RuleConfig vote_threshold_rule(int threshold) {
  RuleConfig rule;
  rule.expression =
      Expr::comparison(Expr::Op::Gte, Expr::lookup("total_votes"),
                       Expr::constant(static_cast<double>(threshold)));
  rule.effects = {RetireSubjectEffect{RetirementReason::VoteThreshold}};
  return rule;
}

RuleConfig agree_with_machine_rule(int k) {
  RuleConfig rule;
  rule.expression = Expr::comparison(
      Expr::Op::Eq, Expr::lookup("first_" + std::to_string(k) + "_agree"),
      Expr::constant(1.0));
  rule.effects = {RetireSubjectEffect{RetirementReason::RuleFired}};
  return rule;
}

// Posterior rules only ever run on subjects with at least one fold behind
// them, so the "posterior" key is always present by then; the absent-key
// reading of 0 never reaches the reject comparison.
std::vector<RuleConfig> posterior_rules(const ScenarioWorkflowSpec& wf) {
  RuleConfig accept;
  accept.expression =
      Expr::comparison(Expr::Op::Gte, Expr::lookup("posterior"),
                       Expr::constant(wf.accept_threshold));
  accept.effects = {RetireSubjectEffect{RetirementReason::PosteriorThreshold}};
  RuleConfig reject;
  reject.expression =
      Expr::comparison(Expr::Op::Lte, Expr::lookup("posterior"),
                       Expr::constant(wf.reject_threshold));
  reject.effects = {RetireSubjectEffect{RetirementReason::PosteriorThreshold}};
  return {accept, reject, vote_threshold_rule(wf.max_votes)};
}

Workflow base_workflow(const ScenarioConfig& config,
                       AssignmentStrategy strategy, bool binary,
                       bool expert_gate) {
  Workflow wf;
  wf.id = kWorkflowId;
  wf.task_id = kTask;
  wf.class_set = {kPositive, kNegative};
  wf.assignment_strategy = strategy;
  wf.required_reviews = config.workflow.required_reviews;
  wf.expert_review_required = expert_gate;
  wf.agree_k = config.workflow.agree_k;
  if (binary) {
    wf.positive_class = kPositive;
  }
  wf.posterior_policy.accept_threshold = config.workflow.accept_threshold;
  wf.posterior_policy.reject_threshold = config.workflow.reject_threshold;
  wf.posterior_policy.default_prior = config.workflow.default_prior;
  return wf;
}

struct ArmPlan {
  Workflow workflow;
  std::vector<RuleConfig> rules;
  bool stop_at_target = false;
  std::int64_t target_correct = 0;  // decision-accuracy stop, scaled by n
};

struct ArmResult {
  std::int64_t accepted = 0;
  std::int64_t retired = 0;
  std::int64_t labels_to_target = 0;
  bool reached_target = false;
  double decision_accuracy = 0.0;  // best-guess decisions over all subjects
  double decided_accuracy = 0.0;   // engine decided labels at stop
  double false_negative_rate = 0.0;
  std::int64_t agree_with_machine = 0;
  std::int64_t held_subjects = 0;
};

ArmResult run_arm(const ScenarioConfig& config, int rep, const World& world,
                  const Population& pop, const ArmPlan& plan) {
  const int n = config.n_subjects;
  const auto r = static_cast<std::uint64_t>(rep);

  EngineConfig engine_cfg;
  engine_cfg.workflows = {plan.workflow};
  engine_cfg.rules[kWorkflowId] = plan.rules;
  engine_cfg.seed = hash64(config.seed, kEngineStream, r);
  Engine engine(std::move(engine_cfg));
  for (const Subject& subject : world.subjects) {
    engine.add_subject(subject);
    engine.add_subject_to_workflow(subject.id, kWorkflowId);
  }
  for (const UserProfile& profile : pop.profiles) {
    engine.upsert_user(profile);
  }

  // Arrivals get their own generator per arm, seeded identically, so both
  // arms face the same visitor sequence until their pools diverge.
  std::mt19937_64 arrivals(hash64(config.seed, kArrivalStream, r));
  const auto draw_user = [&]() -> std::size_t {
    const double u = uniform01(arrivals) * pop.total_weight;
    auto it = std::lower_bound(pop.cumulative_weight.begin(),
                               pop.cumulative_weight.end(), u);
    if (it == pop.cumulative_weight.end()) {
      --it;
    }
    return static_cast<std::size_t>(it - pop.cumulative_weight.begin());
  };

  // Decision tracking: every subject carries a current best-guess label,
  // positive when its effective probability (posterior once voted, machine
  // prior before, default prior without either) is at least one half. The
  // stop target counts how many of those decisions match truth.
  std::vector<bool> decision(static_cast<std::size_t>(n), false);
  std::int64_t correct = 0;
  if (plan.workflow.is_binary()) {
    for (int i = 0; i < n; ++i) {
      const auto idx = static_cast<std::size_t>(i);
      const auto score = world.subjects[idx].machine_score();
      const double effective =
          score ? *score : plan.workflow.posterior_policy.default_prior;
      decision[idx] = effective >= 0.5;
      if (decision[idx] == world.truth[idx]) {
        ++correct;
      }
    }
  }

  std::vector<bool> retired_flag(static_cast<std::size_t>(n), false);
  std::vector<bool> held_flag(static_cast<std::size_t>(n), false);
  ArmResult result;

  const std::int64_t max_events = 64LL * n;
  const auto starvation_limit =
      static_cast<std::int64_t>(10 * pop.volunteers.size());
  std::int64_t starvation = 0;

  while (result.retired < n) {
    if (plan.stop_at_target && correct >= plan.target_correct) {
      result.reached_target = true;
      result.labels_to_target = result.accepted;
      break;
    }
    if (result.accepted >= max_events) {
      break;
    }
    const std::size_t uidx = draw_user();
    const std::vector<SubjectId> served = engine.next_subjects(
        {pop.volunteers[uidx].user_id, kWorkflowId, 1});
    if (served.empty()) {
      if (++starvation > starvation_limit) {
        break;
      }
      continue;
    }
    starvation = 0;
    const int sidx = world.index.at(served.front());
    const double u = hash01(config.seed, kVoteStream, r,
                            static_cast<std::uint64_t>(uidx),
                            static_cast<std::uint64_t>(sidx));
    const bool vote_positive = simulate_vote_u(
        pop.volunteers[uidx], world.truth[static_cast<std::size_t>(sidx)], u);

    ClassificationEvent event;
    event.user_id = pop.volunteers[uidx].user_id;
    event.subject_id = served.front();
    event.workflow_id = kWorkflowId;
    event.task_id = kTask;
    event.annotation = SingleLabel{vote_positive ? kPositive : kNegative};
    const ProcessOutcome out = engine.process(std::move(event));
    if (!out.accepted) {
      continue;
    }
    ++result.accepted;
    for (const TouchedSubject& touched : out.touched) {
      const auto tidx =
          static_cast<std::size_t>(world.index.at(touched.subject_id));
      if (touched.posterior) {
        const bool next = *touched.posterior >= 0.5;
        if (next != decision[tidx]) {
          correct += (next == world.truth[tidx]) ? 1 : -1;
          decision[tidx] = next;
        }
      }
      if (touched.held_for_expert && !held_flag[tidx]) {
        held_flag[tidx] = true;
        ++result.held_subjects;
      }
      if (touched.retired && !retired_flag[tidx]) {
        retired_flag[tidx] = true;
        ++result.retired;
      }
    }
  }

  result.decision_accuracy =
      n > 0 ? static_cast<double>(correct) / static_cast<double>(n) : 0.0;
  std::int64_t labeled = 0;
  std::int64_t labeled_correct = 0;
  std::int64_t false_negatives = 0;
  for (int i = 0; i < n; ++i) {
    const SubjectId& sid = world.subjects[static_cast<std::size_t>(i)].id;
    if (const auto label = engine.decided_label(kWorkflowId, sid)) {
      ++labeled;
      const bool positive = (*label == kPositive);
      const bool truth = world.truth[static_cast<std::size_t>(i)];
      if (positive == truth) {
        ++labeled_correct;
      }
      if (truth && !positive) {
        ++false_negatives;
      }
    }
    if (const auto red = engine.reduction(kWorkflowId, sid);
        red && red->first_k_agree_with_machine.value_or(false)) {
      ++result.agree_with_machine;
    }
  }
  result.decided_accuracy =
      labeled > 0 ? static_cast<double>(labeled_correct) / labeled : 0.0;
  result.false_negative_rate =
      world.positives > 0
          ? static_cast<double>(false_negatives) / world.positives
          : 0.0;
  return result;
}

ReplicationMetrics run_s1(const ScenarioConfig& config, int rep,
                          const World& world, const Population& pop) {
  ArmPlan baseline;
  baseline.workflow =
      base_workflow(config, AssignmentStrategy::Random, false, false);
  baseline.rules = {vote_threshold_rule(config.workflow.required_reviews)};
  ArmPlan treatment = baseline;
  treatment.rules = {agree_with_machine_rule(config.workflow.agree_k),
                     vote_threshold_rule(config.workflow.required_reviews)};

  const ArmResult base = run_arm(config, rep, world, pop, baseline);
  const ArmResult treat = run_arm(config, rep, world, pop, treatment);

  const auto n = static_cast<double>(config.n_subjects);
  const double effort_base = static_cast<double>(base.accepted) / n;
  const double effort_treat = static_cast<double>(treat.accepted) / n;
  const double agreement = static_cast<double>(treat.agree_with_machine) / n;

  ReplicationMetrics m;
  m.classifications_per_retired_subject =
      treat.retired > 0 ? static_cast<double>(treat.accepted) / treat.retired
                        : 0.0;
  m.effort_reduction_vs_baseline =
      effort_base > 0.0 ? (effort_base - effort_treat) / effort_base : 0.0;
  m.accuracy = treat.decided_accuracy;
  m.false_negative_rate = treat.false_negative_rate;
  m.labels_to_target_accuracy = 0;
  m.speedup_ratio = effort_treat > 0.0 ? effort_base / effort_treat : 0.0;
  m.extra["effort_baseline"] = effort_base;
  m.extra["effort_treatment"] = effort_treat;
  m.extra["agreement_rate"] = agreement;
  m.extra["closed_form_effort"] = closed_form_effort(
      agreement, config.workflow.agree_k, config.workflow.required_reviews);
  m.extra["accuracy_baseline"] = base.decided_accuracy;
  m.extra["accuracy_treatment"] = treat.decided_accuracy;
  return m;
}

ReplicationMetrics run_s2(const ScenarioConfig& config, int rep,
                          const World& world, const Population& pop) {
  ArmPlan gate_on;
  gate_on.workflow =
      base_workflow(config, AssignmentStrategy::Random, true, true);
  gate_on.rules = {vote_threshold_rule(config.workflow.required_reviews)};
  ArmPlan gate_off = gate_on;
  gate_off.workflow.expert_review_required = false;

  const ArmResult on = run_arm(config, rep, world, pop, gate_on);
  const ArmResult off = run_arm(config, rep, world, pop, gate_off);

  const auto n = static_cast<double>(config.n_subjects);
  const double effort_on = static_cast<double>(on.accepted) / n;
  const double effort_off = static_cast<double>(off.accepted) / n;

  ReplicationMetrics m;
  m.classifications_per_retired_subject =
      on.retired > 0 ? static_cast<double>(on.accepted) / on.retired : 0.0;
  m.effort_reduction_vs_baseline =
      effort_off > 0.0 ? (effort_off - effort_on) / effort_off : 0.0;
  m.accuracy = on.decided_accuracy;
  m.false_negative_rate = on.false_negative_rate;
  m.labels_to_target_accuracy = 0;
  m.speedup_ratio = 0.0;
  m.extra["false_negative_rate_gate_off"] = off.false_negative_rate;
  m.extra["effort_gate_on"] = effort_on;
  m.extra["effort_gate_off"] = effort_off;
  m.extra["held_subjects"] = static_cast<double>(on.held_subjects);
  m.extra["accuracy_gate_off"] = off.decided_accuracy;
  return m;
}

ReplicationMetrics run_ordering(const ScenarioConfig& config, int rep,
                                const World& world, const Population& pop,
                                AssignmentStrategy strategy) {
  ArmPlan informed;
  informed.workflow = base_workflow(config, strategy, true, false);
  informed.rules = posterior_rules(config.workflow);
  informed.stop_at_target = true;
  informed.target_correct = static_cast<std::int64_t>(
      std::ceil(config.workflow.target_accuracy *
                    static_cast<double>(config.n_subjects) -
                1e-9));
  ArmPlan random = informed;
  random.workflow.assignment_strategy = AssignmentStrategy::Random;

  const ArmResult strat = run_arm(config, rep, world, pop, informed);
  const ArmResult rand = run_arm(config, rep, world, pop, random);

  const std::int64_t strat_labels =
      strat.reached_target ? strat.labels_to_target : strat.accepted;
  const std::int64_t rand_labels =
      rand.reached_target ? rand.labels_to_target : rand.accepted;

  ReplicationMetrics m;
  m.classifications_per_retired_subject =
      strat.retired > 0 ? static_cast<double>(strat.accepted) / strat.retired
                        : 0.0;
  m.effort_reduction_vs_baseline =
      rand_labels > 0
          ? static_cast<double>(rand_labels - strat_labels) / rand_labels
          : 0.0;
  m.accuracy = strat.decision_accuracy;
  m.false_negative_rate = strat.false_negative_rate;
  m.labels_to_target_accuracy = strat_labels;
  m.speedup_ratio = strat_labels > 0 ? static_cast<double>(rand_labels) /
                                           static_cast<double>(strat_labels)
                                     : 0.0;
  m.extra["labels_to_target_accuracy_random"] =
      static_cast<double>(rand_labels);
  m.extra["accuracy_random"] = rand.decision_accuracy;
  m.extra["reached_target"] = strat.reached_target ? 1.0 : 0.0;
  m.extra["reached_target_random"] = rand.reached_target ? 1.0 : 0.0;
  return m;
}

}  // namespace

MetricsReport run_scenario(const ScenarioConfig& config) {
  validate_scenario_config(config);
  const Population pop = build_population(config);

  MetricsReport report;
  report.scenario = to_string(config.scenario);
  report.config_echo = scenario_config_to_json(config);

  std::map<std::string, double> sums;
  for (int rep = 0; rep < config.replications; ++rep) {
    const World world = build_world(config, rep);
    ReplicationMetrics metrics;
    switch (config.scenario) {
      case Scenario::S1AgreeWithModel:
        metrics = run_s1(config, rep, world, pop);
        break;
      case Scenario::S2ExpertGate:
        metrics = run_s2(config, rep, world, pop);
        break;
      case Scenario::S3ActiveLearning:
        metrics = run_ordering(config, rep, world, pop,
                               AssignmentStrategy::Uncertainty);
        break;
      case Scenario::S4ConfidenceOrder:
        metrics = run_ordering(config, rep, world, pop,
                               AssignmentStrategy::ConfidenceAscending);
        break;
    }
    metrics.replication = rep;
    for (const auto& [key, value] : metrics.as_map()) {
      sums[key] += value;
    }
    report.replications.push_back(std::move(metrics));
  }
  for (const auto& [key, value] : sums) {
    report.aggregate[key] = value / config.replications;
  }
  return report;
}

}  // namespace tally
