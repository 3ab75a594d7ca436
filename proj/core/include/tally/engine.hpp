#pragma once

#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "tally/extract.hpp"
#include "tally/lifecycle.hpp"
#include "tally/reduce.hpp"
#include "tally/rules.hpp"
#include "tally/types.hpp"

namespace tally {

struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct UnknownUserError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct UnknownWorkflowError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct NoEligibleWorkflow : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct EngineConfig {
  std::vector<Workflow> workflows;
  // Retirement and routing rules per workflow, evaluated in the order given.
  std::map<WorkflowId, std::vector<RuleConfig>> rules;
  // Optional per-workflow pipeline stage names. Unset workflows dispatch on
  // the annotation kind ("vote" or "group") and fold with the stock reducer.
  std::map<WorkflowId, std::string> extractor_overrides;
  std::map<WorkflowId, std::string> reducer_overrides;
  // Groups PromoteUser effects may name.
  std::set<std::string> known_groups = {"expert", "novice"};
  // A user counts as expert when in expert_group, or when their measured
  // true-positive rate on some binary workflow clears the bar with enough
  // gold support behind it.
  std::string expert_group = "expert";
  double expert_tpr_threshold = 0.8;
  std::int64_t expert_min_support = 5;
  std::uint64_t seed = 0;
};

struct FiredEffect {
  WorkflowId workflow_id;
  SubjectId subject_id;
  EffectSpec effect;
  // False when the expert-review gate held a retirement back.
  bool applied = true;

  friend bool operator==(const FiredEffect&, const FiredEffect&) = default;
};

struct TouchedSubject {
  SubjectId subject_id;
  std::int64_t total_votes = 0;
  std::optional<double> posterior;
  bool retired = false;
  bool held_for_expert = false;
  // Current decision: threshold outcome for posterior workflows, plurality
  // label otherwise. Empty while undecided.
  std::optional<std::string> decided_label;
};

struct ProcessOutcome {
  bool accepted = false;
  std::optional<RejectReason> reject_reason;
  EventId event_id;
  Timestamp timestamp = 0;
  // Whether the event's subject carried a gold label, stamped on acceptance.
  bool seen_gold = false;
  std::vector<FiredEffect> effects;
  std::vector<TouchedSubject> touched;
  // Page members whose reductions this event could not touch (retired, or
  // already reviewed by this user).
  std::vector<SubjectId> skipped_subjects;
};

struct AssignmentRequest {
  UserId user_id;
  WorkflowId workflow_id;
  std::size_t count = 1;
};

struct ProgressCounts {
  std::int64_t subjects = 0;
  std::int64_t pending = 0;
  std::int64_t active = 0;
  std::int64_t retired = 0;
  std::int64_t held_for_expert = 0;
  std::int64_t accepted_events = 0;
  std::int64_t rejected_events = 0;
  std::int64_t total_votes = 0;
  std::map<std::string, std::int64_t> retired_by_reason;
};

// Single-process decision engine: subject pools per workflow, the
// extract/reduce/rules pipeline, assignment queues and user records. All
// public entry points take one internal lock, so concurrent callers see each
// event's reduce-and-effects step as atomic and reads as consistent
// snapshots.
class Engine {
 public:
  explicit Engine(EngineConfig config);

  Engine(const Engine&) = delete;
  Engine& operator=(const Engine&) = delete;

  // Setup. Subjects must be added before they are linked, paged or voted on.
  void add_subject(Subject subject);
  void add_subject_to_workflow(const SubjectId& subject_id,
                               const WorkflowId& workflow_id);
  void register_grid_page(const SubjectId& page_id,
                          std::vector<SubjectId> members);
  void upsert_user(UserProfile profile);
  void register_extractor(const std::string& name, ExtractorFn fn);
  void register_reducer(const std::string& name, ReducerFn fn);

  // Runs one classification through validate -> extract -> reduce -> rules.
  // Timestamps: events arriving with timestamp 0 are stamped from the
  // engine's logical clock; replayed events keep their recorded stamp and
  // advance the clock past it.
  ProcessOutcome process(ClassificationEvent event);

  // Assignment. Serves up to request.count subjects the user has neither
  // been served nor classified in this workflow, ordered by the workflow's
  // strategy. Serving activates pending subjects and never repeats a
  // (user, workflow, subject) triple. Unknown users get a fresh profile.
  std::vector<SubjectId> next_subjects(const AssignmentRequest& request);

  // Strict query form: eligible ids in ascending order, no side effects.
  // Throws UnknownUserError / UnknownWorkflowError.
  std::vector<SubjectId> eligible_subjects(const UserId& user_id,
                                           const WorkflowId& workflow_id) const;

  // Experience-ladder routing over the configured workflows: the eligible
  // rung with the highest threshold the user clears. Throws
  // NoEligibleWorkflow when none accepts the user.
  WorkflowId route_workflow(const UserId& user_id) const;

  std::optional<Subject> subject(const SubjectId& subject_id) const;
  std::optional<SubjectStatus> status(const WorkflowId& workflow_id,
                                      const SubjectId& subject_id) const;
  std::optional<Reduction> reduction(const WorkflowId& workflow_id,
                                     const SubjectId& subject_id) const;
  std::optional<UserProfile> user(const UserId& user_id) const;
  bool user_is_expert(const UserId& user_id) const;
  std::optional<std::string> decided_label(const WorkflowId& workflow_id,
                                           const SubjectId& subject_id) const;
  ProgressCounts progress(const WorkflowId& workflow_id) const;
  std::vector<WorkflowId> workflow_ids() const;
  const Workflow& workflow(const WorkflowId& workflow_id) const;

  // Canonical state snapshot. Two engines that processed the same event
  // sequence against the same config serialize to identical bytes. Serving
  // history and generator state are intentionally left out so a replayed log
  // matches the live run that produced it.
  nlohmann::json state_dump() const;

  std::vector<std::string> drain_warnings();

 private:
  struct PoolEntry {
    SubjectId subject_id;
    SubjectStatus status;
    bool grid_member = false;
    bool held_for_expert = false;
    // Assignment-scan caches, kept in step with the subject's reduction.
    std::optional<double> machine_score;
    std::optional<double> posterior;
    double entropy = 0.0;
    std::int64_t total_votes = 0;
    bool expert_reviewed = false;
  };

  struct WorkflowState {
    Workflow config;
    std::vector<RuleConfig> rules;
    std::string extractor_name;
    std::string reducer_name;
    std::vector<PoolEntry> pool;
    std::unordered_map<SubjectId, std::size_t> index;
    std::map<SubjectId, Reduction> reductions;
    // Pool slots each user has been served or has voted on here.
    std::unordered_map<UserId, std::unordered_set<std::size_t>> seen;
    std::int64_t accepted_events = 0;
    std::int64_t rejected_events = 0;
    std::map<std::string, std::int64_t> retired_by_reason;
  };

  WorkflowState& workflow_state(const WorkflowId& id);
  const WorkflowState* find_workflow(const WorkflowId& id) const;
  PoolEntry& ensure_pool_entry(WorkflowState& ws, const SubjectId& subject_id);
  void refresh_entry_caches(WorkflowState& ws, PoolEntry& entry,
                            const Reduction& reduction);
  double effective_entropy(const WorkflowState& ws,
                           const PoolEntry& entry) const;
  bool is_expert_locked(const UserProfile& profile) const;
  std::optional<Outcome> posterior_outcome(const WorkflowState& ws,
                                           const Reduction& reduction) const;
  std::optional<std::string> decided_label_locked(
      const WorkflowState& ws, const Reduction& reduction) const;
  void apply_effect(WorkflowState& ws, const SubjectId& subject_id,
                    const UserId& user_id, const EffectSpec& effect,
                    ProcessOutcome& out);
  bool entry_eligible(const WorkflowState& ws, const PoolEntry& entry,
                      std::size_t slot, const UserId& user_id,
                      bool user_expert) const;
  ProcessOutcome reject_event(const ClassificationEvent& event,
                              WorkflowState* ws, RejectReason reason);

  mutable std::mutex mu_;
  EngineConfig cfg_;
  std::vector<WorkflowId> workflow_order_;
  std::map<WorkflowId, WorkflowState> workflows_;
  std::map<SubjectId, Subject> subjects_;
  std::map<SubjectId, std::vector<SubjectId>> grid_pages_;
  std::set<SubjectId> grid_members_;
  std::map<UserId, UserProfile> users_;
  ExtractorRegistry extractors_;
  ReducerRegistry reducers_;
  std::mt19937_64 rng_;
  Timestamp next_timestamp_ = 1;
  std::vector<std::string> warnings_;
};

}  // namespace tally
