#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

namespace tally {

using SubjectId = std::string;
using UserId = std::string;
using WorkflowId = std::string;
using EventId = std::string;
using Timestamp = std::int64_t;

// Subject metadata is an open key/value object; the engine only interprets
// the keys below and carries everything else through untouched.
using Metadata = nlohmann::json;

namespace meta_keys {
inline constexpr const char* kMachineScore = "machine_score";
inline constexpr const char* kMachineLabel = "machine_label";
inline constexpr const char* kClusterId = "cluster_id";
inline constexpr const char* kGoldLabel = "gold_label";
}  // namespace meta_keys

enum class SubjectState { Pending, Active, Retired };

enum class RetirementReason {
  RuleFired,
  VoteThreshold,
  PosteriorThreshold,
  OfflineFiltered,
};

const char* to_string(SubjectState state);
const char* to_string(RetirementReason reason);

struct Subject {
  SubjectId id;
  std::vector<std::string> locations;
  Metadata metadata = Metadata::object();
  SubjectState state = SubjectState::Pending;
  std::optional<RetirementReason> retirement_reason;

  std::optional<double> machine_score() const;
  std::optional<std::string> machine_label() const;
  std::optional<std::int64_t> cluster_id() const;
  std::optional<std::string> gold_label() const;
};

// Throws std::invalid_argument when an interpreted metadata key is malformed
// (machine_score outside [0,1], wrong JSON types).
void validate_subject(const Subject& subject);

enum class AssignmentStrategy { Random, ConfidenceAscending, Uncertainty };

const char* to_string(AssignmentStrategy strategy);

// Accept/reject cutoffs applied to a binary workflow's subject posterior.
struct PosteriorPolicy {
  double accept_threshold = 0.95;
  double reject_threshold = 0.02;
  double default_prior = 0.5;
};

struct Workflow {
  WorkflowId id;
  std::string task_id;
  std::vector<std::string> class_set;
  AssignmentStrategy assignment_strategy = AssignmentStrategy::Random;
  int required_reviews = 1;
  bool expert_review_required = false;
  bool requires_expert = false;  // entry requirement used by experience routing
  std::optional<std::int64_t> experience_threshold;

  // Binary-task convention: when set, the posterior tracks this class.
  // Only valid for two-class workflows.
  std::optional<std::string> positive_class;
  PosteriorPolicy posterior_policy;

  // Number of leading votes compared against the machine label by the
  // agree-with-model tracker. Exposed to rules as "first_<k>_agree".
  int agree_k = 2;

  bool has_class(const std::string& name) const;
  bool is_binary() const { return positive_class.has_value(); }
  // The non-positive class of a binary workflow.
  const std::string& negative_class() const;
};

// Throws std::invalid_argument on violations: empty or duplicated class_set,
// required_reviews < 1, positive_class outside the class set or on a
// non-two-class workflow, bad posterior thresholds, agree_k < 1. The class
// token "anomaly" is reserved for group extraction.
void validate_workflow(const Workflow& workflow);

struct SingleLabel {
  std::string label;
  friend bool operator==(const SingleLabel&, const SingleLabel&) = default;
};

struct GroupLabel {
  std::string label;
  std::set<SubjectId> anomaly_subject_ids;
  friend bool operator==(const GroupLabel&, const GroupLabel&) = default;
};

using Annotation = std::variant<SingleLabel, GroupLabel>;

// Class name carried by either annotation kind.
const std::string& annotation_label(const Annotation& annotation);

struct ClassificationEvent {
  EventId event_id;
  UserId user_id;
  SubjectId subject_id;
  WorkflowId workflow_id;
  std::string task_id;
  Annotation annotation;
  Timestamp timestamp = 0;  // logical, assigned at ingestion
  bool seen_gold = false;
};

struct UserProfile {
  UserId user_id;
  // Per-class gold history: how many gold subjects of class c the user saw,
  // and on how many of those their vote matched c.
  std::map<std::string, std::int64_t> gold_seen;
  std::map<std::string, std::int64_t> gold_correct;
  std::int64_t total_classifications = 0;
  std::set<std::string> groups;
  bool is_expert = false;

  std::int64_t seen(const std::string& class_name) const;
  std::int64_t correct(const std::string& class_name) const;
};

// Throws std::invalid_argument when gold_correct[c] > gold_seen[c].
void validate_profile(const UserProfile& profile);

// Per-subject consensus state folded from extracts.
struct Reduction {
  SubjectId subject_id;
  std::map<std::string, std::int64_t> vote_counts;  // label token -> count
  std::int64_t total_votes = 0;                     // class votes only
  std::optional<double> posterior;                  // binary workflows only
  std::vector<UserId> reviewer_ids;
  bool expert_reviewed = false;
  std::optional<bool> first_k_agree_with_machine;

  // Class-vote labels in arrival order; feeds the agree-with-model tracker.
  // Anomaly flags are counted in vote_counts but not recorded here.
  std::vector<std::string> vote_order;

  bool has_reviewer(const UserId& user_id) const;
};

// Label token used for group-page anomaly flags, reserved in class sets.
inline constexpr const char* kAnomalyLabel = "anomaly";

}  // namespace tally
