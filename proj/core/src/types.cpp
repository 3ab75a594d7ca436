#include "tally/types.hpp"

#include <algorithm>

namespace tally {

const char* to_string(SubjectState state) {
  switch (state) {
    case SubjectState::Pending:
      return "pending";
    case SubjectState::Active:
      return "active";
    case SubjectState::Retired:
      return "retired";
  }
  return "unknown";
}

const char* to_string(RetirementReason reason) {
  switch (reason) {
    case RetirementReason::RuleFired:
      return "rule_fired";
    case RetirementReason::VoteThreshold:
      return "vote_threshold";
    case RetirementReason::PosteriorThreshold:
      return "posterior_threshold";
    case RetirementReason::OfflineFiltered:
      return "offline_filtered";
  }
  return "unknown";
}

const char* to_string(AssignmentStrategy strategy) {
  switch (strategy) {
    case AssignmentStrategy::Random:
      return "random";
    case AssignmentStrategy::ConfidenceAscending:
      return "confidence_ascending";
    case AssignmentStrategy::Uncertainty:
      return "uncertainty";
  }
  return "unknown";
}

std::optional<double> Subject::machine_score() const {
  auto it = metadata.find(meta_keys::kMachineScore);
  if (it == metadata.end() || it->is_null()) return std::nullopt;
  return it->get<double>();
}

std::optional<std::string> Subject::machine_label() const {
  auto it = metadata.find(meta_keys::kMachineLabel);
  if (it == metadata.end() || it->is_null()) return std::nullopt;
  return it->get<std::string>();
}

std::optional<std::int64_t> Subject::cluster_id() const {
  auto it = metadata.find(meta_keys::kClusterId);
  if (it == metadata.end() || it->is_null()) return std::nullopt;
  return it->get<std::int64_t>();
}

std::optional<std::string> Subject::gold_label() const {
  auto it = metadata.find(meta_keys::kGoldLabel);
  if (it == metadata.end() || it->is_null()) return std::nullopt;
  return it->get<std::string>();
}

void validate_subject(const Subject& subject) {
  if (subject.id.empty()) {
    throw std::invalid_argument("subject id must be non-empty");
  }
  if (!subject.metadata.is_object()) {
    throw std::invalid_argument("subject " + subject.id +
                                ": metadata must be a JSON object");
  }
  auto score = subject.metadata.find(meta_keys::kMachineScore);
  if (score != subject.metadata.end() && !score->is_null()) {
    if (!score->is_number()) {
      throw std::invalid_argument("subject " + subject.id +
                                  ": machine_score must be numeric");
    }
    double v = score->get<double>();
    if (v < 0.0 || v > 1.0) {
      throw std::invalid_argument("subject " + subject.id +
                                  ": machine_score outside [0,1]");
    }
  }
  auto label = subject.metadata.find(meta_keys::kMachineLabel);
  if (label != subject.metadata.end() && !label->is_null() &&
      !label->is_string()) {
    throw std::invalid_argument("subject " + subject.id +
                                ": machine_label must be a string");
  }
  auto cluster = subject.metadata.find(meta_keys::kClusterId);
  if (cluster != subject.metadata.end() && !cluster->is_null() &&
      !cluster->is_number_integer()) {
    throw std::invalid_argument("subject " + subject.id +
                                ": cluster_id must be an integer");
  }
  auto gold = subject.metadata.find(meta_keys::kGoldLabel);
  if (gold != subject.metadata.end() && !gold->is_null() &&
      !gold->is_string()) {
    throw std::invalid_argument("subject " + subject.id +
                                ": gold_label must be a string");
  }
}

bool Workflow::has_class(const std::string& name) const {
  return std::find(class_set.begin(), class_set.end(), name) !=
         class_set.end();
}

const std::string& Workflow::negative_class() const {
  if (!positive_class || class_set.size() != 2) {
    throw std::logic_error("workflow " + id + " is not binary");
  }
  return class_set[0] == *positive_class ? class_set[1] : class_set[0];
}

void validate_workflow(const Workflow& workflow) {
  if (workflow.id.empty()) {
    throw std::invalid_argument("workflow id must be non-empty");
  }
  if (workflow.class_set.empty()) {
    throw std::invalid_argument("workflow " + workflow.id +
                                ": class_set must be non-empty");
  }
  std::set<std::string> seen;
  for (const auto& name : workflow.class_set) {
    if (name == kAnomalyLabel) {
      throw std::invalid_argument("workflow " + workflow.id +
                                  ": class name 'anomaly' is reserved");
    }
    if (!seen.insert(name).second) {
      throw std::invalid_argument("workflow " + workflow.id +
                                  ": duplicate class '" + name + "'");
    }
  }
  if (workflow.required_reviews < 1) {
    throw std::invalid_argument("workflow " + workflow.id +
                                ": required_reviews must be >= 1");
  }
  if (workflow.agree_k < 1) {
    throw std::invalid_argument("workflow " + workflow.id +
                                ": agree_k must be >= 1");
  }
  if (workflow.positive_class) {
    if (workflow.class_set.size() != 2) {
      throw std::invalid_argument(
          "workflow " + workflow.id +
          ": positive_class requires exactly two classes");
    }
    if (!workflow.has_class(*workflow.positive_class)) {
      throw std::invalid_argument("workflow " + workflow.id +
                                  ": positive_class not in class_set");
    }
    const auto& policy = workflow.posterior_policy;
    if (!(0.0 < policy.reject_threshold &&
          policy.reject_threshold < policy.accept_threshold &&
          policy.accept_threshold < 1.0)) {
      throw std::invalid_argument(
          "workflow " + workflow.id +
          ": posterior thresholds must satisfy 0 < reject < accept < 1");
    }
    if (!(0.0 < policy.default_prior && policy.default_prior < 1.0)) {
      throw std::invalid_argument("workflow " + workflow.id +
                                  ": default_prior must lie in (0,1)");
    }
  }
}

const std::string& annotation_label(const Annotation& annotation) {
  if (const auto* single = std::get_if<SingleLabel>(&annotation)) {
    return single->label;
  }
  return std::get<GroupLabel>(annotation).label;
}

std::int64_t UserProfile::seen(const std::string& class_name) const {
  auto it = gold_seen.find(class_name);
  return it == gold_seen.end() ? 0 : it->second;
}

std::int64_t UserProfile::correct(const std::string& class_name) const {
  auto it = gold_correct.find(class_name);
  return it == gold_correct.end() ? 0 : it->second;
}

void validate_profile(const UserProfile& profile) {
  for (const auto& [class_name, correct] : profile.gold_correct) {
    auto it = profile.gold_seen.find(class_name);
    std::int64_t seen = it == profile.gold_seen.end() ? 0 : it->second;
    if (correct > seen) {
      throw std::invalid_argument("user " + profile.user_id + ": gold_correct[" +
                                  class_name + "] exceeds gold_seen");
    }
  }
}

bool Reduction::has_reviewer(const UserId& user_id) const {
  return std::find(reviewer_ids.begin(), reviewer_ids.end(), user_id) !=
         reviewer_ids.end();
}

}  // namespace tally
