#pragma once

#include <optional>
#include <span>
#include <vector>

#include "tally/types.hpp"

namespace tally {

// Assignment-relevant slice of a pool entry.
struct SubjectView {
  SubjectId id;
  std::optional<double> machine_score;
  // Binary entropy of the current posterior (or of the machine prior before
  // any votes).
  double entropy = 0.0;
  std::int64_t total_votes = 0;
  bool expert_reviewed = false;
};

// Ascending machine score, ties by id; subjects without a score sort last.
std::vector<SubjectId> order_by_machine_confidence(
    std::vector<SubjectView> views);

// Up to k most informative subjects: highest entropy first, ties by id.
std::vector<SubjectId> select_informative(std::vector<SubjectView> views,
                                          std::size_t k);

// Subjects an expert should look at first: those never expert-reviewed,
// nearest retirement (most votes) first, ties by id.
std::vector<SubjectId> expert_front(std::vector<SubjectView> views);

// The eligible workflow with the highest experience_threshold at or below
// the user's total_classifications (absent threshold = entry rung 0); ties
// go to the earlier workflow. Expert standing is an input because it folds
// group membership with measured skill, which the profile alone does not
// carry.
std::optional<WorkflowId> route_by_experience(const UserProfile& profile,
                                              bool is_expert,
                                              std::span<const Workflow> order);

// True when a retirement on this workflow must wait for an expert: the
// posterior decision is Reject and no expert has reviewed the subject yet.
bool expert_gate_blocks(const Reduction& reduction, const Workflow& workflow);

}  // namespace tally
