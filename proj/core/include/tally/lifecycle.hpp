#pragma once

#include <optional>
#include <span>
#include <variant>

#include "tally/types.hpp"

namespace tally {

// Subject lifecycle is tracked per workflow pool entry; the same state
// machine also governs a subject's manifest-level state.
struct SubjectStatus {
  SubjectState state = SubjectState::Pending;
  std::optional<RetirementReason> retirement_reason;

  friend bool operator==(const SubjectStatus&, const SubjectStatus&) = default;
};

struct Activate {};
struct Retire {
  RetirementReason reason;
};
using LifecycleTrigger = std::variant<Activate, Retire>;

struct IllegalTransition : std::logic_error {
  using std::logic_error::logic_error;
};

// Pending -> Active -> Retired; Retired is absorbing. Retiring a retired
// subject is a no-op that keeps the original reason. Activating a retired
// subject throws IllegalTransition.
SubjectStatus transition(SubjectStatus status, const LifecycleTrigger& trigger);

// Same machine applied to a subject's own state field.
Subject transition(Subject subject, const LifecycleTrigger& trigger);

enum class RejectReason {
  SubjectRetired,
  UnknownClass,
  DuplicateReviewer,
  UnknownSubject,
  UnknownWorkflow,
  SubjectNotInWorkflow,
  UnknownPage,
  AnomalyOutsidePage,
};

const char* to_string(RejectReason reason);

// Returns std::nullopt when the event is acceptable, a reason otherwise.
// Rejection is a value, not a fault: invalid events are expected traffic.
std::optional<RejectReason> validate_event(
    const ClassificationEvent& event, const Workflow& workflow,
    const SubjectStatus& status, std::span<const UserId> reviewer_roster);

}  // namespace tally
