#include "tally/lifecycle.hpp"

#include <algorithm>

namespace tally {

SubjectStatus transition(SubjectStatus status, const LifecycleTrigger& trigger) {
  if (std::holds_alternative<Activate>(trigger)) {
    switch (status.state) {
      case SubjectState::Pending:
        return {SubjectState::Active, std::nullopt};
      case SubjectState::Active:
        return status;  // already active
      case SubjectState::Retired:
        throw IllegalTransition("cannot activate a retired subject");
    }
  }
  const auto& retire = std::get<Retire>(trigger);
  if (status.state == SubjectState::Retired) {
    return status;  // absorbing, first reason kept
  }
  return {SubjectState::Retired, retire.reason};
}

Subject transition(Subject subject, const LifecycleTrigger& trigger) {
  SubjectStatus status{subject.state, subject.retirement_reason};
  status = transition(status, trigger);
  subject.state = status.state;
  subject.retirement_reason = status.retirement_reason;
  return subject;
}

const char* to_string(RejectReason reason) {
  switch (reason) {
    case RejectReason::SubjectRetired:
      return "subject_retired";
    case RejectReason::UnknownClass:
      return "unknown_class";
    case RejectReason::DuplicateReviewer:
      return "duplicate_reviewer";
    case RejectReason::UnknownSubject:
      return "unknown_subject";
    case RejectReason::UnknownWorkflow:
      return "unknown_workflow";
    case RejectReason::SubjectNotInWorkflow:
      return "subject_not_in_workflow";
    case RejectReason::UnknownPage:
      return "unknown_page";
    case RejectReason::AnomalyOutsidePage:
      return "anomaly_outside_page";
  }
  return "unknown";
}

std::optional<RejectReason> validate_event(
    const ClassificationEvent& event, const Workflow& workflow,
    const SubjectStatus& status, std::span<const UserId> reviewer_roster) {
  if (status.state == SubjectState::Retired) {
    return RejectReason::SubjectRetired;
  }
  if (!workflow.has_class(annotation_label(event.annotation))) {
    return RejectReason::UnknownClass;
  }
  if (std::find(reviewer_roster.begin(), reviewer_roster.end(),
                event.user_id) != reviewer_roster.end()) {
    return RejectReason::DuplicateReviewer;
  }
  return std::nullopt;
}

}  // namespace tally
