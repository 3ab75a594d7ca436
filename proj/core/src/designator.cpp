#include "tally/designator.hpp"

#include <algorithm>
#include <limits>

#include "tally/aggregation.hpp"

namespace tally {

std::vector<SubjectId> order_by_machine_confidence(
    std::vector<SubjectView> views) {
  constexpr double kNoScore = std::numeric_limits<double>::infinity();
  std::sort(views.begin(), views.end(),
            [&](const SubjectView& a, const SubjectView& b) {
              const double as = a.machine_score.value_or(kNoScore);
              const double bs = b.machine_score.value_or(kNoScore);
              if (as != bs) {
                return as < bs;
              }
              return a.id < b.id;
            });
  std::vector<SubjectId> out;
  out.reserve(views.size());
  for (auto& v : views) {
    out.push_back(std::move(v.id));
  }
  return out;
}

std::vector<SubjectId> select_informative(std::vector<SubjectView> views,
                                          std::size_t k) {
  std::sort(views.begin(), views.end(),
            [](const SubjectView& a, const SubjectView& b) {
              if (a.entropy != b.entropy) {
                return a.entropy > b.entropy;
              }
              return a.id < b.id;
            });
  if (views.size() > k) {
    views.resize(k);
  }
  std::vector<SubjectId> out;
  out.reserve(views.size());
  for (auto& v : views) {
    out.push_back(std::move(v.id));
  }
  return out;
}

std::vector<SubjectId> expert_front(std::vector<SubjectView> views) {
  std::erase_if(views,
                [](const SubjectView& v) { return v.expert_reviewed; });
  std::sort(views.begin(), views.end(),
            [](const SubjectView& a, const SubjectView& b) {
              if (a.total_votes != b.total_votes) {
                return a.total_votes > b.total_votes;
              }
              return a.id < b.id;
            });
  std::vector<SubjectId> out;
  out.reserve(views.size());
  for (auto& v : views) {
    out.push_back(std::move(v.id));
  }
  return out;
}

std::optional<WorkflowId> route_by_experience(const UserProfile& profile,
                                              bool is_expert,
                                              std::span<const Workflow> order) {
  // Highest rung the user clears; a workflow without a threshold is an
  // entry-level rung. Ties go to the earlier workflow in the given order.
  const Workflow* best = nullptr;
  for (const Workflow& wf : order) {
    if (wf.requires_expert && !is_expert) {
      continue;
    }
    const std::int64_t rung = wf.experience_threshold.value_or(0);
    if (profile.total_classifications < rung) {
      continue;
    }
    if (best == nullptr || rung > best->experience_threshold.value_or(0)) {
      best = &wf;
    }
  }
  if (best == nullptr) {
    return std::nullopt;
  }
  return best->id;
}

bool expert_gate_blocks(const Reduction& reduction, const Workflow& workflow) {
  if (!workflow.expert_review_required || reduction.expert_reviewed) {
    return false;
  }
  if (!workflow.is_binary() || !reduction.posterior.has_value()) {
    return false;
  }
  return classify_by_posterior(*reduction.posterior,
                               workflow.posterior_policy.accept_threshold,
                               workflow.posterior_policy.reject_threshold) ==
         Outcome::Reject;
}

}  // namespace tally
