#include "tally/reduce.hpp"

#include <cmath>

namespace tally {

Reduction reduce(const Reduction& reduction, std::span<const Extract> extracts,
                 const ClassificationEvent& event, const Subject& subject,
                 const ReduceContext& ctx) {
  const Workflow& wf = *ctx.workflow;
  Reduction out = reduction;
  if (out.subject_id.empty()) {
    out.subject_id = subject.id;
  }
  if (!out.has_reviewer(event.user_id)) {
    out.reviewer_ids.push_back(event.user_id);
  }
  for (const Extract& ex : extracts) {
    if (ex.subject_id != subject.id) {
      continue;
    }
    const std::string label = extract_label(ex.key, event.task_id);
    out.vote_counts[label] += static_cast<std::int64_t>(std::llround(ex.value));
    if (label == kAnomalyLabel) {
      continue;
    }
    out.total_votes += 1;
    out.vote_order.push_back(label);
    if (wf.is_binary()) {
      double prior;
      if (out.posterior.has_value()) {
        prior = *out.posterior;
      } else {
        bool warned = false;
        prior = seed_posterior(subject, wf.posterior_policy.default_prior,
                               &warned);
        if (warned && ctx.warnings != nullptr) {
          ctx.warnings->push_back("subject " + subject.id +
                                  " starts from an absorbing prior of " +
                                  std::to_string(prior));
        }
      }
      if (ctx.voter_skill != nullptr) {
        const Vote vote = (label == *wf.positive_class) ? Vote::Positive
                                                        : Vote::Negative;
        out.posterior = update_subject_posterior(prior, *ctx.voter_skill, vote);
      } else {
        out.posterior = prior;
      }
    }
  }
  out.expert_reviewed = out.expert_reviewed || ctx.voter_is_expert;
  if (!out.first_k_agree_with_machine.has_value() &&
      subject.machine_label().has_value()) {
    out.first_k_agree_with_machine =
        track_agree_with_machine(out, subject, wf.agree_k);
  }
  return out;
}

std::optional<bool> track_agree_with_machine(const Reduction& reduction,
                                             const Subject& subject,
                                             std::int64_t k) {
  const auto machine = subject.machine_label();
  if (!machine.has_value()) {
    throw MissingMachineLabel("subject " + subject.id +
                              " has no machine label to agree with");
  }
  if (reduction.total_votes < k) {
    return std::nullopt;
  }
  for (std::int64_t i = 0; i < k; ++i) {
    if (reduction.vote_order[static_cast<std::size_t>(i)] != *machine) {
      return false;
    }
  }
  return true;
}

ReducerRegistry::ReducerRegistry() {
  fns_["fold"] = [](const Reduction& r, std::span<const Extract> ex,
                    const ClassificationEvent& ev, const Subject& s,
                    const ReduceContext& ctx) {
    return reduce(r, ex, ev, s, ctx);
  };
}

void ReducerRegistry::add(const std::string& name, ReducerFn fn) {
  fns_[name] = std::move(fn);
}

const ReducerFn& ReducerRegistry::get(const std::string& name) const {
  auto it = fns_.find(name);
  if (it == fns_.end()) {
    throw std::invalid_argument("unknown reducer: " + name);
  }
  return it->second;
}

bool ReducerRegistry::contains(const std::string& name) const {
  return fns_.count(name) > 0;
}

}  // namespace tally
