#include "tally/engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "tally/aggregation.hpp"
#include "tally/designator.hpp"

namespace tally {

nlohmann::json reduction_to_json(const Reduction& r) {
  nlohmann::json j = nlohmann::json::object();
  nlohmann::json counts = nlohmann::json::object();
  for (const auto& [label, count] : r.vote_counts) {
    counts[label] = count;
  }
  j["vote_counts"] = std::move(counts);
  j["total_votes"] = r.total_votes;
  if (r.posterior.has_value()) {
    j["posterior"] = *r.posterior;
  }
  j["reviewer_ids"] = r.reviewer_ids;
  j["expert_reviewed"] = r.expert_reviewed;
  if (r.first_k_agree_with_machine.has_value()) {
    j["first_k_agree_with_machine"] = *r.first_k_agree_with_machine;
  }
  j["vote_order"] = r.vote_order;
  return j;
}

Engine::Engine(EngineConfig config) : cfg_(std::move(config)), rng_(cfg_.seed) {
  for (const auto& wf : cfg_.workflows) {
    validate_workflow(wf);
    if (workflows_.count(wf.id) > 0) {
      throw ConfigError("duplicate workflow id: " + wf.id);
    }
    WorkflowState ws;
    ws.config = wf;
    ws.reducer_name = "fold";
    workflow_order_.push_back(wf.id);
    workflows_.emplace(wf.id, std::move(ws));
  }
  for (const auto& [wid, rules] : cfg_.rules) {
    auto it = workflows_.find(wid);
    if (it == workflows_.end()) {
      throw ConfigError("rules reference unknown workflow: " + wid);
    }
    for (const auto& rule : rules) {
      for (const auto& effect : rule.effects) {
        if (const auto* add = std::get_if<AddSubjectToWorkflowEffect>(&effect)) {
          if (workflows_.count(add->workflow_id) == 0) {
            throw ConfigError("effect references unknown workflow: " +
                              add->workflow_id);
          }
        } else if (const auto* promote = std::get_if<PromoteUserEffect>(&effect)) {
          if (cfg_.known_groups.count(promote->group) == 0) {
            throw ConfigError("effect references unknown group: " +
                              promote->group);
          }
        }
      }
    }
    it->second.rules = rules;
  }
  for (const auto& [wid, name] : cfg_.extractor_overrides) {
    auto it = workflows_.find(wid);
    if (it == workflows_.end()) {
      throw ConfigError("extractor override for unknown workflow: " + wid);
    }
    it->second.extractor_name = name;
  }
  for (const auto& [wid, name] : cfg_.reducer_overrides) {
    auto it = workflows_.find(wid);
    if (it == workflows_.end()) {
      throw ConfigError("reducer override for unknown workflow: " + wid);
    }
    it->second.reducer_name = name;
  }
}

Engine::WorkflowState& Engine::workflow_state(const WorkflowId& id) {
  auto it = workflows_.find(id);
  if (it == workflows_.end()) {
    throw UnknownWorkflowError("unknown workflow: " + id);
  }
  return it->second;
}

const Engine::WorkflowState* Engine::find_workflow(const WorkflowId& id) const {
  auto it = workflows_.find(id);
  return it == workflows_.end() ? nullptr : &it->second;
}

void Engine::add_subject(Subject subject) {
  std::lock_guard lock(mu_);
  if (subject.id.empty()) {
    throw std::invalid_argument("subject id must not be empty");
  }
  validate_subject(subject);
  auto [it, inserted] = subjects_.emplace(subject.id, std::move(subject));
  if (!inserted) {
    throw std::invalid_argument("duplicate subject id: " + it->first);
  }
}

void Engine::add_subject_to_workflow(const SubjectId& subject_id,
                                     const WorkflowId& workflow_id) {
  std::lock_guard lock(mu_);
  if (subjects_.count(subject_id) == 0) {
    throw std::invalid_argument("unknown subject: " + subject_id);
  }
  ensure_pool_entry(workflow_state(workflow_id), subject_id);
}

void Engine::register_grid_page(const SubjectId& page_id,
                                std::vector<SubjectId> members) {
  std::lock_guard lock(mu_);
  if (subjects_.count(page_id) == 0) {
    throw std::invalid_argument("unknown page subject: " + page_id);
  }
  if (members.empty()) {
    throw std::invalid_argument("page " + page_id + " has no members");
  }
  if (grid_pages_.count(page_id) > 0) {
    throw std::invalid_argument("page already registered: " + page_id);
  }
  std::set<SubjectId> unique;
  for (const auto& member : members) {
    if (member == page_id) {
      throw std::invalid_argument("page " + page_id + " cannot contain itself");
    }
    if (subjects_.count(member) == 0) {
      throw std::invalid_argument("unknown page member: " + member);
    }
    if (!unique.insert(member).second) {
      throw std::invalid_argument("duplicate page member: " + member);
    }
  }
  for (auto& [wid, ws] : workflows_) {
    for (const auto& member : members) {
      auto it = ws.index.find(member);
      if (it != ws.index.end()) {
        ws.pool[it->second].grid_member = true;
      }
    }
  }
  grid_members_.insert(members.begin(), members.end());
  grid_pages_.emplace(page_id, std::move(members));
}

void Engine::upsert_user(UserProfile profile) {
  std::lock_guard lock(mu_);
  if (profile.user_id.empty()) {
    throw std::invalid_argument("user id must not be empty");
  }
  validate_profile(profile);
  profile.is_expert = is_expert_locked(profile);
  users_[profile.user_id] = std::move(profile);
}

void Engine::register_extractor(const std::string& name, ExtractorFn fn) {
  std::lock_guard lock(mu_);
  extractors_.add(name, std::move(fn));
}

void Engine::register_reducer(const std::string& name, ReducerFn fn) {
  std::lock_guard lock(mu_);
  reducers_.add(name, std::move(fn));
}

Engine::PoolEntry& Engine::ensure_pool_entry(WorkflowState& ws,
                                             const SubjectId& subject_id) {
  auto it = ws.index.find(subject_id);
  if (it != ws.index.end()) {
    return ws.pool[it->second];
  }
  const Subject& subj = subjects_.at(subject_id);
  PoolEntry entry;
  entry.subject_id = subject_id;
  entry.grid_member = grid_members_.count(subject_id) > 0;
  entry.machine_score = subj.machine_score();
  ws.pool.push_back(std::move(entry));
  ws.index.emplace(subject_id, ws.pool.size() - 1);
  PoolEntry& stored = ws.pool.back();
  stored.entropy = effective_entropy(ws, stored);
  return stored;
}

void Engine::refresh_entry_caches(WorkflowState& ws, PoolEntry& entry,
                                  const Reduction& reduction) {
  entry.posterior = reduction.posterior;
  entry.total_votes = reduction.total_votes;
  entry.expert_reviewed = reduction.expert_reviewed;
  entry.entropy = effective_entropy(ws, entry);
}

double Engine::effective_entropy(const WorkflowState& ws,
                                 const PoolEntry& entry) const {
  double p = ws.config.posterior_policy.default_prior;
  if (entry.posterior.has_value()) {
    p = *entry.posterior;
  } else if (entry.machine_score.has_value()) {
    p = *entry.machine_score;
  }
  return binary_entropy(p);
}

bool Engine::is_expert_locked(const UserProfile& profile) const {
  if (profile.groups.count(cfg_.expert_group) > 0) {
    return true;
  }
  for (const auto& [wid, ws] : workflows_) {
    if (!ws.config.is_binary()) {
      continue;
    }
    const SkillEstimate skill = estimate_skill(
        profile, *ws.config.positive_class, ws.config.negative_class());
    if (skill.positive_support >= cfg_.expert_min_support &&
        skill.tpr >= cfg_.expert_tpr_threshold) {
      return true;
    }
  }
  return false;
}

std::optional<Outcome> Engine::posterior_outcome(
    const WorkflowState& ws, const Reduction& reduction) const {
  if (!ws.config.is_binary() || !reduction.posterior.has_value()) {
    return std::nullopt;
  }
  return classify_by_posterior(*reduction.posterior,
                               ws.config.posterior_policy.accept_threshold,
                               ws.config.posterior_policy.reject_threshold);
}

std::optional<std::string> Engine::decided_label_locked(
    const WorkflowState& ws, const Reduction& reduction) const {
  if (ws.config.is_binary() && reduction.posterior.has_value()) {
    switch (*posterior_outcome(ws, reduction)) {
      case Outcome::Accept:
        return *ws.config.positive_class;
      case Outcome::Reject:
        return ws.config.negative_class();
      case Outcome::Undecided:
        return std::nullopt;
    }
  }
  std::optional<std::string> best;
  std::int64_t best_count = 0;
  for (const auto& [label, count] : reduction.vote_counts) {
    if (!ws.config.has_class(label)) {
      continue;
    }
    if (count > best_count) {
      best = label;
      best_count = count;
    }
  }
  return best;
}

ProcessOutcome Engine::reject_event(const ClassificationEvent& event,
                                    WorkflowState* ws, RejectReason reason) {
  if (ws != nullptr) {
    ws->rejected_events += 1;
  }
  ProcessOutcome out;
  out.accepted = false;
  out.reject_reason = reason;
  out.event_id = event.event_id;
  out.timestamp = event.timestamp;
  return out;
}

ProcessOutcome Engine::process(ClassificationEvent event) {
  std::lock_guard lock(mu_);
  if (event.timestamp > 0) {
    next_timestamp_ = std::max(next_timestamp_, event.timestamp + 1);
  } else {
    event.timestamp = next_timestamp_++;
  }
  if (event.event_id.empty()) {
    event.event_id = "evt-" + std::to_string(event.timestamp);
  }

  auto wit = workflows_.find(event.workflow_id);
  if (wit == workflows_.end()) {
    return reject_event(event, nullptr, RejectReason::UnknownWorkflow);
  }
  WorkflowState& ws = wit->second;
  auto sit = subjects_.find(event.subject_id);
  if (sit == subjects_.end()) {
    return reject_event(event, &ws, RejectReason::UnknownSubject);
  }
  auto slot_it = ws.index.find(event.subject_id);
  if (slot_it == ws.index.end()) {
    return reject_event(event, &ws, RejectReason::SubjectNotInWorkflow);
  }
  const std::size_t event_slot = slot_it->second;

  const bool is_group = std::holds_alternative<GroupLabel>(event.annotation);
  const std::vector<SubjectId>* page = nullptr;
  if (is_group) {
    auto pit = grid_pages_.find(event.subject_id);
    if (pit == grid_pages_.end()) {
      return reject_event(event, &ws, RejectReason::UnknownPage);
    }
    page = &pit->second;
  }

  {
    auto rit = ws.reductions.find(event.subject_id);
    const std::span<const UserId> roster =
        rit == ws.reductions.end()
            ? std::span<const UserId>{}
            : std::span<const UserId>(rit->second.reviewer_ids);
    if (auto reason = validate_event(event, ws.config,
                                     ws.pool[event_slot].status, roster)) {
      return reject_event(event, &ws, *reason);
    }
  }

  const std::string& extractor_name =
      !ws.extractor_name.empty() ? ws.extractor_name
                                 : (is_group ? std::string("group")
                                             : std::string("vote"));
  const ExtractionContext ectx{&ws.config, page};
  std::vector<Extract> extracts;
  try {
    extracts = extractors_.get(extractor_name)(event, ectx);
  } catch (const AnomalyOutsidePage&) {
    return reject_event(event, &ws, RejectReason::AnomalyOutsidePage);
  }

  ProcessOutcome out;
  out.accepted = true;
  out.event_id = event.event_id;
  out.timestamp = event.timestamp;
  out.seen_gold = sit->second.gold_label().has_value();
  event.seen_gold = out.seen_gold;
  ws.accepted_events += 1;

  UserProfile& prof = users_[event.user_id];
  if (prof.user_id.empty()) {
    prof.user_id = event.user_id;
  }
  const bool voter_expert = is_expert_locked(prof);

  // Skill is snapshotted before this event's gold bookkeeping, so a vote
  // cannot weigh itself.
  SkillEstimate skill;
  const SkillEstimate* skill_ptr = nullptr;
  if (ws.config.is_binary()) {
    skill = estimate_skill(prof, *ws.config.positive_class,
                           ws.config.negative_class());
    skill_ptr = &skill;
  }
  const ReduceContext rctx{&ws.config, voter_expert, skill_ptr, &warnings_};

  ws.seen[event.user_id].insert(event_slot);

  std::vector<SubjectId> fold_targets;
  fold_targets.push_back(event.subject_id);
  if (is_group) {
    fold_targets.insert(fold_targets.end(), page->begin(), page->end());
  }

  const ReducerFn& fold = reducers_.get(ws.reducer_name);
  std::vector<SubjectId> touched_ids;
  for (const auto& target_id : fold_targets) {
    const bool is_event_subject = target_id == event.subject_id;
    const Subject& subj = subjects_.at(target_id);
    PoolEntry& entry = ensure_pool_entry(ws, target_id);
    if (!is_event_subject) {
      if (entry.status.state == SubjectState::Retired) {
        out.skipped_subjects.push_back(target_id);
        continue;
      }
      auto rit = ws.reductions.find(target_id);
      if (rit != ws.reductions.end() &&
          rit->second.has_reviewer(event.user_id)) {
        out.skipped_subjects.push_back(target_id);
        continue;
      }
    }
    std::vector<Extract> slice;
    for (const auto& ex : extracts) {
      if (ex.subject_id == target_id) {
        slice.push_back(ex);
      }
    }
    Reduction& stored = ws.reductions[target_id];
    if (stored.subject_id.empty()) {
      stored.subject_id = target_id;
    }
    Reduction after = fold(stored, slice, event, subj, rctx);
    if (auto gold = subj.gold_label(); gold.has_value() && !slice.empty()) {
      const std::string voted = extract_label(slice.front().key, event.task_id);
      prof.gold_seen[*gold] += 1;
      if (voted == *gold) {
        prof.gold_correct[*gold] += 1;
      }
    }
    stored = std::move(after);
    if (entry.status.state == SubjectState::Pending) {
      entry.status = transition(entry.status, Activate{});
    }
    refresh_entry_caches(ws, entry, stored);
    touched_ids.push_back(target_id);
  }

  prof.total_classifications += 1;
  prof.is_expert = is_expert_locked(prof);

  for (const auto& target_id : touched_ids) {
    const KeySpace keys =
        flatten_reduction(ws.reductions.at(target_id), ws.config);
    for (const auto& rule : ws.rules) {
      if (evaluate_rule(*rule.expression, keys)) {
        for (const auto& effect : rule.effects) {
          apply_effect(ws, target_id, event.user_id, effect, out);
        }
      }
    }
  }

  for (const auto& target_id : touched_ids) {
    const PoolEntry& entry = ws.pool[ws.index.at(target_id)];
    const Reduction& red = ws.reductions.at(target_id);
    TouchedSubject t;
    t.subject_id = target_id;
    t.total_votes = red.total_votes;
    t.posterior = red.posterior;
    t.retired = entry.status.state == SubjectState::Retired;
    t.held_for_expert = entry.held_for_expert;
    t.decided_label = decided_label_locked(ws, red);
    out.touched.push_back(std::move(t));
  }
  return out;
}

void Engine::apply_effect(WorkflowState& ws, const SubjectId& subject_id,
                          const UserId& user_id, const EffectSpec& effect,
                          ProcessOutcome& out) {
  FiredEffect fired{ws.config.id, subject_id, effect, true};
  if (const auto* retire = std::get_if<RetireSubjectEffect>(&effect)) {
    PoolEntry& entry = ws.pool[ws.index.at(subject_id)];
    if (entry.status.state != SubjectState::Retired) {
      const Reduction& red = ws.reductions.at(subject_id);
      if (expert_gate_blocks(red, ws.config)) {
        // Rejections are cheap to appeal and costly to get wrong, so the
        // retirement waits until an expert has weighed in.
        entry.held_for_expert = true;
        fired.applied = false;
        out.effects.push_back(std::move(fired));
        return;
      }
      entry.status = transition(entry.status, Retire{retire->reason});
      entry.held_for_expert = false;
      ws.retired_by_reason[to_string(retire->reason)] += 1;
    }
  } else if (const auto* add = std::get_if<AddSubjectToWorkflowEffect>(&effect)) {
    ensure_pool_entry(workflows_.at(add->workflow_id), subject_id);
  } else if (const auto* promote = std::get_if<PromoteUserEffect>(&effect)) {
    UserProfile& prof = users_[user_id];
    if (prof.user_id.empty()) {
      prof.user_id = user_id;
    }
    prof.groups.insert(promote->group);
    prof.is_expert = is_expert_locked(prof);
  }
  out.effects.push_back(std::move(fired));
}

bool Engine::entry_eligible(const WorkflowState& ws, const PoolEntry& entry,
                            std::size_t slot, const UserId& user_id,
                            bool user_expert) const {
  if (entry.status.state == SubjectState::Retired) {
    return false;
  }
  if (entry.grid_member) {
    return false;
  }
  if (entry.held_for_expert && !user_expert) {
    return false;
  }
  auto sit = ws.seen.find(user_id);
  return sit == ws.seen.end() || sit->second.count(slot) == 0;
}

std::vector<SubjectId> Engine::next_subjects(const AssignmentRequest& request) {
  std::lock_guard lock(mu_);
  auto wit = workflows_.find(request.workflow_id);
  if (wit == workflows_.end()) {
    throw UnknownWorkflowError("unknown workflow: " + request.workflow_id);
  }
  WorkflowState& ws = wit->second;
  UserProfile& prof = users_[request.user_id];
  if (prof.user_id.empty()) {
    prof.user_id = request.user_id;
  }
  const bool expert = is_expert_locked(prof);
  const bool expert_front = expert && ws.config.expert_review_required;

  const auto eligible = [&](std::size_t slot) {
    return entry_eligible(ws, ws.pool[slot], slot, request.user_id, expert);
  };

  std::vector<std::size_t> picked;
  if (request.count == 1 && !ws.pool.empty()) {
    std::optional<std::size_t> choice;
    if (expert_front) {
      // Unreviewed subjects nearest retirement come first for experts.
      for (std::size_t i = 0; i < ws.pool.size(); ++i) {
        if (!eligible(i) || ws.pool[i].expert_reviewed) {
          continue;
        }
        if (!choice.has_value()) {
          choice = i;
          continue;
        }
        const PoolEntry& e = ws.pool[i];
        const PoolEntry& b = ws.pool[*choice];
        if (e.total_votes > b.total_votes ||
            (e.total_votes == b.total_votes && e.subject_id < b.subject_id)) {
          choice = i;
        }
      }
    }
    if (!choice.has_value()) {
      switch (ws.config.assignment_strategy) {
        case AssignmentStrategy::Random: {
          for (int tries = 0; tries < 64 && !choice.has_value(); ++tries) {
            const std::size_t slot =
                static_cast<std::size_t>(rng_() % ws.pool.size());
            if (eligible(slot)) {
              choice = slot;
            }
          }
          if (!choice.has_value()) {
            std::vector<std::size_t> all;
            for (std::size_t i = 0; i < ws.pool.size(); ++i) {
              if (eligible(i)) {
                all.push_back(i);
              }
            }
            if (!all.empty()) {
              choice = all[static_cast<std::size_t>(rng_() % all.size())];
            }
          }
          break;
        }
        case AssignmentStrategy::ConfidenceAscending: {
          constexpr double kNoScore = std::numeric_limits<double>::infinity();
          for (std::size_t i = 0; i < ws.pool.size(); ++i) {
            if (!eligible(i)) {
              continue;
            }
            if (!choice.has_value()) {
              choice = i;
              continue;
            }
            const PoolEntry& e = ws.pool[i];
            const PoolEntry& b = ws.pool[*choice];
            const double es = e.machine_score.value_or(kNoScore);
            const double bs = b.machine_score.value_or(kNoScore);
            if (es < bs || (es == bs && e.subject_id < b.subject_id)) {
              choice = i;
            }
          }
          break;
        }
        case AssignmentStrategy::Uncertainty: {
          for (std::size_t i = 0; i < ws.pool.size(); ++i) {
            if (!eligible(i)) {
              continue;
            }
            if (!choice.has_value()) {
              choice = i;
              continue;
            }
            const PoolEntry& e = ws.pool[i];
            const PoolEntry& b = ws.pool[*choice];
            if (e.entropy > b.entropy ||
                (e.entropy == b.entropy && e.subject_id < b.subject_id)) {
              choice = i;
            }
          }
          break;
        }
      }
    }
    if (choice.has_value()) {
      picked.push_back(*choice);
    }
  } else if (request.count > 1) {
    std::vector<std::size_t> elig;
    for (std::size_t i = 0; i < ws.pool.size(); ++i) {
      if (eligible(i)) {
        elig.push_back(i);
      }
    }
    switch (ws.config.assignment_strategy) {
      case AssignmentStrategy::Random: {
        const std::size_t take = std::min(request.count, elig.size());
        for (std::size_t k = 0; k < take; ++k) {
          const std::size_t j =
              k + static_cast<std::size_t>(rng_() % (elig.size() - k));
          std::swap(elig[k], elig[j]);
        }
        break;
      }
      case AssignmentStrategy::ConfidenceAscending: {
        constexpr double kNoScore = std::numeric_limits<double>::infinity();
        std::sort(elig.begin(), elig.end(), [&](std::size_t a, std::size_t b) {
          const double as = ws.pool[a].machine_score.value_or(kNoScore);
          const double bs = ws.pool[b].machine_score.value_or(kNoScore);
          if (as != bs) {
            return as < bs;
          }
          return ws.pool[a].subject_id < ws.pool[b].subject_id;
        });
        break;
      }
      case AssignmentStrategy::Uncertainty: {
        std::sort(elig.begin(), elig.end(), [&](std::size_t a, std::size_t b) {
          if (ws.pool[a].entropy != ws.pool[b].entropy) {
            return ws.pool[a].entropy > ws.pool[b].entropy;
          }
          return ws.pool[a].subject_id < ws.pool[b].subject_id;
        });
        break;
      }
    }
    if (expert_front) {
      std::stable_sort(elig.begin(), elig.end(),
                       [&](std::size_t a, std::size_t b) {
                         const PoolEntry& ea = ws.pool[a];
                         const PoolEntry& eb = ws.pool[b];
                         if (ea.expert_reviewed != eb.expert_reviewed) {
                           return !ea.expert_reviewed;
                         }
                         if (ea.expert_reviewed) {
                           return false;  // strategy order within the back
                         }
                         if (ea.total_votes != eb.total_votes) {
                           return ea.total_votes > eb.total_votes;
                         }
                         return ea.subject_id < eb.subject_id;
                       });
    }
    const std::size_t take = std::min(request.count, elig.size());
    picked.assign(elig.begin(), elig.begin() + static_cast<long>(take));
  }

  std::vector<SubjectId> out;
  out.reserve(picked.size());
  auto& seen = ws.seen[request.user_id];
  for (const std::size_t slot : picked) {
    PoolEntry& entry = ws.pool[slot];
    if (entry.status.state == SubjectState::Pending) {
      entry.status = transition(entry.status, Activate{});
    }
    seen.insert(slot);
    out.push_back(entry.subject_id);
  }
  return out;
}

std::vector<SubjectId> Engine::eligible_subjects(
    const UserId& user_id, const WorkflowId& workflow_id) const {
  std::lock_guard lock(mu_);
  const WorkflowState* ws = find_workflow(workflow_id);
  if (ws == nullptr) {
    throw UnknownWorkflowError("unknown workflow: " + workflow_id);
  }
  auto uit = users_.find(user_id);
  if (uit == users_.end()) {
    throw UnknownUserError("unknown user: " + user_id);
  }
  const bool expert = is_expert_locked(uit->second);
  std::vector<SubjectId> out;
  for (std::size_t i = 0; i < ws->pool.size(); ++i) {
    if (entry_eligible(*ws, ws->pool[i], i, user_id, expert)) {
      out.push_back(ws->pool[i].subject_id);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

WorkflowId Engine::route_workflow(const UserId& user_id) const {
  std::lock_guard lock(mu_);
  auto uit = users_.find(user_id);
  if (uit == users_.end()) {
    throw UnknownUserError("unknown user: " + user_id);
  }
  const UserProfile& prof = uit->second;
  std::vector<Workflow> order;
  order.reserve(workflow_order_.size());
  for (const auto& wid : workflow_order_) {
    order.push_back(workflows_.at(wid).config);
  }
  const auto routed = route_by_experience(prof, is_expert_locked(prof), order);
  if (!routed.has_value()) {
    throw NoEligibleWorkflow("no workflow accepts user " + user_id);
  }
  return *routed;
}

std::optional<Subject> Engine::subject(const SubjectId& subject_id) const {
  std::lock_guard lock(mu_);
  auto it = subjects_.find(subject_id);
  if (it == subjects_.end()) {
    return std::nullopt;
  }
  return it->second;
}

std::optional<SubjectStatus> Engine::status(const WorkflowId& workflow_id,
                                            const SubjectId& subject_id) const {
  std::lock_guard lock(mu_);
  const WorkflowState* ws = find_workflow(workflow_id);
  if (ws == nullptr) {
    return std::nullopt;
  }
  auto it = ws->index.find(subject_id);
  if (it == ws->index.end()) {
    return std::nullopt;
  }
  return ws->pool[it->second].status;
}

std::optional<Reduction> Engine::reduction(const WorkflowId& workflow_id,
                                           const SubjectId& subject_id) const {
  std::lock_guard lock(mu_);
  const WorkflowState* ws = find_workflow(workflow_id);
  if (ws == nullptr) {
    return std::nullopt;
  }
  auto it = ws->reductions.find(subject_id);
  if (it == ws->reductions.end()) {
    return std::nullopt;
  }
  return it->second;
}

std::optional<UserProfile> Engine::user(const UserId& user_id) const {
  std::lock_guard lock(mu_);
  auto it = users_.find(user_id);
  if (it == users_.end()) {
    return std::nullopt;
  }
  return it->second;
}

bool Engine::user_is_expert(const UserId& user_id) const {
  std::lock_guard lock(mu_);
  auto it = users_.find(user_id);
  return it != users_.end() && is_expert_locked(it->second);
}

std::optional<std::string> Engine::decided_label(
    const WorkflowId& workflow_id, const SubjectId& subject_id) const {
  std::lock_guard lock(mu_);
  const WorkflowState* ws = find_workflow(workflow_id);
  if (ws == nullptr) {
    return std::nullopt;
  }
  auto it = ws->reductions.find(subject_id);
  if (it == ws->reductions.end()) {
    return std::nullopt;
  }
  return decided_label_locked(*ws, it->second);
}

ProgressCounts Engine::progress(const WorkflowId& workflow_id) const {
  std::lock_guard lock(mu_);
  const WorkflowState* ws = find_workflow(workflow_id);
  if (ws == nullptr) {
    throw UnknownWorkflowError("unknown workflow: " + workflow_id);
  }
  ProgressCounts p;
  p.accepted_events = ws->accepted_events;
  p.rejected_events = ws->rejected_events;
  p.retired_by_reason = ws->retired_by_reason;
  for (const auto& entry : ws->pool) {
    p.subjects += 1;
    switch (entry.status.state) {
      case SubjectState::Pending:
        p.pending += 1;
        break;
      case SubjectState::Active:
        p.active += 1;
        break;
      case SubjectState::Retired:
        p.retired += 1;
        break;
    }
    if (entry.held_for_expert && entry.status.state != SubjectState::Retired) {
      p.held_for_expert += 1;
    }
    p.total_votes += entry.total_votes;
  }
  return p;
}

std::vector<WorkflowId> Engine::workflow_ids() const {
  std::lock_guard lock(mu_);
  return workflow_order_;
}

const Workflow& Engine::workflow(const WorkflowId& workflow_id) const {
  std::lock_guard lock(mu_);
  auto it = workflows_.find(workflow_id);
  if (it == workflows_.end()) {
    throw UnknownWorkflowError("unknown workflow: " + workflow_id);
  }
  return it->second.config;
}

nlohmann::json Engine::state_dump() const {
  std::lock_guard lock(mu_);
  nlohmann::json root = nlohmann::json::object();
  root["format"] = "tally-state";
  root["version"] = 1;
  root["clock"] = next_timestamp_;

  nlohmann::json subjects = nlohmann::json::object();
  for (const auto& [id, subj] : subjects_) {
    nlohmann::json s = nlohmann::json::object();
    s["locations"] = subj.locations;
    s["metadata"] = subj.metadata;
    s["state"] = to_string(subj.state);
    if (subj.retirement_reason.has_value()) {
      s["retirement_reason"] = to_string(*subj.retirement_reason);
    }
    subjects[id] = std::move(s);
  }
  root["subjects"] = std::move(subjects);

  nlohmann::json users = nlohmann::json::object();
  for (const auto& [id, prof] : users_) {
    nlohmann::json u = nlohmann::json::object();
    u["total_classifications"] = prof.total_classifications;
    u["gold_seen"] = prof.gold_seen;
    u["gold_correct"] = prof.gold_correct;
    u["groups"] = prof.groups;
    u["is_expert"] = prof.is_expert;
    users[id] = std::move(u);
  }
  root["users"] = std::move(users);

  nlohmann::json workflows = nlohmann::json::object();
  for (const auto& [wid, ws] : workflows_) {
    nlohmann::json w = nlohmann::json::object();
    w["accepted_events"] = ws.accepted_events;
    w["rejected_events"] = ws.rejected_events;
    w["retired_by_reason"] = ws.retired_by_reason;
    nlohmann::json pool = nlohmann::json::object();
    // Pool order is insertion order; dump in id order for a canonical form.
    std::vector<const PoolEntry*> entries;
    entries.reserve(ws.pool.size());
    for (const auto& entry : ws.pool) {
      entries.push_back(&entry);
    }
    std::sort(entries.begin(), entries.end(),
              [](const PoolEntry* a, const PoolEntry* b) {
                return a->subject_id < b->subject_id;
              });
    for (const PoolEntry* entry : entries) {
      nlohmann::json e = nlohmann::json::object();
      e["state"] = to_string(entry->status.state);
      if (entry->status.retirement_reason.has_value()) {
        e["retirement_reason"] = to_string(*entry->status.retirement_reason);
      }
      e["held_for_expert"] = entry->held_for_expert;
      e["grid_member"] = entry->grid_member;
      auto rit = ws.reductions.find(entry->subject_id);
      if (rit != ws.reductions.end()) {
        e["reduction"] = reduction_to_json(rit->second);
      }
      pool[entry->subject_id] = std::move(e);
    }
    w["subjects"] = std::move(pool);
    workflows[wid] = std::move(w);
  }
  root["workflows"] = std::move(workflows);
  return root;
}

std::vector<std::string> Engine::drain_warnings() {
  std::lock_guard lock(mu_);
  std::vector<std::string> out;
  out.swap(warnings_);
  return out;
}

}  // namespace tally
