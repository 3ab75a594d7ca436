#include "tally/aggregation.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

namespace tally {

SkillEstimate estimate_skill(const UserProfile& profile,
                             const std::string& positive_class,
                             const std::string& negative_class) {
  SkillEstimate estimate;
  std::int64_t pos_seen = profile.seen(positive_class);
  std::int64_t pos_correct = profile.correct(positive_class);
  std::int64_t neg_seen = profile.seen(negative_class);
  std::int64_t neg_correct = profile.correct(negative_class);

  estimate.tpr =
      static_cast<double>(pos_correct + 1) / static_cast<double>(pos_seen + 2);
  estimate.fpr = static_cast<double>(neg_seen - neg_correct + 1) /
                 static_cast<double>(neg_seen + 2);
  estimate.positive_support = pos_seen;
  estimate.negative_support = neg_seen;
  return estimate;
}

double update_subject_posterior(double prior, const SkillEstimate& skill,
                                Vote vote) {
  if (prior <= 0.0 || prior >= 1.0) {
    return prior;  // absorbing boundary
  }
  double like_pos, like_neg;
  if (vote == Vote::Positive) {
    like_pos = skill.tpr;
    like_neg = skill.fpr;
  } else {
    like_pos = 1.0 - skill.tpr;
    like_neg = 1.0 - skill.fpr;
  }
  double numerator = prior * like_pos;
  double denominator = numerator + (1.0 - prior) * like_neg;
  return numerator / denominator;
}

double seed_posterior(const Subject& subject, double default_prior,
                      bool* warned_absorbing) {
  if (!(default_prior > 0.0 && default_prior < 1.0)) {
    throw std::invalid_argument("default_prior must lie in (0,1)");
  }
  if (warned_absorbing) *warned_absorbing = false;
  auto score = subject.machine_score();
  if (!score) return default_prior;
  if ((*score == 0.0 || *score == 1.0) && warned_absorbing) {
    *warned_absorbing = true;
  }
  return *score;
}

const char* to_string(Outcome outcome) {
  switch (outcome) {
    case Outcome::Accept:
      return "accept";
    case Outcome::Reject:
      return "reject";
    case Outcome::Undecided:
      return "undecided";
  }
  return "unknown";
}

Outcome classify_by_posterior(double posterior, double accept_threshold,
                              double reject_threshold) {
  if (!(0.0 < reject_threshold && reject_threshold < accept_threshold &&
        accept_threshold < 1.0)) {
    throw InvalidThresholds("thresholds must satisfy 0 < reject < accept < 1");
  }
  if (posterior >= accept_threshold) return Outcome::Accept;
  if (posterior <= reject_threshold) return Outcome::Reject;
  return Outcome::Undecided;
}

namespace {
std::string join_ids(const std::vector<SubjectId>& ids) {
  std::ostringstream out;
  for (size_t i = 0; i < ids.size(); ++i) {
    if (i) out << ", ";
    out << ids[i];
  }
  return out.str();
}
}  // namespace

MissingMachineScore::MissingMachineScore(std::vector<SubjectId> ids)
    : std::runtime_error("subjects missing machine_score: " + join_ids(ids)),
      subject_ids(std::move(ids)) {}

FilterResult filter_manifest(const std::vector<Subject>& subjects,
                             double threshold) {
  std::vector<SubjectId> missing;
  for (const auto& subject : subjects) {
    if (!subject.machine_score()) missing.push_back(subject.id);
  }
  if (!missing.empty()) {
    throw MissingMachineScore(std::move(missing));
  }
  FilterResult result;
  for (const auto& subject : subjects) {
    if (*subject.machine_score() >= threshold) {
      result.kept.push_back(subject);
    } else {
      result.rejected.push_back(subject);
    }
  }
  return result;
}

std::pair<UserId, UserId> AgreementMatrix::ordered(const UserId& a,
                                                   const UserId& b) {
  return a <= b ? std::make_pair(a, b) : std::make_pair(b, a);
}

void AgreementMatrix::set(const UserId& a, const UserId& b, double rate) {
  entries_[ordered(a, b)] = rate;
}

std::optional<double> AgreementMatrix::rate(const UserId& a,
                                            const UserId& b) const {
  auto it = entries_.find(ordered(a, b));
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

AgreementMatrix agreement_matrix(const std::vector<LabelRecord>& records) {
  // (workflow, subject) -> votes by user
  std::map<std::pair<WorkflowId, SubjectId>, std::map<UserId, std::string>>
      by_subject;
  std::set<UserId> users;
  for (const auto& record : records) {
    by_subject[{record.workflow_id, record.subject_id}][record.user_id] =
        record.label;
    users.insert(record.user_id);
  }

  std::map<std::pair<UserId, UserId>, std::pair<std::int64_t, std::int64_t>>
      shared;  // (matched, total)
  for (const auto& [key, votes] : by_subject) {
    for (auto it = votes.begin(); it != votes.end(); ++it) {
      for (auto jt = std::next(it); jt != votes.end(); ++jt) {
        auto& counts = shared[{it->first, jt->first}];
        counts.second += 1;
        if (it->second == jt->second) counts.first += 1;
      }
    }
  }

  AgreementMatrix matrix;
  for (const auto& user : users) {
    matrix.set(user, user, 1.0);
  }
  for (const auto& [pair, counts] : shared) {
    matrix.set(pair.first, pair.second,
               static_cast<double>(counts.first) /
                   static_cast<double>(counts.second));
  }
  return matrix;
}

std::vector<std::vector<UserId>> agreement_groups(const AgreementMatrix& matrix,
                                                  double threshold) {
  std::map<UserId, UserId> parent;
  std::function<UserId(const UserId&)> find = [&](const UserId& u) -> UserId {
    auto it = parent.find(u);
    if (it == parent.end()) {
      parent[u] = u;
      return u;
    }
    if (it->second == u) return u;
    UserId root = find(it->second);
    parent[u] = root;
    return root;
  };

  for (const auto& [pair, rate] : matrix.entries()) {
    find(pair.first);
    find(pair.second);
    if (pair.first != pair.second && rate >= threshold) {
      parent[find(pair.first)] = find(pair.second);
    }
  }

  std::map<UserId, std::vector<UserId>> components;
  for (const auto& [user, _] : parent) {
    components[find(user)].push_back(user);
  }
  std::vector<std::vector<UserId>> groups;
  for (auto& [_, members] : components) {
    std::sort(members.begin(), members.end());
    groups.push_back(std::move(members));
  }
  std::sort(groups.begin(), groups.end(),
            [](const auto& a, const auto& b) { return a.front() < b.front(); });
  return groups;
}

double binary_entropy(double p) {
  if (p <= 0.0 || p >= 1.0) return 0.0;
  return -p * std::log2(p) - (1.0 - p) * std::log2(1.0 - p);
}

}  // namespace tally
