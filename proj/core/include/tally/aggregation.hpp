#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "tally/types.hpp"

namespace tally {

// Two-rate Bernoulli confusion model with Laplace smoothing. Rates stay in
// the open interval (0,1), so Bayes denominators never vanish.
struct SkillEstimate {
  double tpr = 0.5;  // P(vote positive | truth positive)
  double fpr = 0.5;  // P(vote positive | truth negative)
  std::int64_t positive_support = 0;  // gold subjects backing tpr
  std::int64_t negative_support = 0;  // gold subjects backing fpr
};

// tpr = (correct[pos]+1)/(seen[pos]+2), fpr = (seen[neg]-correct[neg]+1)/(seen[neg]+2).
// A user with no gold history gets the symmetric prior 0.5/0.5.
SkillEstimate estimate_skill(const UserProfile& profile,
                             const std::string& positive_class,
                             const std::string& negative_class);

enum class Vote { Positive, Negative };

// One Bayes step under the two-rate confusion model. Priors of exactly 0 or
// 1 are absorbing and returned unchanged.
double update_subject_posterior(double prior, const SkillEstimate& skill,
                                Vote vote);

// machine_score when present, default_prior otherwise. default_prior must
// lie in (0,1). *warned_absorbing (optional) is set when the seed is exactly
// 0 or 1, which makes the posterior absorbing.
double seed_posterior(const Subject& subject, double default_prior,
                      bool* warned_absorbing = nullptr);

enum class Outcome { Accept, Reject, Undecided };

const char* to_string(Outcome outcome);

struct InvalidThresholds : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Accept iff posterior >= accept_threshold, Reject iff <= reject_threshold.
// Requires 0 < reject_threshold < accept_threshold < 1.
Outcome classify_by_posterior(double posterior, double accept_threshold,
                              double reject_threshold);

struct MissingMachineScore : std::runtime_error {
  explicit MissingMachineScore(std::vector<SubjectId> ids);
  std::vector<SubjectId> subject_ids;
};

struct FilterResult {
  std::vector<Subject> kept;      // machine_score >= threshold
  std::vector<Subject> rejected;  // machine_score < threshold
};

// Offline machine filter. Order is preserved within each list; the
// comparison is inclusive on the kept side. Throws MissingMachineScore
// listing every subject without a score.
FilterResult filter_manifest(const std::vector<Subject>& subjects,
                             double threshold);

// Pairwise user agreement over co-classified subjects. Entry (u,v) is the
// fraction of subjects both classified on which their labels matched; pairs
// with no shared subject are absent. Symmetric, unit diagonal for every
// user with at least one classification.
class AgreementMatrix {
 public:
  void set(const UserId& a, const UserId& b, double rate);
  std::optional<double> rate(const UserId& a, const UserId& b) const;
  const std::map<std::pair<UserId, UserId>, double>& entries() const {
    return entries_;
  }

 private:
  static std::pair<UserId, UserId> ordered(const UserId& a, const UserId& b);
  std::map<std::pair<UserId, UserId>, double> entries_;
};

// One user's label for one subject, as recorded in the classification log.
struct LabelRecord {
  UserId user_id;
  WorkflowId workflow_id;
  SubjectId subject_id;
  std::string label;
};

AgreementMatrix agreement_matrix(const std::vector<LabelRecord>& records);

// Connected components of the >= threshold agreement graph, each sorted;
// components ordered by their smallest member. Singleton users (no
// qualifying edge) form singleton groups.
std::vector<std::vector<UserId>> agreement_groups(const AgreementMatrix& matrix,
                                                  double threshold);

// Binary entropy in bits, with H(0) = H(1) = 0 by continuity.
double binary_entropy(double p);

}  // namespace tally
