#pragma once

#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tally/aggregation.hpp"
#include "tally/extract.hpp"
#include "tally/types.hpp"

namespace tally {

struct MissingMachineLabel : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ReduceContext {
  const Workflow* workflow = nullptr;
  bool voter_is_expert = false;
  // Skill of the classifying user, present when the workflow keeps a
  // posterior. Estimated against workflow.positive_class.
  const SkillEstimate* voter_skill = nullptr;
  std::vector<std::string>* warnings = nullptr;
};

// Folds one event's extracts for one subject into its reduction. Pure: the
// input reduction is not mutated. Class votes bump vote_counts, total_votes
// and vote_order; anomaly flags bump vote_counts only. Binary workflows with
// a machine prior also fold the vote into the posterior, and workflows with
// a machine label freeze first_k_agree_with_machine once agree_k votes are
// in. The caller guarantees the event's user is not already on the roster.
Reduction reduce(const Reduction& reduction, std::span<const Extract> extracts,
                 const ClassificationEvent& event, const Subject& subject,
                 const ReduceContext& ctx);

// First agree_k class votes all matched the subject's machine label. Empty
// until k votes are in; the reducer freezes the value at that point, so later
// votes cannot change it. Throws MissingMachineLabel when the subject has no
// machine label to compare against.
std::optional<bool> track_agree_with_machine(const Reduction& reduction,
                                             const Subject& subject,
                                             std::int64_t k);

using ReducerFn = std::function<Reduction(
    const Reduction&, std::span<const Extract>, const ClassificationEvent&,
    const Subject&, const ReduceContext&)>;

class ReducerRegistry {
 public:
  ReducerRegistry();
  void add(const std::string& name, ReducerFn fn);
  const ReducerFn& get(const std::string& name) const;
  bool contains(const std::string& name) const;

 private:
  std::map<std::string, ReducerFn> fns_;
};

// Canonical JSON encoding of a reduction, shared by the state dump and the
// serving API. Optional fields appear only when set.
nlohmann::json reduction_to_json(const Reduction& reduction);

}  // namespace tally
