#pragma once

#include <map>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "tally/types.hpp"

namespace tally {

// Closed comparator algebra over the reduction's flattened key space.
// Comparators take numeric children (const/lookup); and/or/not take boolean
// children. Trees are immutable and cheap to share.
class Expr {
 public:
  enum class Op { Gte, Lte, Gt, Lt, Eq, And, Or, Not, Const, Lookup };

  using Ptr = std::shared_ptr<const Expr>;

  static Ptr constant(double value);
  static Ptr lookup(std::string key);
  static Ptr comparison(Op op, Ptr lhs, Ptr rhs);
  static Ptr conjunction(std::vector<Ptr> children);  // and
  static Ptr disjunction(std::vector<Ptr> children);  // or
  static Ptr negation(Ptr child);

  Op op() const { return op_; }
  bool is_boolean() const;
  bool is_numeric() const { return !is_boolean(); }
  double const_value() const { return value_; }
  const std::string& lookup_key() const { return key_; }
  const std::vector<Ptr>& children() const { return children_; }

 private:
  Expr(Op op, double value, std::string key, std::vector<Ptr> children)
      : op_(op), value_(value), key_(std::move(key)),
        children_(std::move(children)) {}

  Op op_;
  double value_ = 0.0;
  std::string key_;
  std::vector<Ptr> children_;
};

const char* to_string(Expr::Op op);

// Numeric view of a reduction used by rule evaluation. Absent keys resolve
// to 0 so rules are evaluable before the first vote arrives.
using KeySpace = std::map<std::string, double>;

// Flattened key space:
//   total_votes            running count of class votes
//   reviewers              distinct users on the roster (pages count by this)
//   posterior              current posterior (binary workflows)
//   expert_reviewed        0/1
//   first_<k>_agree        0/1 once the agree-with-model tracker freezes
//   <task>.<label>         per-label vote counts, including <task>.anomaly
KeySpace flatten_reduction(const Reduction& reduction, const Workflow& workflow);

// Pure and total: no side effects, absent lookups read as 0.
bool evaluate_rule(const Expr& expression, const KeySpace& keys);
double evaluate_numeric(const Expr& expression, const KeySpace& keys);

struct RetireSubjectEffect {
  RetirementReason reason = RetirementReason::RuleFired;
  friend bool operator==(const RetireSubjectEffect&,
                         const RetireSubjectEffect&) = default;
};
struct AddSubjectToWorkflowEffect {
  WorkflowId workflow_id;
  friend bool operator==(const AddSubjectToWorkflowEffect&,
                         const AddSubjectToWorkflowEffect&) = default;
};
struct PromoteUserEffect {
  std::string group;
  friend bool operator==(const PromoteUserEffect&,
                         const PromoteUserEffect&) = default;
};

using EffectSpec = std::variant<RetireSubjectEffect, AddSubjectToWorkflowEffect,
                                PromoteUserEffect>;

struct RuleConfig {
  Expr::Ptr expression;
  std::vector<EffectSpec> effects;
};

}  // namespace tally
