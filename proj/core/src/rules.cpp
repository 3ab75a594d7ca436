#include "tally/rules.hpp"

#include <cmath>
#include <stdexcept>

namespace tally {

namespace {
bool boolean_op(Expr::Op op) {
  switch (op) {
    case Expr::Op::Const:
    case Expr::Op::Lookup:
      return false;
    default:
      return true;
  }
}
}  // namespace

bool Expr::is_boolean() const { return boolean_op(op_); }

Expr::Ptr Expr::constant(double value) {
  if (!std::isfinite(value)) {
    throw std::invalid_argument("const value must be finite");
  }
  return Ptr(new Expr(Op::Const, value, {}, {}));
}

Expr::Ptr Expr::lookup(std::string key) {
  if (key.empty()) {
    throw std::invalid_argument("lookup key must be non-empty");
  }
  return Ptr(new Expr(Op::Lookup, 0.0, std::move(key), {}));
}

Expr::Ptr Expr::comparison(Op op, Ptr lhs, Ptr rhs) {
  switch (op) {
    case Op::Gte:
    case Op::Lte:
    case Op::Gt:
    case Op::Lt:
    case Op::Eq:
      break;
    default:
      throw std::invalid_argument("not a comparator");
  }
  if (!lhs || !rhs) throw std::invalid_argument("comparator child missing");
  if (lhs->is_boolean() || rhs->is_boolean()) {
    throw std::invalid_argument("comparator children must be numeric");
  }
  return Ptr(new Expr(op, 0.0, {}, {std::move(lhs), std::move(rhs)}));
}

Expr::Ptr Expr::conjunction(std::vector<Ptr> children) {
  if (children.size() < 2) {
    throw std::invalid_argument("and requires at least two children");
  }
  for (const auto& child : children) {
    if (!child || !child->is_boolean()) {
      throw std::invalid_argument("and children must be boolean");
    }
  }
  return Ptr(new Expr(Op::And, 0.0, {}, std::move(children)));
}

Expr::Ptr Expr::disjunction(std::vector<Ptr> children) {
  if (children.size() < 2) {
    throw std::invalid_argument("or requires at least two children");
  }
  for (const auto& child : children) {
    if (!child || !child->is_boolean()) {
      throw std::invalid_argument("or children must be boolean");
    }
  }
  return Ptr(new Expr(Op::Or, 0.0, {}, std::move(children)));
}

Expr::Ptr Expr::negation(Ptr child) {
  if (!child || !child->is_boolean()) {
    throw std::invalid_argument("not child must be boolean");
  }
  std::vector<Ptr> children;
  children.push_back(std::move(child));
  return Ptr(new Expr(Op::Not, 0.0, {}, std::move(children)));
}

const char* to_string(Expr::Op op) {
  switch (op) {
    case Expr::Op::Gte: return "gte";
    case Expr::Op::Lte: return "lte";
    case Expr::Op::Gt: return "gt";
    case Expr::Op::Lt: return "lt";
    case Expr::Op::Eq: return "eq";
    case Expr::Op::And: return "and";
    case Expr::Op::Or: return "or";
    case Expr::Op::Not: return "not";
    case Expr::Op::Const: return "const";
    case Expr::Op::Lookup: return "lookup";
  }
  return "unknown";
}

KeySpace flatten_reduction(const Reduction& reduction,
                           const Workflow& workflow) {
  KeySpace keys;
  keys["total_votes"] = static_cast<double>(reduction.total_votes);
  keys["reviewers"] = static_cast<double>(reduction.reviewer_ids.size());
  if (reduction.posterior) {
    keys["posterior"] = *reduction.posterior;
  }
  keys["expert_reviewed"] = reduction.expert_reviewed ? 1.0 : 0.0;
  if (reduction.first_k_agree_with_machine) {
    keys["first_" + std::to_string(workflow.agree_k) + "_agree"] =
        *reduction.first_k_agree_with_machine ? 1.0 : 0.0;
  }
  for (const auto& [label, count] : reduction.vote_counts) {
    keys[workflow.task_id + "." + label] = static_cast<double>(count);
  }
  return keys;
}

double evaluate_numeric(const Expr& expression, const KeySpace& keys) {
  switch (expression.op()) {
    case Expr::Op::Const:
      return expression.const_value();
    case Expr::Op::Lookup: {
      auto it = keys.find(expression.lookup_key());
      return it == keys.end() ? 0.0 : it->second;
    }
    default:
      throw std::logic_error("numeric evaluation of a boolean expression");
  }
}

bool evaluate_rule(const Expr& expression, const KeySpace& keys) {
  switch (expression.op()) {
    case Expr::Op::Gte:
      return evaluate_numeric(*expression.children()[0], keys) >=
             evaluate_numeric(*expression.children()[1], keys);
    case Expr::Op::Lte:
      return evaluate_numeric(*expression.children()[0], keys) <=
             evaluate_numeric(*expression.children()[1], keys);
    case Expr::Op::Gt:
      return evaluate_numeric(*expression.children()[0], keys) >
             evaluate_numeric(*expression.children()[1], keys);
    case Expr::Op::Lt:
      return evaluate_numeric(*expression.children()[0], keys) <
             evaluate_numeric(*expression.children()[1], keys);
    case Expr::Op::Eq:
      return evaluate_numeric(*expression.children()[0], keys) ==
             evaluate_numeric(*expression.children()[1], keys);
    case Expr::Op::And:
      for (const auto& child : expression.children()) {
        if (!evaluate_rule(*child, keys)) return false;
      }
      return true;
    case Expr::Op::Or:
      for (const auto& child : expression.children()) {
        if (evaluate_rule(*child, keys)) return true;
      }
      return false;
    case Expr::Op::Not:
      return !evaluate_rule(*expression.children()[0], keys);
    case Expr::Op::Const:
    case Expr::Op::Lookup:
      throw std::logic_error("boolean evaluation of a numeric expression");
  }
  return false;
}

}  // namespace tally
