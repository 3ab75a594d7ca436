#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "tally/rules.hpp"

namespace tally {

// JSON form of the rules DSL. The document is either a bare array or
// {"version":1,"rules":[...]}; each element is
//   {"rule": <expression>, "effects": [<effect>...]}
// Expressions are nested arrays with the operator first:
//   ["gte", ["lookup","total_votes"], ["const",10]]
// Effects are objects:
//   {"action":"retire_subject","reason":"rule_fired"}
//   {"action":"add_to_workflow","workflow":"W2"}
//   {"action":"promote_user","group":"expert"}
// Loading is atomic: any error yields zero rules.

struct RuleParseError : std::runtime_error {
  RuleParseError(const std::string& message, std::string json_path)
      : std::runtime_error(message + " at " + json_path),
        path(std::move(json_path)) {}
  std::string path;  // e.g. "$[0].rule[1]"
};

struct UnknownOperator : RuleParseError {
  using RuleParseError::RuleParseError;
};
struct ArityError : RuleParseError {
  using RuleParseError::RuleParseError;
};
struct TypeMismatch : RuleParseError {
  using RuleParseError::RuleParseError;
};
struct UnknownEffectKind : RuleParseError {
  using RuleParseError::RuleParseError;
};

Expr::Ptr parse_expression(const nlohmann::json& j, const std::string& path);
EffectSpec parse_effect(const nlohmann::json& j, const std::string& path);
std::vector<RuleConfig> parse_rules(const nlohmann::json& document);
std::vector<RuleConfig> parse_rules_text(const std::string& text);
std::vector<RuleConfig> load_rules_file(const std::string& path);

nlohmann::json expression_to_json(const Expr& expression);
nlohmann::json effect_to_json(const EffectSpec& effect);
nlohmann::json rules_to_json(const std::vector<RuleConfig>& rules);

}  // namespace tally
