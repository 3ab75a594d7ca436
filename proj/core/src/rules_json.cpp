#include "tally/rules_json.hpp"

#include <fstream>

namespace tally {

namespace {

std::string child_path(const std::string& path, std::size_t index) {
  return path + "[" + std::to_string(index) + "]";
}

RetirementReason parse_reason(const std::string& token,
                              const std::string& path) {
  if (token == "rule_fired") {
    return RetirementReason::RuleFired;
  }
  if (token == "vote_threshold") {
    return RetirementReason::VoteThreshold;
  }
  if (token == "posterior_threshold") {
    return RetirementReason::PosteriorThreshold;
  }
  if (token == "offline_filtered") {
    return RetirementReason::OfflineFiltered;
  }
  throw TypeMismatch("unknown retirement reason \"" + token + "\"", path);
}

Expr::Ptr typed(const std::string& what, const std::string& path,
                Expr::Ptr expr) {
  if (expr == nullptr) {
    throw TypeMismatch(what + " produced no expression", path);
  }
  return expr;
}

}  // namespace

Expr::Ptr parse_expression(const nlohmann::json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) {
    throw TypeMismatch("expression must be a non-empty array", path);
  }
  if (!j[0].is_string()) {
    throw TypeMismatch("operator must be a string", path);
  }
  const std::string op = j[0].get<std::string>();
  try {
    if (op == "const") {
      if (j.size() != 2) {
        throw ArityError("const takes 1 argument", path);
      }
      if (!j[1].is_number()) {
        throw TypeMismatch("const argument must be a number", child_path(path, 1));
      }
      return Expr::constant(j[1].get<double>());
    }
    if (op == "lookup") {
      if (j.size() != 2) {
        throw ArityError("lookup takes 1 argument", path);
      }
      if (!j[1].is_string()) {
        throw TypeMismatch("lookup key must be a string", child_path(path, 1));
      }
      return Expr::lookup(j[1].get<std::string>());
    }
    if (op == "gte" || op == "lte" || op == "gt" || op == "lt" || op == "eq") {
      if (j.size() != 3) {
        throw ArityError(op + " takes 2 arguments", path);
      }
      const Expr::Op eop = op == "gte"   ? Expr::Op::Gte
                           : op == "lte" ? Expr::Op::Lte
                           : op == "gt"  ? Expr::Op::Gt
                           : op == "lt"  ? Expr::Op::Lt
                                         : Expr::Op::Eq;
      return Expr::comparison(
          eop, typed(op, path, parse_expression(j[1], child_path(path, 1))),
          typed(op, path, parse_expression(j[2], child_path(path, 2))));
    }
    if (op == "and" || op == "or") {
      if (j.size() < 3) {
        throw ArityError(op + " takes at least 2 arguments", path);
      }
      std::vector<Expr::Ptr> children;
      for (std::size_t i = 1; i < j.size(); ++i) {
        children.push_back(parse_expression(j[i], child_path(path, i)));
      }
      return op == "and" ? Expr::conjunction(std::move(children))
                         : Expr::disjunction(std::move(children));
    }
    if (op == "not") {
      if (j.size() != 2) {
        throw ArityError("not takes 1 argument", path);
      }
      return Expr::negation(parse_expression(j[1], child_path(path, 1)));
    }
  } catch (const RuleParseError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    // The expression factories enforce operand types.
    throw TypeMismatch(e.what(), path);
  }
  throw UnknownOperator("unknown operator \"" + op + "\"", path);
}

EffectSpec parse_effect(const nlohmann::json& j, const std::string& path) {
  if (!j.is_object()) {
    throw TypeMismatch("effect must be an object", path);
  }
  auto action_it = j.find("action");
  if (action_it == j.end() || !action_it->is_string()) {
    throw TypeMismatch("effect needs a string \"action\"", path);
  }
  const std::string action = action_it->get<std::string>();
  const auto required_string = [&](const char* key) {
    auto it = j.find(key);
    if (it == j.end() || !it->is_string() || it->get<std::string>().empty()) {
      throw TypeMismatch(action + " needs a non-empty string \"" +
                             std::string(key) + "\"",
                         path);
    }
    return it->get<std::string>();
  };
  if (action == "retire_subject") {
    return RetireSubjectEffect{parse_reason(required_string("reason"), path)};
  }
  if (action == "add_to_workflow") {
    return AddSubjectToWorkflowEffect{required_string("workflow")};
  }
  if (action == "promote_user") {
    return PromoteUserEffect{required_string("group")};
  }
  throw UnknownEffectKind("unknown effect action \"" + action + "\"", path);
}

std::vector<RuleConfig> parse_rules(const nlohmann::json& document) {
  const nlohmann::json* rules_array = &document;
  std::string base = "$";
  if (document.is_object()) {
    auto it = document.find("rules");
    if (it == document.end()) {
      throw TypeMismatch("document must be an array or carry \"rules\"", "$");
    }
    rules_array = &*it;
    base = "$.rules";
  }
  if (!rules_array->is_array()) {
    throw TypeMismatch("rules must be an array", base);
  }
  std::vector<RuleConfig> rules;
  for (std::size_t i = 0; i < rules_array->size(); ++i) {
    const nlohmann::json& item = (*rules_array)[i];
    const std::string path = child_path(base, i);
    if (!item.is_object()) {
      throw TypeMismatch("rule entry must be an object", path);
    }
    auto rule_it = item.find("rule");
    if (rule_it == item.end()) {
      throw TypeMismatch("rule entry needs a \"rule\" expression", path);
    }
    RuleConfig rule;
    rule.expression = parse_expression(*rule_it, path + ".rule");
    if (!rule.expression->is_boolean()) {
      throw TypeMismatch("rule expression must be boolean", path + ".rule");
    }
    if (auto eff_it = item.find("effects"); eff_it != item.end()) {
      if (!eff_it->is_array()) {
        throw TypeMismatch("effects must be an array", path + ".effects");
      }
      for (std::size_t k = 0; k < eff_it->size(); ++k) {
        rule.effects.push_back(
            parse_effect((*eff_it)[k], path + ".effects[" + std::to_string(k) +
                                           "]"));
      }
    }
    rules.push_back(std::move(rule));
  }
  return rules;
}

std::vector<RuleConfig> parse_rules_text(const std::string& text) {
  nlohmann::json document = nlohmann::json::parse(text, nullptr, false);
  if (document.is_discarded()) {
    throw TypeMismatch("rules document is not valid JSON", "$");
  }
  return parse_rules(document);
}

std::vector<RuleConfig> load_rules_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open rules file: " + path);
  }
  const std::string text((std::istreambuf_iterator<char>(in)),
                         std::istreambuf_iterator<char>());
  return parse_rules_text(text);
}

nlohmann::json expression_to_json(const Expr& expression) {
  nlohmann::json j = nlohmann::json::array();
  switch (expression.op()) {
    case Expr::Op::Const:
      j.push_back("const");
      j.push_back(expression.const_value());
      return j;
    case Expr::Op::Lookup:
      j.push_back("lookup");
      j.push_back(expression.lookup_key());
      return j;
    default:
      break;
  }
  j.push_back(to_string(expression.op()));
  for (const auto& child : expression.children()) {
    j.push_back(expression_to_json(*child));
  }
  return j;
}

nlohmann::json effect_to_json(const EffectSpec& effect) {
  nlohmann::json j = nlohmann::json::object();
  if (const auto* retire = std::get_if<RetireSubjectEffect>(&effect)) {
    j["action"] = "retire_subject";
    j["reason"] = to_string(retire->reason);
  } else if (const auto* add = std::get_if<AddSubjectToWorkflowEffect>(&effect)) {
    j["action"] = "add_to_workflow";
    j["workflow"] = add->workflow_id;
  } else {
    j["action"] = "promote_user";
    j["group"] = std::get<PromoteUserEffect>(effect).group;
  }
  return j;
}

nlohmann::json rules_to_json(const std::vector<RuleConfig>& rules) {
  nlohmann::json out = nlohmann::json::array();
  for (const RuleConfig& rule : rules) {
    nlohmann::json item = nlohmann::json::object();
    item["rule"] = expression_to_json(*rule.expression);
    nlohmann::json effects = nlohmann::json::array();
    for (const EffectSpec& effect : rule.effects) {
      effects.push_back(effect_to_json(effect));
    }
    item["effects"] = std::move(effects);
    out.push_back(std::move(item));
  }
  return out;
}

}  // namespace tally
