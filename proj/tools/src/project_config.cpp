#include "project_config.hpp"

#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "tally/manifest.hpp"
#include "tally/rules_json.hpp"

namespace tally::cli {

namespace {

namespace fs = std::filesystem;

AssignmentStrategy strategy_from_string(const std::string& token) {
  if (token == "random") {
    return AssignmentStrategy::Random;
  }
  if (token == "confidence_ascending") {
    return AssignmentStrategy::ConfidenceAscending;
  }
  if (token == "uncertainty") {
    return AssignmentStrategy::Uncertainty;
  }
  throw std::runtime_error("unknown assignment strategy: " + token);
}

std::string require_string(const nlohmann::json& j, const char* key,
                           const std::string& where) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_string()) {
    throw std::runtime_error(where + " needs a string \"" + key + "\"");
  }
  return it->get<std::string>();
}

Workflow parse_workflow(const nlohmann::json& j) {
  if (!j.is_object()) {
    throw std::runtime_error("workflow entries must be objects");
  }
  Workflow wf;
  wf.id = require_string(j, "id", "workflow");
  wf.task_id = require_string(j, "task", "workflow " + wf.id);
  auto classes = j.find("classes");
  if (classes == j.end() || !classes->is_array()) {
    throw std::runtime_error("workflow " + wf.id +
                             " needs a \"classes\" array");
  }
  for (const auto& c : *classes) {
    if (!c.is_string()) {
      throw std::runtime_error("workflow " + wf.id +
                               " classes must be strings");
    }
    wf.class_set.push_back(c.get<std::string>());
  }
  if (auto it = j.find("strategy"); it != j.end()) {
    wf.assignment_strategy = strategy_from_string(it->get<std::string>());
  }
  wf.required_reviews = j.value("required_reviews", wf.required_reviews);
  wf.agree_k = j.value("agree_k", wf.agree_k);
  wf.expert_review_required =
      j.value("expert_review_required", wf.expert_review_required);
  wf.requires_expert = j.value("requires_expert", wf.requires_expert);
  if (auto it = j.find("experience_threshold");
      it != j.end() && !it->is_null()) {
    wf.experience_threshold = it->get<std::int64_t>();
  }
  if (auto it = j.find("positive_class"); it != j.end() && !it->is_null()) {
    wf.positive_class = it->get<std::string>();
  }
  wf.posterior_policy.accept_threshold =
      j.value("accept_threshold", wf.posterior_policy.accept_threshold);
  wf.posterior_policy.reject_threshold =
      j.value("reject_threshold", wf.posterior_policy.reject_threshold);
  wf.posterior_policy.default_prior =
      j.value("default_prior", wf.posterior_policy.default_prior);
  return wf;
}

UserProfile parse_user(const nlohmann::json& j) {
  UserProfile profile;
  profile.user_id = require_string(j, "user_id", "user");
  if (auto it = j.find("groups"); it != j.end()) {
    for (const auto& g : *it) {
      profile.groups.insert(g.get<std::string>());
    }
  }
  const auto read_counts = [&](const char* key,
                               std::map<std::string, std::int64_t>& into) {
    if (auto it = j.find(key); it != j.end()) {
      for (const auto& [cls, count] : it->items()) {
        into[cls] = count.get<std::int64_t>();
      }
    }
  };
  read_counts("gold_seen", profile.gold_seen);
  read_counts("gold_correct", profile.gold_correct);
  profile.total_classifications =
      j.value("total_classifications", profile.total_classifications);
  validate_profile(profile);
  return profile;
}

}  // namespace

ProjectConfig load_project_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open project config: " + path);
  }
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error(std::string("project config is not JSON: ") +
                             e.what());
  }
  if (!doc.is_object()) {
    throw std::runtime_error("project config must be a JSON object");
  }
  const fs::path base = fs::path(path).parent_path();
  const auto resolve = [&](const std::string& p) {
    fs::path candidate(p);
    return candidate.is_absolute() ? candidate.string()
                                   : (base / candidate).string();
  };

  ProjectConfig config;
  config.engine.seed = doc.value("seed", std::uint64_t{0});
  config.manifest_path = resolve(require_string(doc, "manifest", "project"));

  auto workflows = doc.find("workflows");
  if (workflows == doc.end() || !workflows->is_array() ||
      workflows->empty()) {
    throw std::runtime_error("project config needs a \"workflows\" array");
  }
  for (const auto& wj : *workflows) {
    Workflow wf = parse_workflow(wj);
    if (auto it = wj.find("rules"); it != wj.end()) {
      config.engine.rules[wf.id] =
          it->is_string() ? load_rules_file(resolve(it->get<std::string>()))
                          : parse_rules(*it);
    }
    if (auto it = wj.find("subjects"); it != wj.end() && it->is_array()) {
      std::vector<SubjectId>& links = config.subject_links[wf.id];
      for (const auto& sid : *it) {
        links.push_back(sid.get<std::string>());
      }
    }
    config.engine.workflows.push_back(std::move(wf));
  }

  if (auto it = doc.find("grid_pages"); it != doc.end()) {
    for (const auto& [page, members] : it->items()) {
      std::vector<SubjectId>& list = config.grid_pages[page];
      for (const auto& sid : members) {
        list.push_back(sid.get<std::string>());
      }
    }
  }
  if (auto it = doc.find("users"); it != doc.end()) {
    for (const auto& uj : *it) {
      config.users.push_back(parse_user(uj));
    }
  }
  if (auto it = doc.find("known_groups"); it != doc.end()) {
    config.engine.known_groups.clear();
    for (const auto& g : *it) {
      config.engine.known_groups.insert(g.get<std::string>());
    }
  }
  return config;
}

std::unique_ptr<Engine> build_engine(const ProjectConfig& config) {
  auto engine = std::make_unique<Engine>(config.engine);
  const std::vector<Subject> subjects =
      load_manifest_file(config.manifest_path);
  for (const Subject& subject : subjects) {
    engine->add_subject(subject);
  }
  for (const Workflow& wf : config.engine.workflows) {
    auto links = config.subject_links.find(wf.id);
    if (links != config.subject_links.end()) {
      for (const SubjectId& sid : links->second) {
        engine->add_subject_to_workflow(sid, wf.id);
      }
    } else {
      for (const Subject& subject : subjects) {
        engine->add_subject_to_workflow(subject.id, wf.id);
      }
    }
  }
  for (const auto& [page, members] : config.grid_pages) {
    engine->register_grid_page(page, members);
  }
  for (const UserProfile& profile : config.users) {
    engine->upsert_user(profile);
  }
  return engine;
}

void write_sample_project(const std::string& dir) {
  const fs::path root(dir);
  fs::create_directories(root / "rules");

  {
    std::ofstream manifest(root / "manifest.tsv");
    manifest << "# tally-manifest v1\n";
    manifest << "subject_id\tlocations\tmetadata\n";
    manifest << "s001\timg/s001.png\t{\"machine_score\":0.92}\n";
    manifest << "s002\timg/s002.png\t{\"machine_score\":0.35}\n";
    manifest << "s003\timg/s003.png\t{}\n";
  }
  {
    std::ofstream rules(root / "rules" / "main.json");
    rules << R"([
  {
    "rule": ["gte", ["lookup", "total_votes"], ["const", 5]],
    "effects": [{"action": "retire_subject", "reason": "vote_threshold"}]
  }
]
)";
  }
  {
    nlohmann::json project = nlohmann::json::object();
    project["format"] = "tally-project";
    project["version"] = 1;
    project["seed"] = 0;
    project["manifest"] = "manifest.tsv";
    nlohmann::json wf = nlohmann::json::object();
    wf["id"] = "main";
    wf["task"] = "classify";
    wf["classes"] = nlohmann::json::array({"positive", "negative"});
    wf["strategy"] = "random";
    wf["required_reviews"] = 5;
    wf["positive_class"] = "positive";
    wf["rules"] = "rules/main.json";
    project["workflows"] = nlohmann::json::array({wf});
    std::ofstream out(root / "project.json");
    out << project.dump(2) << '\n';
  }
}

}  // namespace tally::cli
