#include "tally/simulator.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace tally {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

double hash01(std::uint64_t seed, std::uint64_t stream, std::uint64_t a,
              std::uint64_t b, std::uint64_t c) {
  std::uint64_t h = splitmix64(seed ^ 0x6a09e667f3bcc909ULL);
  h = splitmix64(h ^ stream);
  h = splitmix64(h ^ a);
  h = splitmix64(h ^ b);
  h = splitmix64(h ^ c);
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

void validate_volunteer(const VolunteerModel& model) {
  const auto in_unit = [](double x) { return x >= 0.0 && x <= 1.0; };
  if (!in_unit(model.true_tpr) || !in_unit(model.true_fpr)) {
    throw std::invalid_argument("volunteer rates must lie in [0,1]");
  }
  if (!(model.activity_weight > 0.0) ||
      !std::isfinite(model.activity_weight)) {
    throw std::invalid_argument("activity_weight must be positive");
  }
}

void validate_machine(const MachineModel& model) {
  if (model.accuracy < 0.0 || model.accuracy > 1.0) {
    throw std::invalid_argument("machine accuracy must lie in [0,1]");
  }
  if (!(model.score_sharpness > 0.0)) {
    throw std::invalid_argument("score_sharpness must be positive");
  }
}

std::vector<bool> generate_truth(int n, double prevalence,
                                 std::mt19937_64& rng) {
  if (n < 1) {
    throw std::invalid_argument("need at least one subject");
  }
  if (prevalence < 0.0 || prevalence > 1.0) {
    throw std::invalid_argument("prevalence must lie in [0,1]");
  }
  std::vector<bool> truth(static_cast<std::size_t>(n));
  for (auto&& t : truth) {
    t = uniform01(rng) < prevalence;
  }
  return truth;
}

bool simulate_vote_u(const VolunteerModel& model, bool truth_positive,
                     double u) {
  return u < (truth_positive ? model.true_tpr : model.true_fpr);
}

bool simulate_vote(const VolunteerModel& model, bool truth_positive,
                   std::mt19937_64& rng) {
  return simulate_vote_u(model, truth_positive, uniform01(rng));
}

MachineOutput simulate_machine_u(const MachineModel& model,
                                 bool truth_positive, double u_label,
                                 double u_score) {
  MachineOutput out;
  const bool correct = u_label < model.accuracy;
  out.predicted_positive = correct == truth_positive;
  const double pull = std::pow(u_score, 1.0 / model.score_sharpness);
  out.score = out.predicted_positive ? pull : 1.0 - pull;
  return out;
}

MachineOutput simulate_machine(const MachineModel& model, bool truth_positive,
                               std::mt19937_64& rng) {
  const double u_label = uniform01(rng);
  const double u_score = uniform01(rng);
  return simulate_machine_u(model, truth_positive, u_label, u_score);
}

double closed_form_effort(double p, int k, int n_max) {
  if (p < 0.0 || p > 1.0) {
    throw std::invalid_argument("p must lie in [0,1]");
  }
  if (k >= n_max) {
    throw std::invalid_argument("early-retirement k must be below n_max");
  }
  return static_cast<double>(k) * p + static_cast<double>(n_max) * (1.0 - p);
}

const char* to_string(Scenario scenario) {
  switch (scenario) {
    case Scenario::S1AgreeWithModel:
      return "S1_agree_with_model";
    case Scenario::S2ExpertGate:
      return "S2_expert_gate";
    case Scenario::S3ActiveLearning:
      return "S3_active_learning";
    case Scenario::S4ConfidenceOrder:
      return "S4_confidence_order";
  }
  return "unknown";
}

Scenario scenario_from_string(const std::string& token) {
  if (token == "S1_agree_with_model") {
    return Scenario::S1AgreeWithModel;
  }
  if (token == "S2_expert_gate") {
    return Scenario::S2ExpertGate;
  }
  if (token == "S3_active_learning") {
    return Scenario::S3ActiveLearning;
  }
  if (token == "S4_confidence_order") {
    return Scenario::S4ConfidenceOrder;
  }
  throw InvalidScenarioConfig("unknown scenario: " + token);
}

void validate_scenario_config(const ScenarioConfig& config) {
  if (config.n_subjects < 1) {
    throw InvalidScenarioConfig("n_subjects must be at least 1");
  }
  if (!(config.prevalence > 0.0) || !(config.prevalence < 1.0)) {
    throw InvalidScenarioConfig("prevalence must lie in (0,1)");
  }
  if (config.replications < 1) {
    throw InvalidScenarioConfig("replications must be at least 1");
  }
  if (config.cohorts.empty()) {
    throw InvalidScenarioConfig("population needs at least one cohort");
  }
  for (const CohortSpec& cohort : config.cohorts) {
    if (cohort.count < 1) {
      throw InvalidScenarioConfig("cohort count must be at least 1");
    }
    if (cohort.seeded_gold_per_class < 0) {
      throw InvalidScenarioConfig("seeded_gold_per_class must be >= 0");
    }
    VolunteerModel probe{"", cohort.true_tpr, cohort.true_fpr,
                         cohort.activity_weight};
    try {
      validate_volunteer(probe);
    } catch (const std::invalid_argument& e) {
      throw InvalidScenarioConfig(e.what());
    }
  }
  try {
    validate_machine(config.machine);
  } catch (const std::invalid_argument& e) {
    throw InvalidScenarioConfig(e.what());
  }
  const ScenarioWorkflowSpec& wf = config.workflow;
  if (wf.required_reviews < 1 || wf.agree_k < 1 || wf.max_votes < 1) {
    throw InvalidScenarioConfig("review counts must be at least 1");
  }
  if (!(wf.reject_threshold > 0.0) || !(wf.reject_threshold < wf.accept_threshold) ||
      !(wf.accept_threshold < 1.0)) {
    throw InvalidScenarioConfig(
        "thresholds must satisfy 0 < reject < accept < 1");
  }
  if (!(wf.default_prior > 0.0) || !(wf.default_prior < 1.0)) {
    throw InvalidScenarioConfig("default_prior must lie in (0,1)");
  }
  if (!(wf.target_accuracy > 0.0) || wf.target_accuracy > 1.0) {
    throw InvalidScenarioConfig("target_accuracy must lie in (0,1]");
  }
}

ScenarioConfig default_scenario_config(Scenario scenario) {
  ScenarioConfig config;
  config.scenario = scenario;
  config.n_subjects = 2000;
  config.replications = 20;
  config.seed = 0;
  switch (scenario) {
    case Scenario::S1AgreeWithModel:
      // Perfect volunteers make first-two-agreement probability equal the
      // machine's accuracy, and 3p/5 = 0.43 solves to p = 0.7167.
      config.prevalence = 0.5;
      config.cohorts = {{200, 1.0, 0.0, 1.0, 0}};
      config.machine = {0.7167, 1.0, false, true};
      break;
    case Scenario::S2ExpertGate:
      config.prevalence = 0.3;
      config.cohorts = {{192, 0.8, 0.2, 1.0, 60}, {8, 1.0, 0.0, 4.0, 40}};
      config.machine = {0.5, 1.0, false, false};
      break;
    case Scenario::S3ActiveLearning:
      config.prevalence = 0.55;
      config.cohorts = {{200, 0.85, 0.15, 1.0, 60}};
      config.machine = {0.8, 3.0, true, true};
      break;
    case Scenario::S4ConfidenceOrder:
      config.prevalence = 0.7;
      config.cohorts = {{200, 0.85, 0.15, 1.0, 60}};
      config.machine = {0.8, 3.0, true, true};
      break;
  }
  return config;
}

namespace {

double require_number(const nlohmann::json& j, const char* key,
                      double fallback) {
  auto it = j.find(key);
  if (it == j.end()) {
    return fallback;
  }
  if (!it->is_number()) {
    throw InvalidScenarioConfig(std::string(key) + " must be a number");
  }
  return it->get<double>();
}

std::int64_t require_integer(const nlohmann::json& j, const char* key,
                             std::int64_t fallback) {
  auto it = j.find(key);
  if (it == j.end()) {
    return fallback;
  }
  if (!it->is_number_integer()) {
    throw InvalidScenarioConfig(std::string(key) + " must be an integer");
  }
  return it->get<std::int64_t>();
}

bool require_bool(const nlohmann::json& j, const char* key, bool fallback) {
  auto it = j.find(key);
  if (it == j.end()) {
    return fallback;
  }
  if (!it->is_boolean()) {
    throw InvalidScenarioConfig(std::string(key) + " must be a boolean");
  }
  return it->get<bool>();
}

}  // namespace

ScenarioConfig parse_scenario_config(const nlohmann::json& document) {
  if (!document.is_object()) {
    throw InvalidScenarioConfig("scenario config must be a JSON object");
  }
  auto scenario_it = document.find("scenario");
  if (scenario_it == document.end() || !scenario_it->is_string()) {
    throw InvalidScenarioConfig("scenario config needs a \"scenario\" string");
  }
  ScenarioConfig config =
      default_scenario_config(scenario_from_string(*scenario_it));
  auto seed_it = document.find("seed");
  if (seed_it == document.end() || !seed_it->is_number_integer()) {
    throw InvalidScenarioConfig(
        "scenario config must set an integer master \"seed\"");
  }
  config.seed = seed_it->get<std::uint64_t>();
  config.n_subjects = static_cast<int>(
      require_integer(document, "n_subjects", config.n_subjects));
  config.prevalence =
      require_number(document, "prevalence", config.prevalence);
  config.replications = static_cast<int>(
      require_integer(document, "replications", config.replications));
  if (auto it = document.find("population"); it != document.end()) {
    if (!it->is_object() || !it->contains("cohorts") ||
        !(*it)["cohorts"].is_array()) {
      throw InvalidScenarioConfig(
          "population must be {\"cohorts\": [...]}");
    }
    std::vector<CohortSpec> cohorts;
    for (const auto& cj : (*it)["cohorts"]) {
      if (!cj.is_object()) {
        throw InvalidScenarioConfig("cohort entries must be objects");
      }
      CohortSpec cohort;
      cohort.count = static_cast<int>(require_integer(cj, "count", 0));
      cohort.true_tpr = require_number(cj, "true_tpr", cohort.true_tpr);
      cohort.true_fpr = require_number(cj, "true_fpr", cohort.true_fpr);
      cohort.activity_weight =
          require_number(cj, "activity_weight", cohort.activity_weight);
      cohort.seeded_gold_per_class =
          require_integer(cj, "seeded_gold_per_class", 0);
      cohorts.push_back(cohort);
    }
    config.cohorts = std::move(cohorts);
  }
  if (auto it = document.find("machine"); it != document.end()) {
    if (!it->is_object()) {
      throw InvalidScenarioConfig("machine must be an object");
    }
    config.machine.accuracy =
        require_number(*it, "accuracy", config.machine.accuracy);
    config.machine.score_sharpness =
        require_number(*it, "score_sharpness", config.machine.score_sharpness);
    config.machine.attach_scores =
        require_bool(*it, "attach_scores", config.machine.attach_scores);
    config.machine.attach_labels =
        require_bool(*it, "attach_labels", config.machine.attach_labels);
  }
  if (auto it = document.find("workflow"); it != document.end()) {
    if (!it->is_object()) {
      throw InvalidScenarioConfig("workflow must be an object");
    }
    ScenarioWorkflowSpec& wf = config.workflow;
    wf.required_reviews = static_cast<int>(
        require_integer(*it, "required_reviews", wf.required_reviews));
    wf.agree_k = static_cast<int>(require_integer(*it, "agree_k", wf.agree_k));
    wf.accept_threshold =
        require_number(*it, "accept_threshold", wf.accept_threshold);
    wf.reject_threshold =
        require_number(*it, "reject_threshold", wf.reject_threshold);
    wf.default_prior = require_number(*it, "default_prior", wf.default_prior);
    wf.max_votes =
        static_cast<int>(require_integer(*it, "max_votes", wf.max_votes));
    wf.target_accuracy =
        require_number(*it, "target_accuracy", wf.target_accuracy);
  }
  validate_scenario_config(config);
  return config;
}

ScenarioConfig load_scenario_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw InvalidScenarioConfig("cannot open scenario config: " + path);
  }
  nlohmann::json document;
  try {
    in >> document;
  } catch (const nlohmann::json::parse_error& e) {
    throw InvalidScenarioConfig(std::string("scenario config is not JSON: ") +
                                e.what());
  }
  return parse_scenario_config(document);
}

nlohmann::json scenario_config_to_json(const ScenarioConfig& config) {
  nlohmann::json j = nlohmann::json::object();
  j["format"] = "tally-scenario";
  j["version"] = 1;
  j["scenario"] = to_string(config.scenario);
  j["seed"] = config.seed;
  j["n_subjects"] = config.n_subjects;
  j["prevalence"] = config.prevalence;
  j["replications"] = config.replications;
  nlohmann::json cohorts = nlohmann::json::array();
  for (const CohortSpec& cohort : config.cohorts) {
    nlohmann::json cj = nlohmann::json::object();
    cj["count"] = cohort.count;
    cj["true_tpr"] = cohort.true_tpr;
    cj["true_fpr"] = cohort.true_fpr;
    cj["activity_weight"] = cohort.activity_weight;
    cj["seeded_gold_per_class"] = cohort.seeded_gold_per_class;
    cohorts.push_back(std::move(cj));
  }
  j["population"] = nlohmann::json::object();
  j["population"]["cohorts"] = std::move(cohorts);
  nlohmann::json machine = nlohmann::json::object();
  machine["accuracy"] = config.machine.accuracy;
  machine["score_sharpness"] = config.machine.score_sharpness;
  machine["attach_scores"] = config.machine.attach_scores;
  machine["attach_labels"] = config.machine.attach_labels;
  j["machine"] = std::move(machine);
  nlohmann::json wf = nlohmann::json::object();
  wf["required_reviews"] = config.workflow.required_reviews;
  wf["agree_k"] = config.workflow.agree_k;
  wf["accept_threshold"] = config.workflow.accept_threshold;
  wf["reject_threshold"] = config.workflow.reject_threshold;
  wf["default_prior"] = config.workflow.default_prior;
  wf["max_votes"] = config.workflow.max_votes;
  wf["target_accuracy"] = config.workflow.target_accuracy;
  j["workflow"] = std::move(wf);
  return j;
}

std::map<std::string, double> ReplicationMetrics::as_map() const {
  std::map<std::string, double> m;
  m["classifications_per_retired_subject"] =
      classifications_per_retired_subject;
  m["effort_reduction_vs_baseline"] = effort_reduction_vs_baseline;
  m["accuracy"] = accuracy;
  m["false_negative_rate"] = false_negative_rate;
  m["labels_to_target_accuracy"] =
      static_cast<double>(labels_to_target_accuracy);
  m["speedup_ratio"] = speedup_ratio;
  for (const auto& [key, value] : extra) {
    m[key] = value;
  }
  return m;
}

nlohmann::json report_to_json(const MetricsReport& report) {
  nlohmann::json j = nlohmann::json::object();
  j["format"] = "tally-metrics";
  j["version"] = 1;
  j["scenario"] = report.scenario;
  j["config"] = report.config_echo;
  nlohmann::json reps = nlohmann::json::array();
  for (const ReplicationMetrics& rep : report.replications) {
    nlohmann::json rj = rep.as_map();
    rj["replication"] = rep.replication;
    reps.push_back(std::move(rj));
  }
  j["replications"] = std::move(reps);
  j["aggregate"] = report.aggregate;
  return j;
}

MetricsReport report_from_json(const nlohmann::json& j) {
  if (!j.is_object() || j.value("format", "") != "tally-metrics") {
    throw std::invalid_argument("not a tally-metrics document");
  }
  MetricsReport report;
  report.scenario = j.value("scenario", "");
  report.config_echo = j.value("config", nlohmann::json::object());
  for (const auto& rj : j.value("replications", nlohmann::json::array())) {
    ReplicationMetrics rep;
    rep.replication = rj.value("replication", 0);
    for (const auto& [key, value] : rj.items()) {
      if (key == "replication" || !value.is_number()) {
        continue;
      }
      const double v = value.get<double>();
      if (key == "classifications_per_retired_subject") {
        rep.classifications_per_retired_subject = v;
      } else if (key == "effort_reduction_vs_baseline") {
        rep.effort_reduction_vs_baseline = v;
      } else if (key == "accuracy") {
        rep.accuracy = v;
      } else if (key == "false_negative_rate") {
        rep.false_negative_rate = v;
      } else if (key == "labels_to_target_accuracy") {
        rep.labels_to_target_accuracy = static_cast<std::int64_t>(v);
      } else if (key == "speedup_ratio") {
        rep.speedup_ratio = v;
      } else {
        rep.extra[key] = v;
      }
    }
    report.replications.push_back(std::move(rep));
  }
  // Named first: items() keeps a reference, a temporary would dangle here.
  const nlohmann::json aggregate =
      j.value("aggregate", nlohmann::json::object());
  for (const auto& [key, value] : aggregate.items()) {
    if (value.is_number()) {
      report.aggregate[key] = value.get<double>();
    }
  }
  return report;
}

std::string render_report_text(const MetricsReport& report) {
  std::ostringstream out;
  out << "scenario " << report.scenario << ", "
      << report.replications.size() << " replications\n";
  out << "aggregate means:\n";
  for (const auto& [key, value] : report.aggregate) {
    out << "  " << key << " = " << value << "\n";
  }
  out << "per replication:\n";
  for (const ReplicationMetrics& rep : report.replications) {
    out << "  [" << rep.replication << "]";
    for (const auto& [key, value] : rep.as_map()) {
      out << " " << key << "=" << value;
    }
    out << "\n";
  }
  return out.str();
}

}  // namespace tally
