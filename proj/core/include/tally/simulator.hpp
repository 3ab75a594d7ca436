#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "tally/types.hpp"

namespace tally {

// Deterministic randomness helpers. All simulator draws go through these so
// runs are bit-identical across platforms and standard-library versions.
std::uint64_t splitmix64(std::uint64_t x);
// 53-bit uniform in [0, 1).
double uniform01(std::mt19937_64& rng);
// Pure function of its inputs; used to couple per-(user, subject) draws
// across scenario arms (common random numbers).
double hash01(std::uint64_t seed, std::uint64_t stream, std::uint64_t a = 0,
              std::uint64_t b = 0, std::uint64_t c = 0);

struct InvalidScenarioConfig : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct VolunteerModel {
  UserId user_id;
  double true_tpr = 0.5;  // P(positive vote | truth positive)
  double true_fpr = 0.5;  // P(positive vote | truth negative)
  double activity_weight = 1.0;
};
void validate_volunteer(const VolunteerModel& model);

struct MachineModel {
  double accuracy = 0.5;  // P(machine_label = truth)
  // Concentration of scores toward 1 (predicted positive) or 0 (predicted
  // negative): scores are U^(1/sharpness) or its mirror.
  double score_sharpness = 1.0;
  bool attach_scores = true;
  bool attach_labels = true;
};
void validate_machine(const MachineModel& model);

// True with probability prevalence per subject.
std::vector<bool> generate_truth(int n, double prevalence,
                                 std::mt19937_64& rng);

// Positive vote with probability true_tpr (truth positive) or true_fpr
// (truth negative). The explicit-u form takes the uniform draw as an
// argument so callers can couple draws across arms.
bool simulate_vote(const VolunteerModel& model, bool truth_positive,
                   std::mt19937_64& rng);
bool simulate_vote_u(const VolunteerModel& model, bool truth_positive,
                     double u);

struct MachineOutput {
  bool predicted_positive = false;
  double score = 0.0;
};
MachineOutput simulate_machine(const MachineModel& model, bool truth_positive,
                               std::mt19937_64& rng);
MachineOutput simulate_machine_u(const MachineModel& model,
                                 bool truth_positive, double u_label,
                                 double u_score);

// Expected classifications per subject when a fraction p retires at k votes
// and the rest at n_max: k*p + n_max*(1-p).
double closed_form_effort(double p, int k, int n_max);

enum class Scenario {
  S1AgreeWithModel,
  S2ExpertGate,
  S3ActiveLearning,
  S4ConfidenceOrder,
};
const char* to_string(Scenario scenario);
Scenario scenario_from_string(const std::string& token);

struct CohortSpec {
  int count = 0;
  double true_tpr = 0.8;
  double true_fpr = 0.2;
  double activity_weight = 1.0;
  // Synthetic gold history preloaded into each profile so measured skill
  // starts at a known value and stays fixed during the run.
  std::int64_t seeded_gold_per_class = 0;
};

struct ScenarioWorkflowSpec {
  int required_reviews = 5;
  int agree_k = 2;
  double accept_threshold = 0.95;
  double reject_threshold = 0.02;
  double default_prior = 0.5;
  int max_votes = 10;           // vote-cap retirement for posterior scenarios
  double target_accuracy = 0.90;  // stop bar for the selection scenarios
};

struct ScenarioConfig {
  Scenario scenario = Scenario::S1AgreeWithModel;
  int n_subjects = 2000;
  double prevalence = 0.5;
  std::vector<CohortSpec> cohorts;
  MachineModel machine;
  ScenarioWorkflowSpec workflow;
  std::uint64_t seed = 0;  // master seed, mandatory in config files
  int replications = 20;
};
void validate_scenario_config(const ScenarioConfig& config);

ScenarioConfig default_scenario_config(Scenario scenario);

// JSON round trip. Parsing starts from the scenario's defaults and overlays
// the fields present; "scenario" and "seed" are mandatory.
ScenarioConfig parse_scenario_config(const nlohmann::json& document);
ScenarioConfig load_scenario_config_file(const std::string& path);
nlohmann::json scenario_config_to_json(const ScenarioConfig& config);

struct ReplicationMetrics {
  int replication = 0;
  double classifications_per_retired_subject = 0.0;
  double effort_reduction_vs_baseline = 0.0;
  double accuracy = 0.0;
  double false_negative_rate = 0.0;
  std::int64_t labels_to_target_accuracy = 0;
  double speedup_ratio = 0.0;
  // Scenario-specific extras (closed-form prediction, both-arm values).
  std::map<std::string, double> extra;

  std::map<std::string, double> as_map() const;
};

struct MetricsReport {
  std::string scenario;
  nlohmann::json config_echo;
  std::vector<ReplicationMetrics> replications;
  // Mean of every per-replication metric, keyed by metric name.
  std::map<std::string, double> aggregate;
};

nlohmann::json report_to_json(const MetricsReport& report);
MetricsReport report_from_json(const nlohmann::json& j);
std::string render_report_text(const MetricsReport& report);

}  // namespace tally
