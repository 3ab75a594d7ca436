#pragma once

#include "tally/simulator.hpp"

namespace tally {

// Runs every replication of a synthetic scenario through the engine and
// returns the metric table. Fully deterministic: the same config (seed
// included) produces a byte-identical report, and the volunteer vote for a
// given (replication, user, subject) triple is shared across arms so paired
// comparisons see the same noise.
//
// Arms per scenario:
//   S1_agree_with_model   vote-threshold baseline vs early retirement when
//                         the first agree_k votes match the machine label
//   S2_expert_gate        posterior rejects gated on expert review vs not
//   S3_active_learning    uncertainty-ordered serving vs random
//   S4_confidence_order   machine-confidence-ascending serving vs random
MetricsReport run_scenario(const ScenarioConfig& config);

}  // namespace tally
