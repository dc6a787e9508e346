#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "styleopt/costs.hpp"
#include "styleopt/learning.hpp"
#include "styleopt/session.hpp"
#include "styleopt/trajectory.hpp"

namespace styleopt {

enum class OracleMode { kDeterministic, kSampled };

/// Synthetic labeler backed by a ground-truth cost.
class Oracle {
 public:
  Oracle(StyleCost ground_truth, ArmModel arm, OracleMode mode = OracleMode::kDeterministic,
         std::uint64_t seed = 0);

  /// Deterministic: A iff C*(a) <= C*(b). Sampled: A with the Bradley-Terry
  /// probability under C*.
  Label label(const PreferencePair& pair);
  Label label_costs(double cost_a, double cost_b);

  const StyleCost& ground_truth() const { return truth_; }
  OracleMode mode() const { return mode_; }

 private:
  StyleCost truth_;
  ArmModel arm_;
  OracleMode mode_;
  std::mt19937_64 rng_;
};

/// Generates the next query batch and stores it as the session's pending batch:
/// round-robin task choice, optimize with the current cost, perturb the
/// optimum, pair up candidates. Throws StateError while a batch is pending.
const QueryBatch& next_batch(Session& session, int pairs_per_batch);
const QueryBatch& next_batch(Session& session);

struct LabelOutcome {
  int remaining_in_batch = 0;
  bool trained = false;
  std::optional<TrainingReport> report;
};

/// Records one label of the pending batch. The last label of a batch retrains
/// the session cost on every label collected so far.
LabelOutcome record_label(Session& session, const std::string& pair_id, Label choice);

/// Rebuilds a session by re-running its log from the config record.
/// Regenerated batches must match the logged ones (throws StateError if not).
Session replay_session(const std::vector<nlohmann::json>& log);

// ---------------------------------------------------------------------------
// Evaluation

/// Random task: yaw in [-2.5, 2.5], pitch joints in [0.2, 1.2].
Task random_task(const ArmModel& arm, std::mt19937_64& rng, double duration = 5.0);
/// Fixed query tasks; a larger count extends the same sequence.
std::vector<Task> default_training_tasks(const ArmModel& arm, int count = 3);
Task default_heldout_task(const ArmModel& arm);

/// Pairs of independent smooth perturbations of the SSD-optimal trajectory.
std::vector<std::pair<Trajectory, Trajectory>> heldout_pairs(const Task& task, int num_waypoints,
                                                             int count, double delta_magnitude,
                                                             std::uint64_t seed);

/// Fraction of pairs ordered the same way by both costs; a tie on either side
/// earns half credit.
double pairwise_agreement(const StyleCost& learned, const StyleCost& truth, const ArmModel& arm,
                          const std::vector<std::pair<Trajectory, Trajectory>>& pairs);

struct EvalSettings {
  std::optional<Task> task;  // default_heldout_task when unset
  int pairs = 200;
  std::uint64_t seed = 7;
};

struct OracleTrainingConfig {
  SessionConfig session;
  StyleCost ground_truth;
  OracleMode oracle_mode = OracleMode::kDeterministic;
  int rounds = 25;
  EvalSettings eval;
};

struct RoundSummary {
  int round = 0;  // 1-based; 0 is the untrained cost
  int labels_total = 0;
  std::optional<double> final_loss;  // unset before any training
  double agreement = 0.0;
};

struct OracleTrainingResult {
  Session session;
  std::vector<RoundSummary> rounds;  // starts with the round-0 row
  std::optional<TrainingReport> last_report;

  double final_agreement() const { return rounds.back().agreement; }
};

/// The full query -> label -> train loop with a synthetic expert.
OracleTrainingResult run_oracle_training(const OracleTrainingConfig& config,
                                         const std::string& session_id = "oracle");

}  // namespace styleopt
