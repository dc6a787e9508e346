#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "styleopt/costs.hpp"
#include "styleopt/kinematics.hpp"
#include "styleopt/learning.hpp"
#include "styleopt/optimizer.hpp"
#include "styleopt/trajectory.hpp"

namespace styleopt {

enum class CostType { kFeaturized, kMlp };

struct SessionConfig {
  std::string style = "style";
  CostType cost_type = CostType::kFeaturized;
  bool uses_velocity = false;  // featurized only
  ArmModel arm = ArmModel::default_arm();
  std::vector<Task> tasks;
  int num_waypoints = 10;
  double lambda = 0.5;
  int pairs_per_batch = 4;
  PerturbationSpec perturbation;  // rng_seed is ignored; seeds come from the session rng
  TrainerSettings trainer;        // rng_seed is ignored likewise
  OptimizerSettings optimizer;
  std::uint64_t seed = 0;

  /// Throws DimensionError / ValueError describing the first problem found.
  void validate() const;
};

struct QueryBatch {
  std::string batch_id;
  int round_index = 0;
  int task_index = 0;
  std::vector<PreferencePair> pairs;

  int unlabeled() const;
  bool operator==(const QueryBatch&) const = default;
};

/// One style-learning run. The label history and the log only ever grow.
struct Session {
  std::string id;
  SessionConfig config;
  StyleCost cost;
  std::vector<PreferencePair> labels;
  std::optional<QueryBatch> pending;
  int round_index = 0;
  std::optional<double> last_loss;
  std::mt19937_64 rng;
  std::vector<nlohmann::json> log;  // config | batch | label | training_round records
};

/// Initial cost for a config: zero weights (featurized) or a Glorot network
/// seeded from config.seed (MLP).
StyleCost initial_cost(const SessionConfig& config);

/// Fresh session with its config record logged.
Session create_session(SessionConfig config, std::string id);

/// Current UTC time, ISO 8601 with milliseconds.
std::string utc_timestamp();

}  // namespace styleopt
