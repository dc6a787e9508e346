#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "styleopt/costs.hpp"
#include "styleopt/kinematics.hpp"
#include "styleopt/trajectory.hpp"

namespace styleopt {

enum class Label { kUnlabeled, kA, kB };
enum class PairOrigin { kQuery, kAugmented };

struct PreferencePair {
  std::string pair_id;
  Trajectory a;
  Trajectory b;
  Label label = Label::kUnlabeled;
  PairOrigin origin = PairOrigin::kQuery;

  bool operator==(const PreferencePair&) const = default;
};

struct TrainerSettings {
  std::optional<double> learning_rate;  // unset: 0.1 featurized, 1e-3 MLP
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::optional<int> epochs_per_round;  // unset: 200 featurized, 500 MLP
  int augmentation_factor = 8;          // rotated copies per pair, MLP only
  std::uint64_t rng_seed = 0;

  double learning_rate_for(const StyleCost& cost) const;
  int epochs_for(const StyleCost& cost) const;
  void validate() const;
  bool operator==(const TrainerSettings&) const = default;
};

struct TrainingReport {
  int epochs = 0;
  double initial_loss = 0.0;
  double final_loss = 0.0;
  int pairs_used = 0;
  int augmented_pairs = 0;
};

struct TrainingResult {
  StyleCost cost;
  TrainingReport report;
};

/// logistic(z) = 1 / (1 + exp(-z)), stable for any finite z.
double logistic(double z);
/// log(1 + exp(z)), stable for any finite z.
double softplus(double z);

/// {P(A), P(B)} under exp(-cost) choice odds.
std::pair<double, double> preference_probabilities(double cost_a, double cost_b);
double preference_probability(const StyleCost& cost, const ArmModel& arm, const Trajectory& a,
                              const Trajectory& b);

/// Cross-entropy of the labeled choice: -log P(chosen).
double pair_loss(double cost_a, double cost_b, Label label);
double pair_loss(const StyleCost& cost, const ArmModel& arm, const PreferencePair& pair);
double mean_pair_loss(const StyleCost& cost, const ArmModel& arm,
                      const std::vector<PreferencePair>& pairs);

/// d pair_loss / d parameters with dropout off. Featurized: the weight vector;
/// MLP: the flattened layer parameters (MlpCost::parameters order).
Eigen::VectorXd pair_loss_gradient(const StyleCost& cost, const ArmModel& arm,
                                   const PreferencePair& pair);

/// k copies of the pair, both trajectories yawed by one shared random angle.
std::vector<PreferencePair> augment_rotations(const PreferencePair& pair, int k,
                                              std::mt19937_64& rng);

/// Full-batch Adam on the mean pair loss. MLP costs train on the pairs plus
/// their rotation augmentations with dropout active; featurized costs train on
/// the pairs alone. Returns a new snapshot; the input cost is not modified.
TrainingResult update_weights(const StyleCost& cost, const ArmModel& arm,
                              const std::vector<PreferencePair>& pairs,
                              const TrainerSettings& settings);

}  // namespace styleopt
