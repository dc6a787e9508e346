#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "styleopt/kinematics.hpp"
#include "styleopt/trajectory.hpp"

namespace styleopt {

struct FeatureVector {
  double radius = 0.0;       // mean horizontal EE distance to the base axis
  double height = 0.0;       // mean EE z
  double orientation = 0.0;  // mean angle between +z and the EE pointing, [0, pi]
  Eigen::VectorXd velocity;  // joint-space length of each of the T-1 segments

  /// [radius, height, orientation] optionally followed by the velocity terms.
  Eigen::VectorXd stacked(bool with_velocity) const;
};

FeatureVector extract_features(const ArmModel& arm, const Trajectory& x);

/// Linear cost w . phi over the end-effector features (3 weights) or the
/// end-effector plus per-segment velocity features (3 + T-1 weights).
struct FeaturizedCost {
  std::string style;
  Eigen::VectorXd weights;
  bool uses_velocity = false;

  static FeaturizedCost zero(std::string style, bool uses_velocity, int num_waypoints);
};

double featurized_cost(const FeaturizedCost& c, const FeatureVector& phi);
double featurized_cost(const FeaturizedCost& c, const ArmModel& arm, const Trajectory& x);
/// Gradient with respect to the waypoints (D x T). Non-differentiable points
/// (zero-length segments, EE on the base axis, EE exactly vertical) take the
/// zero subgradient.
Eigen::MatrixXd featurized_cost_gradient(const FeaturizedCost& c, const ArmModel& arm,
                                         const Trajectory& x);

/// Row-vector convention: out = in * weight + bias, weight is fan_in x fan_out.
struct DenseLayer {
  Eigen::MatrixXd weight;
  Eigen::RowVectorXd bias;
};

using MlpLayers = std::array<DenseLayer, 3>;

/// Per-step network input -> 42 tanh -> 21 tanh -> 21 linear. The trajectory
/// cost is the sum of squared outputs over steps t = 1..T-1, each step seeing
/// [x[t], x[t-1], ee position, ee pointing, (t+1)/T].
struct MlpCost {
  static constexpr int kHidden1 = 42;
  static constexpr int kHidden2 = 21;
  static constexpr int kOutput = 21;
  static constexpr const char* kEncoding = "raw+fk+t";

  std::string style;
  double dropout = 0.1;
  MlpLayers layers;

  int input_width() const { return static_cast<int>(layers[0].weight.rows()); }
  int parameter_count() const;
  Eigen::VectorXd parameters() const;
  void set_parameters(const Eigen::VectorXd& flat);

  /// Glorot-uniform weights, zero biases.
  static MlpCost glorot(std::string style, int dof, std::uint64_t seed, double dropout = 0.1);
  static MlpCost zero(std::string style, int dof, double dropout = 0.1);
};

int mlp_input_width(int dof);
Eigen::VectorXd flatten(const MlpLayers& layers);
void check_mlp(const MlpCost& c);

/// Step inputs for one trajectory, (T-1) x (2D+7).
Eigen::MatrixXd encode_steps(const ArmModel& arm, const Trajectory& x);

struct MlpOutput {
  double cost = 0.0;
  std::vector<Eigen::VectorXd> per_step;  // y_t for t = 1..T-1
};

/// training=true applies inverted dropout after both hidden layers with masks
/// drawn from rng (required in that case).
MlpOutput mlp_forward(const MlpCost& c, const ArmModel& arm, const Trajectory& x,
                      bool training = false, std::mt19937_64* rng = nullptr);

/// Activations of a batch of step rows, kept for backprop.
struct MlpPass {
  Eigen::MatrixXd h1;
  Eigen::MatrixXd h2;
  Eigen::MatrixXd y;
  Eigen::ArrayXXd keep1;  // empty without dropout
  Eigen::ArrayXXd keep2;
};

MlpPass mlp_pass(const MlpCost& c, const Eigen::Ref<const Eigen::MatrixXd>& inputs,
                 std::mt19937_64* dropout_rng = nullptr);
/// Parameter gradient given dL/dy for every row of the pass.
MlpLayers mlp_backprop(const MlpCost& c, const Eigen::Ref<const Eigen::MatrixXd>& inputs,
                       const MlpPass& pass,
                       const Eigen::MatrixXd& dy);
/// d cost / d parameters with dropout off.
MlpLayers mlp_cost_gradient(const MlpCost& c, const ArmModel& arm, const Trajectory& x);

using StyleCost = std::variant<FeaturizedCost, MlpCost>;

const std::string& style_name(const StyleCost& c);
/// Evaluation-mode cost (no dropout).
double style_cost(const StyleCost& c, const ArmModel& arm, const Trajectory& x);

struct ObjectiveConfig {
  std::optional<StyleCost> style;
  double lambda = 0.5;
};

/// C_style(x) + lambda * C_ssd(x).
double total_objective(const ObjectiveConfig& cfg, const ArmModel& arm, const Trajectory& x);

}  // namespace styleopt
