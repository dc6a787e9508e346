#pragma once

#include <functional>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "styleopt/costs.hpp"
#include "styleopt/kinematics.hpp"
#include "styleopt/trajectory.hpp"

namespace styleopt {

enum class GradientMode {
  kFiniteDifference,       // style term by central differences, SSD term analytic
  kAnalyticWhereAvailable  // featurized style term analytic, MLP by differences
};

struct OptimizerSettings {
  int max_iterations = 300;
  double convergence_tol = 1e-6;  // relative objective decrease
  double initial_step = 0.1;
  double shrink = 0.5;
  GradientMode gradient_mode = GradientMode::kFiniteDifference;
  double fd_epsilon = 1e-5;

  void validate() const;
};

struct OptimizeResult {
  Trajectory trajectory;
  std::vector<double> objective_history;
  int iterations = 0;
  bool converged = false;
};

using TrajectoryObjective = std::function<double(const Trajectory&)>;

/// Central differences for every entry (or only interior waypoints).
Eigen::MatrixXd numeric_gradient(const TrajectoryObjective& f, const Trajectory& x,
                                 double fd_epsilon, bool interior_only = false);

/// Gradient of total_objective used by optimize. Endpoint columns are zero.
Eigen::MatrixXd objective_gradient(const ObjectiveConfig& cfg, const ArmModel& arm,
                                   const Trajectory& x, const OptimizerSettings& settings);

/// Minimizes total_objective with the task start and goal held fixed.
///
/// Descent directions are gradients preconditioned by the interior
/// second-difference operator (the Hessian of the SSD term up to scale), so
/// updates are smooth across waypoints and the SSD-only problem is solved in a
/// handful of steps. Each step is a backtracking line search (Armijo) followed
/// by a safeguarded quadratic-model trial; only decreasing steps are accepted.
/// Joint limits, when present, are enforced by clamping after each step.
OptimizeResult optimize(const ObjectiveConfig& cfg, const ArmModel& arm, const Task& task,
                        int num_waypoints, const OptimizerSettings& settings = {},
                        const std::optional<Trajectory>& init = std::nullopt);

}  // namespace styleopt
