#include "styleopt/optimizer.hpp"

#include <cmath>
#include <string>

#include "styleopt/errors.hpp"

namespace styleopt {

void OptimizerSettings::validate() const {
  if (max_iterations < 0) throw ValueError("max_iterations must be >= 0");
  if (!(convergence_tol > 0.0)) throw ValueError("convergence_tol must be positive");
  if (!(initial_step > 0.0)) throw ValueError("initial_step must be positive");
  if (!(shrink > 0.0 && shrink < 1.0)) throw ValueError("shrink factor must be in (0, 1)");
  if (!(fd_epsilon > 0.0)) throw ValueError("fd_epsilon must be positive");
}

Eigen::MatrixXd numeric_gradient(const TrajectoryObjective& f, const Trajectory& x,
                                 double fd_epsilon, bool interior_only) {
  if (!(fd_epsilon > 0.0)) throw ValueError("fd_epsilon must be positive");
  if (!std::isfinite(f(x))) throw ValueError("objective is not finite at the base point");
  Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(x.dof(), x.length());
  const int first = interior_only ? 1 : 0;
  const int last = interior_only ? x.length() - 1 : x.length();
  Trajectory probe = x;
  for (int t = first; t < last; ++t) {
    for (int d = 0; d < x.dof(); ++d) {
      const double orig = probe(d, t);
      probe(d, t) = orig + fd_epsilon;
      const double up = f(probe);
      probe(d, t) = orig - fd_epsilon;
      const double down = f(probe);
      probe(d, t) = orig;
      if (!std::isfinite(up) || !std::isfinite(down)) {
        throw ValueError("objective is not finite near waypoint " + std::to_string(t) +
                         ", joint " + std::to_string(d));
      }
      grad(d, t) = (up - down) / (2.0 * fd_epsilon);
    }
  }
  return grad;
}

Eigen::MatrixXd objective_gradient(const ObjectiveConfig& cfg, const ArmModel& arm,
                                   const Trajectory& x, const OptimizerSettings& settings) {
  Eigen::MatrixXd grad = cfg.lambda * ssd_gradient(x);
  if (cfg.style) {
    const auto* featurized = std::get_if<FeaturizedCost>(&*cfg.style);
    if (featurized && settings.gradient_mode == GradientMode::kAnalyticWhereAvailable) {
      grad += featurized_cost_gradient(*featurized, arm, x);
    } else {
      const StyleCost& style = *cfg.style;
      grad += numeric_gradient(
          [&](const Trajectory& p) { return style_cost(style, arm, p); }, x,
          settings.fd_epsilon, /*interior_only=*/true);
    }
  }
  grad.col(0).setZero();
  grad.col(x.length() - 1).setZero();
  return grad;
}

namespace {

// Applies the inverse interior second-difference operator to each joint row.
Eigen::MatrixXd precondition(const Eigen::MatrixXd& grad) {
  const Eigen::Index interior = grad.cols() - 2;
  Eigen::MatrixXd dir = Eigen::MatrixXd::Zero(grad.rows(), grad.cols());
  for (Eigen::Index d = 0; d < grad.rows(); ++d) {
    const Eigen::VectorXd row = grad.row(d).segment(1, interior).transpose();
    dir.row(d).segment(1, interior) = solve_second_difference(row).transpose();
  }
  return dir;
}

Trajectory step_along(const ArmModel& arm, const Trajectory& x, const Eigen::MatrixXd& dir,
                      double t) {
  Eigen::MatrixXd m = x.matrix();
  for (Eigen::Index c = 1; c + 1 < m.cols(); ++c) {
    m.col(c) = arm.clamp(m.col(c) + t * dir.col(c));
  }
  return Trajectory(std::move(m));
}

}  // namespace

OptimizeResult optimize(const ObjectiveConfig& cfg, const ArmModel& arm, const Task& task,
                        int num_waypoints, const OptimizerSettings& settings,
                        const std::optional<Trajectory>& init) {
  settings.validate();
  check_task(arm, task);
  if (num_waypoints < 2) throw ValueError("optimize needs T >= 2");

  Trajectory x = init ? *init : linear_interpolation(task, num_waypoints);
  if (x.dof() != arm.dof() || x.length() != num_waypoints) {
    throw DimensionError("initial trajectory shape does not match arm dof and T");
  }
  if (x.waypoint(0) != task.start || x.waypoint(num_waypoints - 1) != task.goal) {
    throw ValueError("initial trajectory endpoints must equal the task start and goal");
  }

  auto objective = [&](const Trajectory& p) { return total_objective(cfg, arm, p); };
  double f = objective(x);
  if (!std::isfinite(f)) throw ValueError("objective is not finite at the initial trajectory");

  OptimizeResult result{x, {f}, 0, false};
  if (num_waypoints < 3) {
    result.converged = true;
    return result;
  }

  constexpr double kArmijo = 1e-4;
  constexpr double kMinStep = 1e-12;
  double step = settings.initial_step;

  for (int iter = 0; iter < settings.max_iterations; ++iter) {
    const Eigen::MatrixXd grad = objective_gradient(cfg, arm, x, settings);
    const Eigen::MatrixXd dir = -precondition(grad);
    const double slope = grad.cwiseProduct(dir).sum();
    if (!(slope < -1e-15 * (1.0 + std::abs(f)))) {
      result.converged = true;
      break;
    }

    double t = step;
    std::optional<Trajectory> accepted;
    double f_new = f;
    while (t >= kMinStep) {
      Trajectory cand = step_along(arm, x, dir, t);
      const double fc = objective(cand);
      if (std::isfinite(fc) && fc <= f + kArmijo * t * slope) {
        accepted = std::move(cand);
        f_new = fc;
        break;
      }
      t *= settings.shrink;
    }
    if (!accepted) {
      result.converged = true;
      break;
    }

    // Minimizer of the 1-D quadratic through f, slope and f(t).
    const double curvature = f_new - f - slope * t;
    if (curvature > 0.0) {
      const double t_model = -slope * t * t / (2.0 * curvature);
      if (std::isfinite(t_model) && t_model > kMinStep &&
          std::abs(t_model - t) > 1e-3 * t) {
        Trajectory cand = step_along(arm, x, dir, t_model);
        const double fc = objective(cand);
        if (std::isfinite(fc) && fc < f_new) {
          accepted = std::move(cand);
          f_new = fc;
          t = t_model;
        }
      }
    }

    const double decrease = f - f_new;
    x = std::move(*accepted);
    f = f_new;
    result.objective_history.push_back(f);
    result.iterations = iter + 1;
    step = t / settings.shrink;

    if (decrease <= settings.convergence_tol * std::max(std::abs(f + decrease), 1e-12)) {
      result.converged = true;
      break;
    }
  }
  result.trajectory = std::move(x);
  return result;
}

}  // namespace styleopt
