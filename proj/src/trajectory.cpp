#include "styleopt/trajectory.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "styleopt/errors.hpp"

namespace styleopt {

Trajectory::Trajectory(Eigen::MatrixXd waypoints) : waypoints_(std::move(waypoints)) {
  if (waypoints_.rows() < 1) throw DimensionError("trajectory needs at least one joint");
  if (waypoints_.cols() < 2) {
    throw DimensionError("trajectory needs T >= 2 waypoints, got " +
                         std::to_string(waypoints_.cols()));
  }
  if (!waypoints_.allFinite()) throw ValueError("trajectory has non-finite entries");
}

void check_task(const ArmModel& arm, const Task& task) {
  check_config(arm, task.start);
  check_config(arm, task.goal);
  if (!(task.duration > 0.0) || !std::isfinite(task.duration)) {
    throw ValueError("task duration must be positive and finite");
  }
}

double ssd_cost(const Trajectory& x) {
  const auto& m = x.matrix();
  const Eigen::Index n = m.cols() - 1;
  return (m.rightCols(n) - m.leftCols(n)).squaredNorm();
}

Eigen::MatrixXd ssd_gradient(const Trajectory& x) {
  const auto& m = x.matrix();
  const Eigen::Index n = m.cols() - 1;
  const Eigen::MatrixXd steps = m.rightCols(n) - m.leftCols(n);
  Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(m.rows(), m.cols());
  grad.rightCols(n) += 2.0 * steps;
  grad.leftCols(n) -= 2.0 * steps;
  return grad;
}

Trajectory linear_interpolation(const Task& task, int num_waypoints) {
  if (num_waypoints < 2) throw ValueError("linear_interpolation needs T >= 2");
  if (task.start.size() != task.goal.size()) {
    throw DimensionError("task start and goal have different dimensions");
  }
  Eigen::MatrixXd m(task.start.size(), num_waypoints);
  for (int t = 0; t < num_waypoints; ++t) {
    const double s = static_cast<double>(t) / (num_waypoints - 1);
    m.col(t) = task.start + s * (task.goal - task.start);
  }
  // Endpoints exactly, independent of rounding in the blend.
  m.col(0) = task.start;
  m.col(num_waypoints - 1) = task.goal;
  return Trajectory(std::move(m));
}

// Thomas algorithm.
Eigen::VectorXd solve_second_difference(const Eigen::VectorXd& rhs) {
  const Eigen::Index n = rhs.size();
  if (n == 0) return rhs;
  Eigen::VectorXd c(n);
  Eigen::VectorXd d(n);
  c[0] = -0.5;
  d[0] = rhs[0] / 2.0;
  for (Eigen::Index i = 1; i < n; ++i) {
    const double denom = 2.0 + c[i - 1];
    c[i] = -1.0 / denom;
    d[i] = (rhs[i] + d[i - 1]) / denom;
  }
  Eigen::VectorXd y(n);
  y[n - 1] = d[n - 1];
  for (Eigen::Index i = n - 2; i >= 0; --i) y[i] = d[i] - c[i] * y[i + 1];
  return y;
}

namespace {

void check_perturbable(const Trajectory& x0) {
  if (x0.length() < 4) {
    throw ValueError("smooth perturbation needs T >= 4, got " + std::to_string(x0.length()));
  }
}

}  // namespace

Eigen::VectorXd perturbation_profile(int num_waypoints, int peak) {
  if (num_waypoints < 4) throw ValueError("perturbation profile needs T >= 4");
  if (peak < 1 || peak > num_waypoints - 2) {
    throw ValueError("perturbation peak must be an interior waypoint");
  }
  const int interior = num_waypoints - 2;
  Eigen::VectorXd unit = Eigen::VectorXd::Zero(interior);
  unit[peak - 1] = 1.0;
  const Eigen::VectorXd y = solve_second_difference(unit);
  // beta rescales so the peak keeps the size of the original impulse.
  const double beta = 1.0 / y[peak - 1];
  Eigen::VectorXd profile = Eigen::VectorXd::Zero(num_waypoints);
  profile.segment(1, interior) = beta * y;
  profile[peak] = 1.0;
  return profile;
}

Trajectory apply_perturbation(const Trajectory& x0, int peak, const Eigen::VectorXd& delta) {
  check_perturbable(x0);
  if (delta.size() != x0.dof()) throw DimensionError("perturbation direction has wrong dof");
  const Eigen::VectorXd profile = perturbation_profile(x0.length(), peak);
  Eigen::MatrixXd m = x0.matrix();
  for (int t = 1; t < x0.length() - 1; ++t) m.col(t) += profile[t] * delta;
  return Trajectory(std::move(m));
}

Trajectory random_perturbation(const Trajectory& x0, double delta_magnitude,
                               std::mt19937_64& rng) {
  check_perturbable(x0);
  if (!(delta_magnitude > 0.0) || !std::isfinite(delta_magnitude)) {
    throw ValueError("delta_magnitude must be positive and finite");
  }
  std::uniform_int_distribution<int> pick(1, x0.length() - 2);
  const int peak = pick(rng);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::VectorXd dir(x0.dof());
  double norm = 0.0;
  while (norm < 1e-12) {
    for (int d = 0; d < x0.dof(); ++d) dir[d] = gauss(rng);
    norm = dir.norm();
  }
  return apply_perturbation(x0, peak, dir * (delta_magnitude / norm));
}

std::vector<Trajectory> smooth_perturbation(const Trajectory& x0, const PerturbationSpec& spec) {
  check_perturbable(x0);
  if (spec.count < 1) throw ValueError("perturbation count must be >= 1");
  std::mt19937_64 rng(spec.rng_seed);
  std::vector<Trajectory> variants;
  variants.reserve(spec.count);
  for (int i = 0; i < spec.count; ++i) {
    variants.push_back(random_perturbation(x0, spec.delta_magnitude, rng));
  }
  return variants;
}

Trajectory rotate_trajectory(const Trajectory& x, double theta) {
  if (!std::isfinite(theta)) throw ValueError("rotation angle must be finite");
  const double shift = wrap_angle(x(0, 0) + theta) - x(0, 0);
  Eigen::MatrixXd m = x.matrix();
  m.row(0).array() += shift;
  m(0, 0) = wrap_angle(x(0, 0) + theta);
  return Trajectory(std::move(m));
}

TimedTrajectory time_trajectory(const Trajectory& x, double duration) {
  if (!(duration > 0.0) || !std::isfinite(duration)) {
    throw ValueError("duration must be positive and finite");
  }
  const int n = x.length();
  std::vector<double> stamps(n);
  for (int k = 0; k < n; ++k) stamps[k] = k * duration / (n - 1);
  stamps.back() = duration;
  return {x, std::move(stamps)};
}

}  // namespace styleopt
