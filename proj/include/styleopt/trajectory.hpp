#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Core>

#include "styleopt/kinematics.hpp"

namespace styleopt {

/// D x T matrix of joint angles; column t is waypoint t (0-based).
class Trajectory {
 public:
  explicit Trajectory(Eigen::MatrixXd waypoints);

  int dof() const { return static_cast<int>(waypoints_.rows()); }
  int length() const { return static_cast<int>(waypoints_.cols()); }

  Eigen::MatrixXd::ConstColXpr waypoint(int t) const { return waypoints_.col(t); }
  void set_waypoint(int t, const Eigen::VectorXd& q) { waypoints_.col(t) = q; }

  double operator()(int d, int t) const { return waypoints_(d, t); }
  double& operator()(int d, int t) { return waypoints_(d, t); }

  const Eigen::MatrixXd& matrix() const { return waypoints_; }

  bool operator==(const Trajectory& other) const {
    return waypoints_.rows() == other.waypoints_.rows() &&
           waypoints_.cols() == other.waypoints_.cols() &&
           waypoints_ == other.waypoints_;
  }

 private:
  Eigen::MatrixXd waypoints_;
};

struct Task {
  Eigen::VectorXd start;
  Eigen::VectorXd goal;
  double duration = 5.0;  // seconds, used for timing only
};

void check_task(const ArmModel& arm, const Task& task);

struct PerturbationSpec {
  double delta_magnitude = 0.35;  // radians, peak displacement
  int count = 7;
  std::uint64_t rng_seed = 0;
};

struct TimedTrajectory {
  Trajectory trajectory;
  std::vector<double> timestamps;
};

/// Sum over consecutive waypoints of the squared joint-space step.
double ssd_cost(const Trajectory& x);
/// d ssd_cost / d x, same shape as x.
Eigen::MatrixXd ssd_gradient(const Trajectory& x);

Trajectory linear_interpolation(const Task& task, int num_waypoints);

/// Solves tridiag(-1, 2, -1) y = rhs (the interior second-difference operator).
Eigen::VectorXd solve_second_difference(const Eigen::VectorXd& rhs);

/// Scalar profile (length T) of the smoothed single-waypoint bump at interior
/// index `peak`: zero at both endpoints, exactly 1 at `peak`, zero discrete
/// second difference everywhere else.
Eigen::VectorXd perturbation_profile(int num_waypoints, int peak);

/// x0 + delta (outer) profile(peak). delta sets the displacement at `peak`.
Trajectory apply_perturbation(const Trajectory& x0, int peak, const Eigen::VectorXd& delta);

/// Draws one random peak and direction from rng and applies it.
Trajectory random_perturbation(const Trajectory& x0, double delta_magnitude,
                               std::mt19937_64& rng);

/// spec.count variants of x0, deterministic in spec.rng_seed.
std::vector<Trajectory> smooth_perturbation(const Trajectory& x0, const PerturbationSpec& spec);

/// Yaw every waypoint by theta. The first waypoint's yaw is wrapped into
/// (-pi, pi]; later waypoints receive the same total shift so the yaw row stays
/// continuous.
Trajectory rotate_trajectory(const Trajectory& x, double theta);

TimedTrajectory time_trajectory(const Trajectory& x, double duration);

}  // namespace styleopt
