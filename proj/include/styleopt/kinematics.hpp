#pragma once

#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace styleopt {

class Trajectory;

/// Serial arm: joint 1 yaws about world z, joints 2..D pitch about the local y
/// axis of the preceding frame. link_lengths[0] is the vertical column between
/// the yaw joint and the first pitch joint; link_lengths[i] (i >= 1) is the link
/// driven by joint i+1. The zero configuration points straight up.
class ArmModel {
 public:
  using JointLimits = std::vector<std::pair<double, double>>;

  ArmModel(std::vector<double> link_lengths,
           std::optional<JointLimits> joint_limits = std::nullopt,
           double base_height = 0.0);

  /// Yaw joint plus two unit pitch links.
  static ArmModel default_arm();

  int dof() const { return static_cast<int>(link_lengths_.size()); }
  const std::vector<double>& link_lengths() const { return link_lengths_; }
  const std::optional<JointLimits>& joint_limits() const { return joint_limits_; }
  double base_height() const { return base_height_; }

  bool within_limits(const Eigen::VectorXd& q) const;
  /// Clamp to joint limits; identity when limits are off.
  Eigen::VectorXd clamp(const Eigen::VectorXd& q) const;

  bool operator==(const ArmModel&) const = default;

 private:
  std::vector<double> link_lengths_;
  std::optional<JointLimits> joint_limits_;
  double base_height_;
};

struct EePose {
  Eigen::Vector3d position;
  Eigen::Vector3d pointing;  // unit direction of the last link
};

/// Partial derivatives of the pose with respect to each joint (3 x D each).
struct EeJacobian {
  Eigen::Matrix3Xd position;
  Eigen::Matrix3Xd pointing;
};

/// Wrap to (-pi, pi].
double wrap_angle(double a);

void check_config(const ArmModel& arm, const Eigen::VectorXd& q);

EePose forward_kinematics(const ArmModel& arm, const Eigen::VectorXd& q);
EeJacobian fk_jacobian(const ArmModel& arm, const Eigen::VectorXd& q);

/// Pose at every waypoint of x.
std::vector<EePose> ee_path(const ArmModel& arm, const Trajectory& x);

/// Adds theta to the yaw joint and wraps it. Other joints are untouched.
Eigen::VectorXd rotate_base(const Eigen::VectorXd& q, double theta);

}  // namespace styleopt
