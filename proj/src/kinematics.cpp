#include "styleopt/kinematics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "styleopt/errors.hpp"
#include "styleopt/trajectory.hpp"

namespace styleopt {

ArmModel::ArmModel(std::vector<double> link_lengths,
                   std::optional<JointLimits> joint_limits, double base_height)
    : link_lengths_(std::move(link_lengths)),
      joint_limits_(std::move(joint_limits)),
      base_height_(base_height) {
  if (link_lengths_.size() < 2) {
    throw DimensionError("arm needs at least 2 joints, got " +
                         std::to_string(link_lengths_.size()));
  }
  double total = 0.0;
  for (double l : link_lengths_) {
    if (!std::isfinite(l) || l < 0.0) {
      throw ValueError("link lengths must be finite and non-negative");
    }
    total += l;
  }
  if (total <= 0.0) throw ValueError("sum of link lengths must be positive");
  if (!std::isfinite(base_height_)) throw ValueError("base_height must be finite");
  if (joint_limits_) {
    if (joint_limits_->size() != link_lengths_.size()) {
      throw DimensionError("joint_limits must have one [lo, hi] per joint");
    }
    for (const auto& [lo, hi] : *joint_limits_) {
      if (!std::isfinite(lo) || !std::isfinite(hi) || lo > hi) {
        throw ValueError("joint limit must satisfy lo <= hi, both finite");
      }
    }
  }
}

ArmModel ArmModel::default_arm() { return ArmModel({0.0, 1.0, 1.0}); }

bool ArmModel::within_limits(const Eigen::VectorXd& q) const {
  if (!joint_limits_) return true;
  for (int j = 0; j < dof(); ++j) {
    const auto& [lo, hi] = (*joint_limits_)[j];
    if (q[j] < lo || q[j] > hi) return false;
  }
  return true;
}

Eigen::VectorXd ArmModel::clamp(const Eigen::VectorXd& q) const {
  if (!joint_limits_) return q;
  Eigen::VectorXd out = q;
  for (int j = 0; j < dof(); ++j) {
    const auto& [lo, hi] = (*joint_limits_)[j];
    out[j] = std::clamp(out[j], lo, hi);
  }
  return out;
}

double wrap_angle(double a) {
  if (a > -std::numbers::pi && a <= std::numbers::pi) return a;
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  double r = std::fmod(a + std::numbers::pi, kTwoPi);
  if (r <= 0.0) r += kTwoPi;
  return r - std::numbers::pi;
}

void check_config(const ArmModel& arm, const Eigen::VectorXd& q) {
  if (q.size() != arm.dof()) {
    throw DimensionError("joint config has " + std::to_string(q.size()) +
                         " entries, arm has dof " + std::to_string(arm.dof()));
  }
  if (!q.allFinite()) throw ValueError("joint config has non-finite entries");
}

namespace {

// Horizontal reach, height and cumulative pitch of the pitch chain.
struct ChainState {
  double radial = 0.0;
  double height = 0.0;
  double total_pitch = 0.0;
};

ChainState pitch_chain(const ArmModel& arm, const Eigen::VectorXd& q) {
  const auto& links = arm.link_lengths();
  ChainState s;
  s.height = arm.base_height() + links[0];
  for (int i = 1; i < arm.dof(); ++i) {
    s.total_pitch += q[i];
    s.radial += links[i] * std::sin(s.total_pitch);
    s.height += links[i] * std::cos(s.total_pitch);
  }
  return s;
}

}  // namespace

EePose forward_kinematics(const ArmModel& arm, const Eigen::VectorXd& q) {
  check_config(arm, q);
  const ChainState s = pitch_chain(arm, q);
  const double c = std::cos(q[0]);
  const double sn = std::sin(q[0]);
  const double sp = std::sin(s.total_pitch);
  EePose pose;
  pose.position = {s.radial * c, s.radial * sn, s.height};
  pose.pointing = {sp * c, sp * sn, std::cos(s.total_pitch)};
  return pose;
}

EeJacobian fk_jacobian(const ArmModel& arm, const Eigen::VectorXd& q) {
  check_config(arm, q);
  const int dof = arm.dof();
  const auto& links = arm.link_lengths();

  std::vector<double> cum(dof, 0.0);
  for (int i = 1; i < dof; ++i) cum[i] = cum[i - 1] + q[i];
  const ChainState s = pitch_chain(arm, q);
  const double c = std::cos(q[0]);
  const double sn = std::sin(q[0]);
  const double total = cum[dof - 1];

  EeJacobian jac{Eigen::Matrix3Xd::Zero(3, dof), Eigen::Matrix3Xd::Zero(3, dof)};
  jac.position.col(0) << -s.radial * sn, s.radial * c, 0.0;
  jac.pointing.col(0) << -std::sin(total) * sn, std::sin(total) * c, 0.0;

  // A pitch joint moves every link distal to it.
  double d_radial = 0.0;
  double d_height = 0.0;
  for (int j = dof - 1; j >= 1; --j) {
    d_radial += links[j] * std::cos(cum[j]);
    d_height -= links[j] * std::sin(cum[j]);
    jac.position.col(j) << d_radial * c, d_radial * sn, d_height;
    jac.pointing.col(j) << std::cos(total) * c, std::cos(total) * sn, -std::sin(total);
  }
  return jac;
}

std::vector<EePose> ee_path(const ArmModel& arm, const Trajectory& x) {
  if (x.dof() != arm.dof()) {
    throw DimensionError("trajectory dof " + std::to_string(x.dof()) +
                         " does not match arm dof " + std::to_string(arm.dof()));
  }
  std::vector<EePose> path;
  path.reserve(x.length());
  for (int t = 0; t < x.length(); ++t) {
    path.push_back(forward_kinematics(arm, x.waypoint(t)));
  }
  return path;
}

Eigen::VectorXd rotate_base(const Eigen::VectorXd& q, double theta) {
  if (!std::isfinite(theta)) throw ValueError("rotation angle must be finite");
  if (q.size() < 1) throw DimensionError("empty joint config");
  Eigen::VectorXd out = q;
  out[0] = wrap_angle(q[0] + theta);
  return out;
}

}  // namespace styleopt
