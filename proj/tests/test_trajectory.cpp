#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "styleopt/costs.hpp"
#include "styleopt/errors.hpp"
#include "styleopt/trajectory.hpp"
#include "test_support.hpp"

using namespace styleopt;
using styleopt::testing::dense_perturbation;
using styleopt::testing::random_trajectory;
using std::numbers::pi;

namespace {

Eigen::VectorXd v3(double a, double b, double c) {
  Eigen::VectorXd q(3);
  q << a, b, c;
  return q;
}

}  // namespace

TEST(TrajectoryType, RejectsDegenerateShapes) {
  EXPECT_THROW(Trajectory(Eigen::MatrixXd::Zero(3, 1)), DimensionError);
  EXPECT_THROW(Trajectory(Eigen::MatrixXd::Zero(0, 4)), DimensionError);
  Eigen::MatrixXd bad = Eigen::MatrixXd::Zero(3, 4);
  bad(1, 2) = NAN;
  EXPECT_THROW(Trajectory{bad}, ValueError);
}

TEST(Ssd, ThreeWaypointExample) {
  Eigen::MatrixXd m(1, 3);
  m << 0, 1, 2;
  const Trajectory x(m);
  EXPECT_DOUBLE_EQ(ssd_cost(x), 2.0);
  Eigen::MatrixXd expected(1, 3);
  expected << -2, 0, 2;
  EXPECT_EQ(ssd_gradient(x), expected);
}

TEST(Ssd, NonNegativeAndZeroOnlyWhenStill) {
  std::mt19937_64 rng(2);
  for (int k = 0; k < 100; ++k) EXPECT_GE(ssd_cost(random_trajectory(rng, 3, 8)), 0.0);
  Eigen::MatrixXd still(3, 6);
  still.colwise() = v3(0.1, 0.2, 0.3);
  EXPECT_EQ(ssd_cost(Trajectory(still)), 0.0);
}

TEST(Ssd, GradientMatchesCentralDifferences) {
  std::mt19937_64 rng(4);
  const Trajectory x = random_trajectory(rng, 3, 10);
  const Eigen::MatrixXd g = ssd_gradient(x);
  const double h = 1e-6;
  for (int t = 0; t < x.length(); ++t) {
    for (int d = 0; d < 3; ++d) {
      Trajectory xp = x, xm = x;
      xp(d, t) += h;
      xm(d, t) -= h;
      EXPECT_NEAR(g(d, t), (ssd_cost(xp) - ssd_cost(xm)) / (2 * h), 1e-7);
    }
  }
}

TEST(LinearInterpolation, HitsEndpointsExactlyWithEqualSteps) {
  const Task task{v3(-1.3, 0.2, 0.9), v3(2.1, 1.1, 0.25)};
  const Trajectory x = linear_interpolation(task, 10);
  EXPECT_EQ(x.length(), 10);
  EXPECT_EQ(Eigen::VectorXd(x.waypoint(0)), task.start);
  EXPECT_EQ(Eigen::VectorXd(x.waypoint(9)), task.goal);
  const Eigen::VectorXd step = (task.goal - task.start) / 9.0;
  for (int t = 1; t < 10; ++t) {
    EXPECT_NEAR((x.waypoint(t) - x.waypoint(t - 1) - step).norm(), 0.0, 1e-14);
  }
  EXPECT_THROW(linear_interpolation(task, 1), ValueError);
}

TEST(SecondDifference, ThomasSolveMatchesDenseSolve) {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> g;
  for (int n : {1, 2, 5, 30}) {
    Eigen::VectorXd rhs(n);
    for (int i = 0; i < n; ++i) rhs[i] = g(rng);
    const Eigen::VectorXd dense = styleopt::testing::block_second_difference(n, 1).lu().solve(rhs);
    EXPECT_LT((solve_second_difference(rhs) - dense).norm(), 1e-12);
  }
}

TEST(PerturbationProfile, FiveWaypointTent) {
  const Eigen::VectorXd p = perturbation_profile(5, 2);
  Eigen::VectorXd expected(5);
  expected << 0, 0.5, 1, 0.5, 0;
  EXPECT_LT((p - expected).norm(), 1e-15);
}

TEST(PerturbationProfile, RejectsEndpointPeaks) {
  EXPECT_THROW(perturbation_profile(10, 0), ValueError);
  EXPECT_THROW(perturbation_profile(10, 9), ValueError);
  EXPECT_THROW(perturbation_profile(3, 1), ValueError);
}

TEST(ApplyPerturbation, MatchesDenseBlockSolve) {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> g;
  for (int len : {4, 7, 10, 25}) {
    const Trajectory x0 = random_trajectory(rng, 3, len);
    for (int peak = 1; peak < len - 1; ++peak) {
      const Eigen::VectorXd delta = v3(g(rng), g(rng), g(rng));
      const Trajectory x = apply_perturbation(x0, peak, delta);
      const Eigen::MatrixXd ref = x0.matrix() + dense_perturbation(len, peak, delta);
      EXPECT_LT((x.matrix() - ref).cwiseAbs().maxCoeff(), 1e-12);
    }
  }
}

TEST(RandomPerturbation, SatisfiesStructuralProperties) {
  std::mt19937_64 rng(12);
  const Trajectory x0 = random_trajectory(rng, 3, 10);
  for (int k = 0; k < 200; ++k) {
    const Trajectory x = random_perturbation(x0, 0.35, rng);
    EXPECT_EQ(Eigen::VectorXd(x.waypoint(0)), Eigen::VectorXd(x0.waypoint(0)));
    EXPECT_EQ(Eigen::VectorXd(x.waypoint(9)), Eigen::VectorXd(x0.waypoint(9)));
    const Eigen::MatrixXd d = x.matrix() - x0.matrix();
    Eigen::Index peak = 0;
    d.colwise().norm().maxCoeff(&peak);
    EXPECT_NEAR(d.col(peak).norm(), 0.35, 1e-9);
    for (int t = 1; t < 9; ++t) {
      if (t == peak) continue;
      EXPECT_LT((d.col(t - 1) - 2 * d.col(t) + d.col(t + 1)).norm(), 1e-9);
    }
  }
}

TEST(SmoothPerturbation, DeterministicInSeed) {
  std::mt19937_64 rng(1);
  const Trajectory x0 = random_trajectory(rng, 3, 10);
  PerturbationSpec spec;
  spec.rng_seed = 42;
  const auto a = smooth_perturbation(x0, spec);
  const auto b = smooth_perturbation(x0, spec);
  ASSERT_EQ(a.size(), 7u);
  EXPECT_EQ(a, b);
  spec.rng_seed = 43;
  EXPECT_NE(a, smooth_perturbation(x0, spec));
}

TEST(SmoothPerturbation, RejectsBadSpecs) {
  const Trajectory x0(Eigen::MatrixXd::Zero(3, 10));
  PerturbationSpec spec;
  spec.count = 0;
  EXPECT_THROW(smooth_perturbation(x0, spec), ValueError);
  spec = {};
  spec.delta_magnitude = 0.0;
  EXPECT_THROW(smooth_perturbation(x0, spec), ValueError);
  EXPECT_THROW(smooth_perturbation(Trajectory(Eigen::MatrixXd::Zero(3, 3)), {}), ValueError);
}

TEST(RotateTrajectory, WrapsFirstYawAndKeepsRowContinuous) {
  Eigen::MatrixXd m(3, 3);
  m << 3.0, 3.1, 3.2,
       0.3, 0.4, 0.5,
       0.2, 0.2, 0.2;
  const Trajectory r = rotate_trajectory(Trajectory(m), 0.5);
  EXPECT_NEAR(r(0, 0), 3.5 - 2 * pi, 1e-15);
  EXPECT_GT(r(0, 0), -pi);
  EXPECT_LE(r(0, 0), pi);
  EXPECT_NEAR(r(0, 1) - r(0, 0), 0.1, 1e-12);
  EXPECT_NEAR(r(0, 2) - r(0, 1), 0.1, 1e-12);
  EXPECT_EQ(r.matrix().bottomRows(2), m.bottomRows(2));
}

TEST(RotateTrajectory, PreservesSsdAndEndEffectorFeatures) {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> angle(-10, 10);
  const ArmModel arm = ArmModel::default_arm();
  for (int k = 0; k < 100; ++k) {
    const Trajectory x = random_trajectory(rng, 3, 10, 3.0);
    const Trajectory r = rotate_trajectory(x, angle(rng));
    EXPECT_NEAR(ssd_cost(r), ssd_cost(x), 1e-9);
    const FeatureVector a = extract_features(arm, x);
    const FeatureVector b = extract_features(arm, r);
    EXPECT_NEAR(a.radius, b.radius, 1e-9);
    EXPECT_NEAR(a.height, b.height, 1e-9);
    EXPECT_NEAR(a.orientation, b.orientation, 1e-9);
    EXPECT_LT((a.velocity - b.velocity).norm(), 1e-9);
  }
}

TEST(TimeTrajectory, UniformStamps) {
  const Trajectory x(Eigen::MatrixXd::Zero(3, 3));
  const TimedTrajectory timed = time_trajectory(x, 2.0);
  EXPECT_EQ(timed.timestamps, (std::vector<double>{0.0, 1.0, 2.0}));
  EXPECT_EQ(timed.trajectory, x);
  const TimedTrajectory ten = time_trajectory(Trajectory(Eigen::MatrixXd::Zero(3, 10)), 5.0);
  EXPECT_EQ(ten.timestamps.front(), 0.0);
  EXPECT_EQ(ten.timestamps.back(), 5.0);
  for (size_t i = 1; i < ten.timestamps.size(); ++i) {
    EXPECT_NEAR(ten.timestamps[i] - ten.timestamps[i - 1], 5.0 / 9.0, 1e-12);
  }
  EXPECT_THROW(time_trajectory(x, 0.0), ValueError);
  EXPECT_THROW(time_trajectory(x, -1.0), ValueError);
}

TEST(Task, ValidatedAgainstArm) {
  const ArmModel arm = ArmModel::default_arm();
  EXPECT_NO_THROW(check_task(arm, {v3(0, 0, 0), v3(1, 1, 1)}));
  EXPECT_THROW(check_task(arm, {Eigen::VectorXd::Zero(2), v3(1, 1, 1)}), DimensionError);
  EXPECT_THROW(check_task(arm, {v3(0, 0, 0), v3(1, NAN, 1)}), ValueError);
  EXPECT_THROW(check_task(arm, {v3(0, 0, 0), v3(1, 1, 1), 0.0}), ValueError);
}
