// Acceptance checks A1..A10. Prints one PASS/FAIL line per criterion and exits
// non-zero if any fails. Pass criterion names (e.g. "A3 A9") to run a subset.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

#include "styleopt/errors.hpp"
#include "styleopt/optimizer.hpp"
#include "styleopt/query.hpp"
#include "styleopt/serialization.hpp"
#include "styleopt/store.hpp"

using namespace styleopt;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

constexpr int kSeeds = 5;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

StyleCost load_oracle(const std::string& name) {
  return cost_from_json(read_json_file(fs::path(STYLEOPT_ORACLE_DIR) / (name + ".json")));
}

double rel_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return (a - b).norm() / std::max({a.norm(), b.norm(), 1e-12});
}

std::string fmt(double v, int precision = 4) {
  std::ostringstream s;
  s.precision(precision);
  s << v;
  return s.str();
}

// ---------------------------------------------------------------------------

Outcome a1_ssd_optimality() {
  const auto t0 = Clock::now();
  const ArmModel arm = ArmModel::default_arm();
  std::mt19937_64 rng(2024);
  double worst = 0.0;
  int converged = 0;
  for (int k = 0; k < 20; ++k) {
    const Task task = random_task(arm, rng);
    const Trajectory line = linear_interpolation(task, 10);
    // Start away from the answer so the optimizer has work to do.
    const Trajectory init = random_perturbation(line, 0.35, rng);
    const OptimizeResult r = optimize({std::nullopt, 0.5}, arm, task, 10, {}, init);
    converged += r.converged ? 1 : 0;
    const Eigen::MatrixXd diff = r.trajectory.matrix() - line.matrix();
    worst = std::max(worst, diff.middleCols(1, 8).cwiseAbs().maxCoeff());
  }
  const double secs = seconds_since(t0);
  return {worst < 1e-3 && secs < 5.0,
          "max interior deviation " + fmt(worst) + " rad, " + std::to_string(converged) +
              "/20 converged, " + fmt(secs, 3) + " s"};
}

Outcome a2_gradients() {
  const auto t0 = Clock::now();
  const ArmModel arm = ArmModel::default_arm();
  std::mt19937_64 rng(7);
  auto smooth = [&] {
    Task t = random_task(arm, rng);
    return random_perturbation(linear_interpolation(t, 10), 0.2, rng);
  };

  double feat_closed = 0.0;
  double feat_fd = 0.0;
  double feat_traj = 0.0;
  for (int k = 0; k < 20; ++k) {
    PreferencePair p{"p", smooth(), smooth(), k % 2 ? Label::kA : Label::kB};
    Eigen::VectorXd w(3);
    w << 0.97, 0.42, -0.50;
    const FeaturizedCost c{"sad", w * (1.0 + 0.1 * k), false};
    const Eigen::VectorXd g = pair_loss_gradient(StyleCost(c), arm, p);

    const Eigen::VectorXd fa = extract_features(arm, p.a).stacked(false);
    const Eigen::VectorXd fb = extract_features(arm, p.b).stacked(false);
    const Eigen::VectorXd diff = p.label == Label::kA ? Eigen::VectorXd(fa - fb)
                                                      : Eigen::VectorXd(fb - fa);
    const double z = c.weights.dot(diff);
    const Eigen::VectorXd closed = diff / (1.0 + std::exp(-z));
    feat_closed = std::max(feat_closed, rel_error(g, closed));

    Eigen::VectorXd numeric(3);
    for (int i = 0; i < 3; ++i) {
      FeaturizedCost up = c, down = c;
      up.weights[i] += 1e-6;
      down.weights[i] -= 1e-6;
      numeric[i] = (pair_loss(StyleCost(up), arm, p) - pair_loss(StyleCost(down), arm, p)) / 2e-6;
    }
    feat_fd = std::max(feat_fd, rel_error(g, numeric));

    const Eigen::MatrixXd analytic = featurized_cost_gradient(c, arm, p.a);
    const Eigen::MatrixXd fd = numeric_gradient(
        [&](const Trajectory& x) { return featurized_cost(c, arm, x); }, p.a, 1e-6);
    feat_traj = std::max(feat_traj, rel_error(analytic.reshaped(), fd.reshaped()));
  }

  double mlp_cost = 0.0;
  double mlp_loss = 0.0;
  for (int k = 0; k < 3; ++k) {
    const MlpCost net = MlpCost::glorot("m", 3, 100 + k);
    const PreferencePair p{"p", smooth(), smooth(), Label::kA};
    const Eigen::VectorXd params = net.parameters();
    const Eigen::VectorXd g_cost = flatten(mlp_cost_gradient(net, arm, p.a));
    const Eigen::VectorXd g_loss = pair_loss_gradient(StyleCost(net), arm, p);
    Eigen::VectorXd n_cost(params.size());
    Eigen::VectorXd n_loss(params.size());
    MlpCost probe = net;
    const double h = 1e-6;
    for (Eigen::Index i = 0; i < params.size(); ++i) {
      Eigen::VectorXd q = params;
      q[i] += h;
      probe.set_parameters(q);
      const double cost_up = style_cost(StyleCost(probe), arm, p.a);
      const double loss_up = pair_loss(StyleCost(probe), arm, p);
      q[i] -= 2 * h;
      probe.set_parameters(q);
      n_cost[i] = (cost_up - style_cost(StyleCost(probe), arm, p.a)) / (2 * h);
      n_loss[i] = (loss_up - pair_loss(StyleCost(probe), arm, p)) / (2 * h);
    }
    mlp_cost = std::max(mlp_cost, rel_error(g_cost, n_cost));
    mlp_loss = std::max(mlp_loss, rel_error(g_loss, n_loss));
  }
  const double secs = seconds_since(t0);
  const bool pass = feat_closed < 1e-6 && feat_fd < 1e-6 && feat_traj < 1e-6 && mlp_cost < 1e-3 &&
                    mlp_loss < 1e-3 && secs < 10.0;
  return {pass, "featurized loss vs closed form " + fmt(feat_closed, 2) + ", vs FD " +
                    fmt(feat_fd, 2) + ", cost wrt waypoints vs FD " + fmt(feat_traj, 2) +
                    "; MLP cost " + fmt(mlp_cost, 2) + ", loss " + fmt(mlp_loss, 2) + "; " +
                    fmt(secs, 3) + " s"};
}

OracleTrainingConfig featurized_run(const StyleCost& truth, int rounds, std::uint64_t seed) {
  OracleTrainingConfig cfg;
  cfg.session.style = style_name(truth);
  cfg.session.cost_type = CostType::kFeaturized;
  cfg.session.uses_velocity = std::get<FeaturizedCost>(truth).uses_velocity;
  cfg.session.seed = seed;
  cfg.ground_truth = truth;
  cfg.rounds = rounds;
  return cfg;
}

Outcome a3_featurized_recovery() {
  const auto t0 = Clock::now();
  const StyleCost truth = load_oracle("sad");
  const Eigen::VectorXd target = std::get<FeaturizedCost>(truth).weights.normalized();
  int good = 0;
  std::string per_seed;
  for (int seed = 0; seed < kSeeds; ++seed) {
    const OracleTrainingResult r = run_oracle_training(featurized_run(truth, 25, seed));
    const Eigen::VectorXd w = std::get<FeaturizedCost>(r.session.cost).weights.normalized();
    bool signs = true;
    for (int i = 0; i < 3; ++i) signs = signs && (w[i] > 0) == (target[i] > 0) && w[i] != 0.0;
    const bool ok = r.final_agreement() >= 0.9 && signs && r.session.labels.size() == 100;
    good += ok ? 1 : 0;
    per_seed += (seed ? ", " : "") + fmt(r.final_agreement(), 3) + (signs ? "" : " (sign)");
  }
  const double secs = seconds_since(t0);
  return {good >= 4 && secs < 120.0, std::to_string(good) + "/5 seeds >= 0.90 with matching signs [" +
                                         per_seed + "], " + fmt(secs, 3) + " s"};
}

// 75 rounds x 4 pairs = 300 labels, queried over 8 tasks.
constexpr int kMlpTasks = 8;
constexpr int kMlpEpochs = 40;
constexpr int kMlpAugmentation = 2;
constexpr double kMlpLearningRate = 3e-3;

Outcome a4_mlp_recovery() {
  const auto t0 = Clock::now();
  const StyleCost truth = load_oracle("sad");
  int good = 0;
  std::string per_seed;
  for (int seed = 0; seed < kSeeds; ++seed) {
    OracleTrainingConfig cfg;
    cfg.session.style = "sad";
    cfg.session.cost_type = CostType::kMlp;
    cfg.session.seed = seed;
    cfg.session.tasks = default_training_tasks(cfg.session.arm, kMlpTasks);
    cfg.session.trainer.epochs_per_round = kMlpEpochs;
    cfg.session.trainer.augmentation_factor = kMlpAugmentation;
    cfg.session.trainer.learning_rate = kMlpLearningRate;
    cfg.ground_truth = truth;
    cfg.rounds = 75;
    const OracleTrainingResult r = run_oracle_training(cfg);
    const bool ok = r.final_agreement() >= 0.8 && r.session.labels.size() == 300;
    good += ok ? 1 : 0;
    per_seed += (seed ? ", " : "") + fmt(r.final_agreement(), 3);
  }
  const double secs = seconds_since(t0);
  return {good >= 4 && secs < 600.0,
          std::to_string(good) + "/5 seeds >= 0.80 [" + per_seed + "], " + fmt(secs, 4) + " s"};
}

double mean_segment(const Trajectory& x, int first, int count) {
  double s = 0.0;
  for (int i = first; i < first + count; ++i) s += (x.waypoint(i + 1) - x.waypoint(i)).norm();
  return s / count;
}

Outcome a5_hesitant_velocity() {
  const auto t0 = Clock::now();
  const StyleCost truth = load_oracle("hesitant");
  const ArmModel arm = ArmModel::default_arm();
  const Task heldout = default_heldout_task(arm);
  int good = 0;
  std::string per_seed;
  for (int seed = 0; seed < kSeeds; ++seed) {
    const OracleTrainingResult r = run_oracle_training(featurized_run(truth, 25, seed));
    const SessionConfig& c = r.session.config;
    const Trajectory plan =
        optimize({r.session.cost, c.lambda}, arm, heldout, c.num_waypoints, c.optimizer).trajectory;
    const double early = mean_segment(plan, 0, 3);
    const double late = mean_segment(plan, c.num_waypoints - 4, 3);
    good += late < early ? 1 : 0;
    per_seed += (seed ? ", " : "") + fmt(early, 3) + "->" + fmt(late, 3);
  }
  return {good >= 4, std::to_string(good) + "/5 seeds slow down (first3->last3 mean segment: " +
                         per_seed + "), " + fmt(seconds_since(t0), 3) + " s"};
}

Outcome a6_perturbation_properties() {
  std::mt19937_64 rng(66);
  std::uniform_int_distribution<int> len_dist(4, 30);
  std::uniform_real_distribution<double> coord(-3.0, 3.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::exponential_distribution<double> scale(2.0);
  int bad_endpoints = 0;
  double peak_err = 0.0;
  double second_diff = 0.0;
  for (int k = 0; k < 1000; ++k) {
    const int len = len_dist(rng);
    Eigen::MatrixXd m(3, len);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = coord(rng);
    const Trajectory x0(m);
    const int peak = std::uniform_int_distribution<int>(1, len - 2)(rng);
    Eigen::VectorXd delta(3);
    for (int d = 0; d < 3; ++d) delta[d] = gauss(rng);
    delta *= scale(rng) + 1e-3;
    const Trajectory x = apply_perturbation(x0, peak, delta);
    if (x.waypoint(0) != x0.waypoint(0) || x.waypoint(len - 1) != x0.waypoint(len - 1)) {
      ++bad_endpoints;
    }
    const Eigen::MatrixXd d = x.matrix() - x0.matrix();
    peak_err = std::max(peak_err, std::abs(d.col(peak).norm() - delta.norm()));
    for (int t = 1; t < len - 1; ++t) {
      if (t == peak) continue;
      second_diff = std::max(second_diff, (d.col(t - 1) - 2 * d.col(t) + d.col(t + 1)).norm());
    }
  }
  return {bad_endpoints == 0 && peak_err <= 1e-9 && second_diff <= 1e-9,
          "1000 perturbations: endpoint mismatches " + std::to_string(bad_endpoints) +
              ", max |peak - |delta|| " + fmt(peak_err, 2) + ", max second difference off-peak " +
              fmt(second_diff, 2)};
}

Outcome a7_rotation_invariance() {
  const ArmModel arm = ArmModel::default_arm();
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> coord(-3.0, 3.0);
  std::uniform_real_distribution<double> angle(-4 * std::numbers::pi, 4 * std::numbers::pi);
  const StyleCost truth = load_oracle("hesitant");
  Oracle oracle(truth, arm);
  double worst = 0.0;
  int flipped = 0;
  for (int k = 0; k < 1000; ++k) {
    Eigen::MatrixXd ma(3, 10), mb(3, 10);
    for (Eigen::Index i = 0; i < ma.size(); ++i) {
      ma.data()[i] = coord(rng);
      mb.data()[i] = coord(rng);
    }
    const Trajectory a(ma);
    const Trajectory b(mb);
    const double theta = angle(rng);
    const Eigen::VectorXd fa = extract_features(arm, a).stacked(true);
    const Eigen::VectorXd fr = extract_features(arm, rotate_trajectory(a, theta)).stacked(true);
    worst = std::max(worst, (fa - fr).cwiseAbs().maxCoeff());

    PreferencePair pair{"p", a, b};
    pair.label = oracle.label(pair);
    for (const auto& aug : augment_rotations(pair, 2, rng)) {
      if (aug.label != pair.label || oracle.label(aug) != pair.label) ++flipped;
    }
  }
  return {worst <= 1e-9 && flipped == 0,
          "1000 cases: max feature change " + fmt(worst, 2) + ", augmented labels changed " +
              std::to_string(flipped) + "/2000"};
}

Outcome a8_bradley_terry() {
  const ArmModel arm = ArmModel::default_arm();
  Oracle oracle(load_oracle("sad"), arm, OracleMode::kSampled, 88);
  double worst = 0.0;
  std::string per_gap;
  for (double gap : {-2.0, -0.5, 0.0, 0.7, 3.0}) {
    const double cost_a = 1.3;
    const double cost_b = cost_a + gap;
    const double p = preference_probabilities(cost_a, cost_b).first;
    int a = 0;
    for (int i = 0; i < 10000; ++i) a += oracle.label_costs(cost_a, cost_b) == Label::kA ? 1 : 0;
    const double err = std::abs(a / 10000.0 - p);
    worst = std::max(worst, err);
    per_gap += (per_gap.empty() ? "" : ", ") + fmt(gap, 2) + ":" + fmt(a / 10000.0, 4) + "/" +
               fmt(p, 4);
  }
  double sum_err = 0.0;
  const double extremes[] = {0.0, 1e-300, -1e-300, 1.0, -1.0, 36.0, -36.0, 709.0, -709.0,
                             745.0, -745.0, 1e6, -1e6, 1e300, -1e300};
  for (double x : extremes) {
    for (double y : extremes) {
      const auto [pa, pb] = preference_probabilities(x, y);
      sum_err = std::max(sum_err, std::abs(pa + pb - 1.0));
    }
  }
  return {worst <= 0.02 && sum_err <= 1e-12,
          "max |freq - P| " + fmt(worst, 3) + " [" + per_gap + "], max |P(A)+P(B)-1| " +
              fmt(sum_err, 2)};
}

Outcome a9_replay_determinism() {
  const fs::path root =
      fs::temp_directory_path() / ("styleopt-acceptance-" + std::to_string(::getpid()));
  fs::remove_all(root);
  const StyleCost truth = load_oracle("sad");
  bool all = true;
  std::string detail;
  for (CostType type : {CostType::kFeaturized, CostType::kMlp}) {
    SessionConfig c;
    c.style = "sad";
    c.cost_type = type;
    c.tasks = default_training_tasks(c.arm);
    c.seed = 9;
    if (type == CostType::kMlp) {
      c.trainer.epochs_per_round = 20;
      c.trainer.augmentation_factor = 2;
    }
    Session s = create_session(c, to_string(type));
    Oracle oracle(truth, c.arm);
    for (int r = 0; r < 3; ++r) {
      const QueryBatch batch = next_batch(s);
      for (const auto& p : batch.pairs) record_label(s, p.pair_id, oracle.label(p));
    }
    const fs::path dir = root / s.id;
    save_session(s, dir);
    const Session loaded = load_session(dir);
    const Session replayed = replay_session(loaded.log);

    auto params = [](const StyleCost& cost) {
      if (const auto* f = std::get_if<FeaturizedCost>(&cost)) return f->weights;
      return std::get<MlpCost>(cost).parameters();
    };
    const Eigen::VectorXd original = params(s.cost);
    const bool same_loaded = params(loaded.cost) == original;
    const bool same_replayed = params(replayed.cost) == original && replayed.rng == s.rng &&
                               replayed.labels == s.labels && replayed.round_index == 3;
    all = all && same_loaded && same_replayed;
    detail += (detail.empty() ? "" : "; ") + to_string(type) + " " +
              std::to_string(original.size()) + " params " +
              (same_loaded && same_replayed ? "bit-identical" : "DIFFER");
  }
  fs::remove_all(root);
  return {all, detail + " after save -> load -> replay of 3 rounds"};
}

Outcome a10_label_budget() {
  const auto t0 = Clock::now();
  const StyleCost truth = load_oracle("sad");
  int good = 0;
  std::string per_seed;
  for (int seed = 0; seed < kSeeds; ++seed) {
    const OracleTrainingResult r = run_oracle_training(featurized_run(truth, 4, seed));
    good += r.final_agreement() >= 0.75 && r.session.labels.size() == 16 ? 1 : 0;
    per_seed += (seed ? ", " : "") + fmt(r.final_agreement(), 3);
  }
  return {good >= 3, std::to_string(good) + "/5 seeds >= 0.75 with 16 labels [" + per_seed + "], " +
                         fmt(seconds_since(t0), 3) + " s"};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"A1", a1_ssd_optimality},      {"A2", a2_gradients},
      {"A3", a3_featurized_recovery}, {"A4", a4_mlp_recovery},
      {"A5", a5_hesitant_velocity},   {"A6", a6_perturbation_properties},
      {"A7", a7_rotation_invariance}, {"A8", a8_bradley_terry},
      {"A9", a9_replay_determinism},  {"A10", a10_label_budget},
  };
  std::set<std::string> selected(argv + 1, argv + argc);
  int failures = 0;
  for (const auto& [name, check] : criteria) {
    if (!selected.empty() && !selected.count(name)) continue;
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += o.pass ? 0 : 1;
    std::cout << name << (name.size() < 3 ? "  " : " ") << (o.pass ? "PASS" : "FAIL") << "  "
              << o.detail << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
