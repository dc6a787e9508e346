#include "styleopt/query.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "styleopt/errors.hpp"
#include "styleopt/optimizer.hpp"
#include "styleopt/serialization.hpp"

namespace styleopt {

Oracle::Oracle(StyleCost ground_truth, ArmModel arm, OracleMode mode, std::uint64_t seed)
    : truth_(std::move(ground_truth)), arm_(std::move(arm)), mode_(mode), rng_(seed) {
  if (const auto* f = std::get_if<FeaturizedCost>(&truth_)) {
    if (!f->weights.allFinite()) throw ValueError("oracle weights must be finite");
  } else {
    const auto& m = std::get<MlpCost>(truth_);
    check_mlp(m);
    if (!m.parameters().allFinite()) throw ValueError("oracle weights must be finite");
  }
}

Label Oracle::label(const PreferencePair& pair) {
  return label_costs(style_cost(truth_, arm_, pair.a), style_cost(truth_, arm_, pair.b));
}

Label Oracle::label_costs(double cost_a, double cost_b) {
  if (mode_ == OracleMode::kDeterministic) return cost_a <= cost_b ? Label::kA : Label::kB;
  const double p_a = preference_probabilities(cost_a, cost_b).first;
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng_) < p_a ? Label::kA : Label::kB;
}

// ---------------------------------------------------------------------------

namespace {

int uniform_index(std::mt19937_64& rng, int n) {
  return std::uniform_int_distribution<int>(0, n - 1)(rng);
}

}  // namespace

const QueryBatch& next_batch(Session& session, int pairs_per_batch) {
  if (session.pending && session.pending->unlabeled() > 0) {
    throw StateError("session '" + session.id + "' has " +
                     std::to_string(session.pending->unlabeled()) + " unlabeled pairs pending");
  }
  const SessionConfig& cfg = session.config;
  if (cfg.tasks.empty()) throw StateError("session '" + session.id + "' has no tasks configured");
  if (pairs_per_batch < 1) throw ValueError("pairs_per_batch must be >= 1");

  const int task_index = session.round_index % static_cast<int>(cfg.tasks.size());
  const Task& task = cfg.tasks[task_index];
  const ObjectiveConfig objective{session.cost, cfg.lambda};
  Trajectory x0 =
      optimize(objective, cfg.arm, task, cfg.num_waypoints, cfg.optimizer).trajectory;

  PerturbationSpec spec = cfg.perturbation;
  spec.rng_seed = session.rng();
  std::vector<Trajectory> candidates{x0};
  for (auto& v : smooth_perturbation(x0, spec)) candidates.push_back(std::move(v));

  const int n = static_cast<int>(candidates.size());
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (int i = n - 1; i > 0; --i) std::swap(order[i], order[uniform_index(session.rng, i + 1)]);

  QueryBatch batch;
  batch.batch_id = session.id + "-r" + std::to_string(session.round_index);
  batch.round_index = session.round_index;
  batch.task_index = task_index;
  for (int k = 0; k < pairs_per_batch; ++k) {
    int ia = 0;
    int ib = 0;
    if (2 * k + 1 < n) {
      ia = order[2 * k];
      ib = order[2 * k + 1];
    } else {
      // Not enough fresh candidates left: reuse, but never pair a trajectory
      // with itself.
      ia = uniform_index(session.rng, n);
      ib = uniform_index(session.rng, n - 1);
      if (ib >= ia) ++ib;
    }
    batch.pairs.push_back({batch.batch_id + "-p" + std::to_string(k), candidates[ia],
                           candidates[ib], Label::kUnlabeled, PairOrigin::kQuery});
  }
  session.pending = std::move(batch);
  session.log.push_back(
      {{"kind", "batch"}, {"time", utc_timestamp()}, {"batch", to_json(*session.pending)}});
  return *session.pending;
}

const QueryBatch& next_batch(Session& session) {
  return next_batch(session, session.config.pairs_per_batch);
}

LabelOutcome record_label(Session& session, const std::string& pair_id, Label choice) {
  if (choice == Label::kUnlabeled) throw ValueError("label must be A or B");
  if (!session.pending) throw StateError("session '" + session.id + "' has no pending batch");
  QueryBatch& batch = *session.pending;
  auto it = std::find_if(batch.pairs.begin(), batch.pairs.end(),
                         [&](const PreferencePair& p) { return p.pair_id == pair_id; });
  if (it == batch.pairs.end()) {
    throw NotFoundError("pair '" + pair_id + "' is not in the pending batch");
  }
  if (it->label != Label::kUnlabeled) throw StateError("pair '" + pair_id + "' is already labeled");
  it->label = choice;
  session.log.push_back({{"kind", "label"},
                         {"time", utc_timestamp()},
                         {"pair_id", pair_id},
                         {"choice", to_string(choice)}});

  LabelOutcome outcome;
  outcome.remaining_in_batch = batch.unlabeled();
  if (outcome.remaining_in_batch > 0) return outcome;

  for (auto& p : batch.pairs) session.labels.push_back(std::move(p));
  session.pending.reset();
  TrainerSettings trainer = session.config.trainer;
  trainer.rng_seed = session.rng();
  TrainingResult result = update_weights(session.cost, session.config.arm, session.labels, trainer);
  session.cost = std::move(result.cost);
  session.last_loss = result.report.final_loss;
  session.round_index += 1;
  session.log.push_back({{"kind", "training_round"},
                         {"time", utc_timestamp()},
                         {"round_index", session.round_index},
                         {"report", to_json(result.report)}});
  outcome.trained = true;
  outcome.report = result.report;
  return outcome;
}

Session replay_session(const std::vector<nlohmann::json>& log) {
  if (log.empty() || log.front().value("kind", "") != "config") {
    throw ValueError("session log must start with a config record");
  }
  Session session = create_session(config_from_json(log.front().at("config")),
                                   log.front().at("session_id").get<std::string>());
  std::optional<TrainingReport> last_report;
  for (std::size_t i = 1; i < log.size(); ++i) {
    const auto& rec = log[i];
    const std::string kind = rec.value("kind", "");
    const std::string where = "log record " + std::to_string(i);
    if (kind == "batch") {
      const QueryBatch expected = batch_from_json(rec.at("batch"));
      const QueryBatch& got = next_batch(session, static_cast<int>(expected.pairs.size()));
      if (!(got == expected)) throw StateError(where + ": regenerated batch differs from the log");
    } else if (kind == "label") {
      const auto outcome = record_label(session, rec.at("pair_id").get<std::string>(),
                                        label_from_string(rec.at("choice").get<std::string>()));
      last_report = outcome.report;
    } else if (kind == "training_round") {
      const TrainingReport logged = report_from_json(rec.at("report"));
      if (!last_report || last_report->final_loss != logged.final_loss ||
          session.round_index != rec.at("round_index").get<int>()) {
        throw StateError(where + ": replayed training round differs from the log");
      }
    } else {
      throw ValueError(where + ": unknown record kind '" + kind + "'");
    }
  }
  return session;
}

// ---------------------------------------------------------------------------

Task random_task(const ArmModel& arm, std::mt19937_64& rng, double duration) {
  std::uniform_real_distribution<double> yaw(-2.5, 2.5);
  std::uniform_real_distribution<double> pitch(0.2, 1.2);
  auto draw = [&] {
    Eigen::VectorXd q(arm.dof());
    q[0] = yaw(rng);
    for (int d = 1; d < arm.dof(); ++d) q[d] = pitch(rng);
    return arm.clamp(q);
  };
  Task t;
  t.start = draw();
  t.goal = draw();
  t.duration = duration;
  return t;
}

std::vector<Task> default_training_tasks(const ArmModel& arm, int count) {
  if (count < 1) throw ValueError("need at least one training task");
  std::mt19937_64 rng(101);
  std::vector<Task> tasks;
  for (int i = 0; i < count; ++i) tasks.push_back(random_task(arm, rng));
  return tasks;
}

Task default_heldout_task(const ArmModel& arm) {
  std::mt19937_64 rng(202);
  return random_task(arm, rng);
}

std::vector<std::pair<Trajectory, Trajectory>> heldout_pairs(const Task& task, int num_waypoints,
                                                             int count, double delta_magnitude,
                                                             std::uint64_t seed) {
  if (count < 0) throw ValueError("pair count must be >= 0");
  const Trajectory x0 = linear_interpolation(task, num_waypoints);
  std::mt19937_64 rng(seed);
  std::vector<std::pair<Trajectory, Trajectory>> pairs;
  pairs.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    Trajectory a = random_perturbation(x0, delta_magnitude, rng);
    Trajectory b = random_perturbation(x0, delta_magnitude, rng);
    pairs.emplace_back(std::move(a), std::move(b));
  }
  return pairs;
}

double pairwise_agreement(const StyleCost& learned, const StyleCost& truth, const ArmModel& arm,
                          const std::vector<std::pair<Trajectory, Trajectory>>& pairs) {
  if (pairs.empty()) throw ValueError("agreement needs at least one pair");
  auto sign = [](double v) { return (v > 0.0) - (v < 0.0); };
  double score = 0.0;
  for (const auto& [a, b] : pairs) {
    const int s_learned = sign(style_cost(learned, arm, a) - style_cost(learned, arm, b));
    const int s_truth = sign(style_cost(truth, arm, a) - style_cost(truth, arm, b));
    if (s_learned == 0 || s_truth == 0) {
      score += 0.5;
    } else if (s_learned == s_truth) {
      score += 1.0;
    }
  }
  return score / static_cast<double>(pairs.size());
}

OracleTrainingResult run_oracle_training(const OracleTrainingConfig& config,
                                         const std::string& session_id) {
  if (config.rounds < 0) throw ValueError("rounds must be >= 0");
  if (config.eval.pairs < 1) throw ValueError("eval pairs must be >= 1");
  SessionConfig session_config = config.session;
  if (session_config.tasks.empty()) session_config.tasks = default_training_tasks(session_config.arm);

  OracleTrainingResult result{create_session(std::move(session_config), session_id), {}, {}};
  Session& session = result.session;
  const ArmModel& arm = session.config.arm;
  Oracle oracle(config.ground_truth, arm, config.oracle_mode, session.config.seed + 1);

  const Task eval_task = config.eval.task ? *config.eval.task : default_heldout_task(arm);
  check_task(arm, eval_task);
  const auto eval_pairs =
      heldout_pairs(eval_task, session.config.num_waypoints, config.eval.pairs,
                    session.config.perturbation.delta_magnitude, config.eval.seed);

  result.rounds.push_back(
      {0, 0, std::nullopt, pairwise_agreement(session.cost, config.ground_truth, arm, eval_pairs)});
  for (int r = 1; r <= config.rounds; ++r) {
    const QueryBatch& batch = next_batch(session);
    std::vector<std::pair<std::string, Label>> answers;
    for (const auto& p : batch.pairs) answers.emplace_back(p.pair_id, oracle.label(p));
    LabelOutcome outcome;
    for (const auto& [id, label] : answers) outcome = record_label(session, id, label);
    result.last_report = outcome.report;
    result.rounds.push_back({r, static_cast<int>(session.labels.size()), session.last_loss,
                             pairwise_agreement(session.cost, config.ground_truth, arm, eval_pairs)});
  }
  return result;
}

}  // namespace styleopt
