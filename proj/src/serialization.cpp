#include "styleopt/serialization.hpp"

#include <cmath>
#include <sstream>
#include <string>

#include "styleopt/errors.hpp"

namespace styleopt {

namespace {

const json& field(const json& j, const char* key) {
  if (!j.is_object()) throw ValueError(std::string("expected an object holding '") + key + "'");
  auto it = j.find(key);
  if (it == j.end()) throw ValueError(std::string("missing field '") + key + "'");
  return *it;
}

template <class T>
T get(const json& j, const char* key) {
  const json& v = field(j, key);
  try {
    return v.get<T>();
  } catch (const json::exception&) {
    throw ValueError(std::string("field '") + key + "' has the wrong type");
  }
}

template <class T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.is_object() || !j.contains(key) || j.at(key).is_null()) return fallback;
  return get<T>(j, key);
}

double number(const json& v, const std::string& what) {
  if (!v.is_number()) throw ValueError(what + " must be a number");
  return v.get<double>();
}

}  // namespace

json to_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

Eigen::VectorXd vector_from_json(const json& j, const std::string& what) {
  if (!j.is_array()) throw ValueError(what + " must be an array of numbers");
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = number(j[i], what);
  return v;
}

// ---------------------------------------------------------------------------

json to_json(const ArmModel& arm) {
  json limits = nullptr;
  if (arm.joint_limits()) {
    limits = json::array();
    for (const auto& [lo, hi] : *arm.joint_limits()) limits.push_back({lo, hi});
  }
  return {{"dof", arm.dof()},
          {"link_lengths", arm.link_lengths()},
          {"joint_limits", limits},
          {"base_height", arm.base_height()}};
}

ArmModel arm_from_json(const json& j) {
  const auto links = get<std::vector<double>>(j, "link_lengths");
  const int dof = get_or<int>(j, "dof", static_cast<int>(links.size()));
  if (dof != static_cast<int>(links.size())) {
    throw DimensionError("arm dof " + std::to_string(dof) + " does not match " +
                         std::to_string(links.size()) + " link lengths");
  }
  std::optional<ArmModel::JointLimits> limits;
  if (j.contains("joint_limits") && !j.at("joint_limits").is_null()) {
    limits.emplace();
    for (const auto& pair : j.at("joint_limits")) {
      if (!pair.is_array() || pair.size() != 2) {
        throw ValueError("joint_limits entries must be [lo, hi]");
      }
      limits->emplace_back(number(pair[0], "joint limit"), number(pair[1], "joint limit"));
    }
  }
  return ArmModel(links, limits, get_or<double>(j, "base_height", 0.0));
}

json to_json(const EePose& pose) {
  return {{"position", {pose.position.x(), pose.position.y(), pose.position.z()}},
          {"pointing", {pose.pointing.x(), pose.pointing.y(), pose.pointing.z()}}};
}

json to_json(const std::vector<EePose>& path) {
  json out = json::array();
  for (const auto& p : path) out.push_back(to_json(p));
  return out;
}

json to_json(const Trajectory& x) {
  json rows = json::array();
  for (int t = 0; t < x.length(); ++t) rows.push_back(to_json(Eigen::VectorXd(x.waypoint(t))));
  return {{"dof", x.dof()}, {"T", x.length()}, {"waypoints", rows}};
}

Trajectory trajectory_from_json(const json& j) {
  const json& rows = field(j, "waypoints");
  if (!rows.is_array() || rows.empty()) throw ValueError("waypoints must be a non-empty array");
  const int len = static_cast<int>(rows.size());
  const int dof = get_or<int>(j, "dof", static_cast<int>(rows[0].size()));
  if (get_or<int>(j, "T", len) != len) throw DimensionError("trajectory T does not match waypoints");
  Eigen::MatrixXd m(dof, len);
  for (int t = 0; t < len; ++t) {
    const Eigen::VectorXd q = vector_from_json(rows[t], "waypoint");
    if (q.size() != dof) throw DimensionError("waypoint " + std::to_string(t) + " has wrong dof");
    m.col(t) = q;
  }
  return Trajectory(std::move(m));
}

json to_json(const TimedTrajectory& x) {
  json j = to_json(x.trajectory);
  j["timestamps"] = x.timestamps;
  return j;
}

TimedTrajectory timed_trajectory_from_json(const json& j) {
  Trajectory x = trajectory_from_json(j);
  auto stamps = get<std::vector<double>>(j, "timestamps");
  if (static_cast<int>(stamps.size()) != x.length()) {
    throw DimensionError("timestamps must have one entry per waypoint");
  }
  return {std::move(x), std::move(stamps)};
}

json to_json(const Task& task) {
  return {{"start", to_json(task.start)}, {"goal", to_json(task.goal)},
          {"duration", task.duration}};
}

Task task_from_json(const json& j) {
  Task t{vector_from_json(field(j, "start"), "start"), vector_from_json(field(j, "goal"), "goal"),
         get_or<double>(j, "duration", 5.0)};
  if (t.start.size() != t.goal.size()) throw DimensionError("task start and goal differ in dof");
  return t;
}

json to_json(const PerturbationSpec& spec) {
  return {{"delta_magnitude", spec.delta_magnitude},
          {"count", spec.count},
          {"rng_seed", spec.rng_seed}};
}

PerturbationSpec perturbation_from_json(const json& j) {
  PerturbationSpec s;
  s.delta_magnitude = get_or<double>(j, "delta_magnitude", s.delta_magnitude);
  s.count = get_or<int>(j, "count", s.count);
  s.rng_seed = get_or<std::uint64_t>(j, "rng_seed", s.rng_seed);
  if (!(s.delta_magnitude > 0.0) || s.count < 1) {
    throw ValueError("perturbation needs delta_magnitude > 0 and count >= 1");
  }
  return s;
}

// ---------------------------------------------------------------------------

json to_json(const StyleCost& cost) {
  if (const auto* f = std::get_if<FeaturizedCost>(&cost)) {
    return {{"type", "featurized"},
            {"style", f->style},
            {"uses_velocity", f->uses_velocity},
            {"w", to_json(f->weights)}};
  }
  const auto& m = std::get<MlpCost>(cost);
  json layers = json::array();
  for (const auto& l : m.layers) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
      rows.push_back(to_json(Eigen::VectorXd(l.weight.row(r).transpose())));
    }
    layers.push_back({{"W", rows}, {"b", to_json(Eigen::VectorXd(l.bias.transpose()))}});
  }
  return {{"type", "mlp"},
          {"style", m.style},
          {"dropout", m.dropout},
          {"encoding", MlpCost::kEncoding},
          {"layers", layers}};
}

StyleCost cost_from_json(const json& j) {
  const auto type = get<std::string>(j, "type");
  if (type == "featurized") {
    FeaturizedCost f{get_or<std::string>(j, "style", "style"), vector_from_json(field(j, "w"), "w"),
                     get_or<bool>(j, "uses_velocity", false)};
    const auto n = f.weights.size();
    if ((!f.uses_velocity && n != 3) || (f.uses_velocity && n < 4)) {
      throw DimensionError("featurized cost needs 3 weights, or 3 + (T-1) with velocity");
    }
    return f;
  }
  if (type == "mlp") {
    const auto encoding = get_or<std::string>(j, "encoding", MlpCost::kEncoding);
    if (encoding != MlpCost::kEncoding) throw ValueError("unsupported MLP encoding '" + encoding + "'");
    const json& layers = field(j, "layers");
    if (!layers.is_array() || layers.size() != 3) throw DimensionError("MLP needs exactly 3 layers");
    MlpCost m;
    m.style = get_or<std::string>(j, "style", "style");
    m.dropout = get_or<double>(j, "dropout", 0.1);
    for (int i = 0; i < 3; ++i) {
      const json& rows = field(layers[i], "W");
      if (!rows.is_array() || rows.empty()) throw DimensionError("MLP weight matrix is empty");
      const auto cols = static_cast<Eigen::Index>(rows[0].size());
      m.layers[i].weight.resize(static_cast<Eigen::Index>(rows.size()), cols);
      for (std::size_t r = 0; r < rows.size(); ++r) {
        const Eigen::VectorXd row = vector_from_json(rows[r], "W row");
        if (row.size() != cols) throw DimensionError("ragged MLP weight matrix");
        m.layers[i].weight.row(static_cast<Eigen::Index>(r)) = row.transpose();
      }
      m.layers[i].bias = vector_from_json(field(layers[i], "b"), "b").transpose();
    }
    check_mlp(m);
    return m;
  }
  throw ValueError("unknown cost type '" + type + "'");
}

json to_json(const TrainerSettings& s) {
  json j = {{"beta1", s.beta1},
            {"beta2", s.beta2},                 {"epsilon", s.epsilon},
            {"augmentation_factor", s.augmentation_factor}, {"rng_seed", s.rng_seed}};
  j["learning_rate"] = s.learning_rate ? json(*s.learning_rate) : json(nullptr);
  j["epochs_per_round"] = s.epochs_per_round ? json(*s.epochs_per_round) : json(nullptr);
  return j;
}

TrainerSettings trainer_from_json(const json& j) {
  TrainerSettings s;
  if (j.contains("learning_rate") && !j.at("learning_rate").is_null()) {
    s.learning_rate = get<double>(j, "learning_rate");
  }
  s.beta1 = get_or<double>(j, "beta1", s.beta1);
  s.beta2 = get_or<double>(j, "beta2", s.beta2);
  s.epsilon = get_or<double>(j, "epsilon", s.epsilon);
  s.augmentation_factor = get_or<int>(j, "augmentation_factor", s.augmentation_factor);
  s.rng_seed = get_or<std::uint64_t>(j, "rng_seed", s.rng_seed);
  if (j.contains("epochs_per_round") && !j.at("epochs_per_round").is_null()) {
    s.epochs_per_round = get<int>(j, "epochs_per_round");
  }
  s.validate();
  return s;
}

json to_json(const OptimizerSettings& s) {
  return {{"max_iterations", s.max_iterations},
          {"convergence_tol", s.convergence_tol},
          {"initial_step", s.initial_step},
          {"shrink", s.shrink},
          {"gradient_mode", s.gradient_mode == GradientMode::kFiniteDifference
                                ? "finite-difference"
                                : "analytic-where-available"},
          {"fd_epsilon", s.fd_epsilon}};
}

OptimizerSettings optimizer_settings_from_json(const json& j) {
  OptimizerSettings s;
  s.max_iterations = get_or<int>(j, "max_iterations", s.max_iterations);
  s.convergence_tol = get_or<double>(j, "convergence_tol", s.convergence_tol);
  s.initial_step = get_or<double>(j, "initial_step", s.initial_step);
  s.shrink = get_or<double>(j, "shrink", s.shrink);
  s.fd_epsilon = get_or<double>(j, "fd_epsilon", s.fd_epsilon);
  const auto mode = get_or<std::string>(j, "gradient_mode", "finite-difference");
  if (mode == "finite-difference") {
    s.gradient_mode = GradientMode::kFiniteDifference;
  } else if (mode == "analytic-where-available") {
    s.gradient_mode = GradientMode::kAnalyticWhereAvailable;
  } else {
    throw ValueError("unknown gradient_mode '" + mode + "'");
  }
  s.validate();
  return s;
}

json to_json(const OptimizeResult& r) {
  json j = to_json(r.trajectory);
  j["objective_history"] = r.objective_history;
  j["iterations"] = r.iterations;
  j["converged"] = r.converged;
  return j;
}

json to_json(const TrainingReport& r) {
  return {{"epochs", r.epochs},
          {"initial_loss", r.initial_loss},
          {"final_loss", r.final_loss},
          {"pairs_used", r.pairs_used},
          {"augmented_pairs", r.augmented_pairs}};
}

TrainingReport report_from_json(const json& j) {
  return {get<int>(j, "epochs"), get<double>(j, "initial_loss"), get<double>(j, "final_loss"),
          get<int>(j, "pairs_used"), get<int>(j, "augmented_pairs")};
}

// ---------------------------------------------------------------------------

std::string to_string(Label label) {
  switch (label) {
    case Label::kA:
      return "A";
    case Label::kB:
      return "B";
    case Label::kUnlabeled:
      break;
  }
  return "unlabeled";
}

Label label_from_string(const std::string& s) {
  if (s == "A") return Label::kA;
  if (s == "B") return Label::kB;
  throw ValueError("label must be \"A\" or \"B\", got \"" + s + "\"");
}

json to_json(const PreferencePair& p) {
  return {{"pair_id", p.pair_id},
          {"a", to_json(p.a)},
          {"b", to_json(p.b)},
          {"label", p.label == Label::kUnlabeled ? json(nullptr) : json(to_string(p.label))},
          {"origin", p.origin == PairOrigin::kQuery ? "query" : "augmented"}};
}

PreferencePair pair_from_json(const json& j) {
  PreferencePair p{get<std::string>(j, "pair_id"), trajectory_from_json(field(j, "a")),
                   trajectory_from_json(field(j, "b"))};
  if (p.a.dof() != p.b.dof() || p.a.length() != p.b.length()) {
    throw DimensionError("pair '" + p.pair_id + "' trajectories differ in shape");
  }
  const auto label = get_or<std::string>(j, "label", "");
  p.label = label.empty() ? Label::kUnlabeled : label_from_string(label);
  const auto origin = get_or<std::string>(j, "origin", "query");
  if (origin != "query" && origin != "augmented") throw ValueError("unknown pair origin");
  p.origin = origin == "query" ? PairOrigin::kQuery : PairOrigin::kAugmented;
  return p;
}

json to_json(const QueryBatch& b) {
  json pairs = json::array();
  for (const auto& p : b.pairs) pairs.push_back(to_json(p));
  return {{"batch_id", b.batch_id},
          {"round_index", b.round_index},
          {"task_index", b.task_index},
          {"pairs", pairs}};
}

QueryBatch batch_from_json(const json& j) {
  QueryBatch b{get<std::string>(j, "batch_id"), get<int>(j, "round_index"),
               get_or<int>(j, "task_index", 0), {}};
  for (const auto& p : field(j, "pairs")) b.pairs.push_back(pair_from_json(p));
  if (b.pairs.empty()) throw ValueError("query batch has no pairs");
  return b;
}

std::string to_string(CostType t) { return t == CostType::kMlp ? "mlp" : "featurized"; }

CostType cost_type_from_string(const std::string& s) {
  if (s == "featurized") return CostType::kFeaturized;
  if (s == "mlp") return CostType::kMlp;
  throw ValueError("cost_type must be \"featurized\" or \"mlp\", got \"" + s + "\"");
}

json to_json(const SessionConfig& c) {
  json tasks = json::array();
  for (const auto& t : c.tasks) tasks.push_back(to_json(t));
  return {{"style", c.style},
          {"cost_type", to_string(c.cost_type)},
          {"uses_velocity", c.uses_velocity},
          {"arm", to_json(c.arm)},
          {"tasks", tasks},
          {"T", c.num_waypoints},
          {"lambda", c.lambda},
          {"pairs_per_batch", c.pairs_per_batch},
          {"perturbation", to_json(c.perturbation)},
          {"trainer", to_json(c.trainer)},
          {"optimizer", to_json(c.optimizer)},
          {"seed", c.seed}};
}

SessionConfig config_from_json(const json& j) {
  if (!j.is_object()) throw ValueError("session config must be a JSON object");
  SessionConfig c;
  c.style = get_or<std::string>(j, "style", c.style);
  c.cost_type = cost_type_from_string(get_or<std::string>(j, "cost_type", "featurized"));
  c.uses_velocity = get_or<bool>(j, "uses_velocity", c.uses_velocity);
  if (j.contains("arm")) c.arm = arm_from_json(j.at("arm"));
  if (j.contains("tasks")) {
    for (const auto& t : j.at("tasks")) c.tasks.push_back(task_from_json(t));
  }
  const json empty = json::object();
  const json& settings = j.contains("settings") ? j.at("settings") : empty;
  auto pick = [&](const char* key) -> const json& {
    if (j.contains(key)) return j.at(key);
    if (settings.contains(key)) return settings.at(key);
    return empty;
  };
  c.num_waypoints = get_or<int>(j, "T", get_or<int>(settings, "T", c.num_waypoints));
  c.lambda = get_or<double>(j, "lambda", get_or<double>(settings, "lambda", c.lambda));
  c.pairs_per_batch =
      get_or<int>(j, "pairs_per_batch", get_or<int>(settings, "pairs_per_batch", c.pairs_per_batch));
  c.seed = get_or<std::uint64_t>(j, "seed", get_or<std::uint64_t>(settings, "seed", c.seed));
  c.perturbation = perturbation_from_json(pick("perturbation"));
  c.trainer = trainer_from_json(pick("trainer"));
  c.optimizer = optimizer_settings_from_json(pick("optimizer"));
  c.validate();
  return c;
}

std::string rng_state(const std::mt19937_64& rng) {
  std::ostringstream out;
  out << rng;
  return out.str();
}

std::mt19937_64 rng_from_state(const std::string& state) {
  std::istringstream in(state);
  std::mt19937_64 rng;
  in >> rng;
  if (in.fail()) throw ValueError("corrupt rng state");
  return rng;
}

json to_json(const Session& s) {
  json labels = json::array();
  for (const auto& p : s.labels) labels.push_back(to_json(p));
  return {{"session_id", s.id},
          {"config", to_json(s.config)},
          {"cost", to_json(s.cost)},
          {"labels", labels},
          {"pending", s.pending ? to_json(*s.pending) : json(nullptr)},
          {"round_index", s.round_index},
          {"last_loss", s.last_loss ? json(*s.last_loss) : json(nullptr)},
          {"rng_state", rng_state(s.rng)}};
}

Session session_from_json(const json& j) {
  Session s;
  s.id = get<std::string>(j, "session_id");
  s.config = config_from_json(field(j, "config"));
  s.cost = cost_from_json(field(j, "cost"));
  for (const auto& p : field(j, "labels")) s.labels.push_back(pair_from_json(p));
  if (j.contains("pending") && !j.at("pending").is_null()) {
    s.pending = batch_from_json(j.at("pending"));
  }
  s.round_index = get<int>(j, "round_index");
  if (j.contains("last_loss") && !j.at("last_loss").is_null()) {
    s.last_loss = get<double>(j, "last_loss");
  }
  s.rng = rng_from_state(get<std::string>(j, "rng_state"));

  const int dof = s.config.arm.dof();
  const int len = s.config.num_waypoints;
  auto check_pair = [&](const PreferencePair& p) {
    if (p.a.dof() != dof || p.b.dof() != dof || p.a.length() != len || p.b.length() != len) {
      throw DimensionError("pair '" + p.pair_id + "' does not match the session arm dof / T");
    }
  };
  for (const auto& p : s.labels) check_pair(p);
  if (s.pending) {
    for (const auto& p : s.pending->pairs) check_pair(p);
  }
  if (const auto* f = std::get_if<FeaturizedCost>(&s.cost)) {
    const Eigen::Index expected = f->uses_velocity ? 3 + (len - 1) : 3;
    if (f->weights.size() != expected) throw DimensionError("featurized weights do not match T");
  } else if (std::get<MlpCost>(s.cost).input_width() != mlp_input_width(dof)) {
    throw DimensionError("MLP input width does not match the session arm dof");
  }
  return s;
}

void require_finite(const json& j, const std::string& where) {
  if (j.is_number_float()) {
    if (!std::isfinite(j.get<double>())) throw ValueError("non-finite number in " + where);
  } else if (j.is_array() || j.is_object()) {
    for (const auto& v : j) require_finite(v, where);
  }
}

}  // namespace styleopt
