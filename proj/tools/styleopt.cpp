// styleopt: oracle training, the labeling service, planning and evaluation.

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "styleopt/errors.hpp"
#include "styleopt/optimizer.hpp"
#include "styleopt/query.hpp"
#include "styleopt/serialization.hpp"
#include "styleopt/service.hpp"
#include "styleopt/store.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace styleopt;

namespace {

constexpr int kConfigError = 2;

// Bad flags, files or values supplied by the user.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

Eigen::VectorXd parse_vector(const std::string& text, const std::string& what) {
  std::string cleaned = text;
  for (char& c : cleaned) {
    if (c == ',' || c == '[' || c == ']') c = ' ';
  }
  std::istringstream in(cleaned);
  std::vector<double> values;
  std::string token;
  while (in >> token) {
    try {
      std::size_t used = 0;
      values.push_back(std::stod(token, &used));
      if (used != token.size()) throw std::invalid_argument(token);
    } catch (const std::exception&) {
      throw ConfigError(what + ": '" + token + "' is not a number");
    }
  }
  if (values.empty()) throw ConfigError(what + " is empty");
  return Eigen::Map<Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

StyleCost load_cost(const std::string& path) {
  try {
    return cost_from_json(read_json_file(path));
  } catch (const std::exception& e) {
    throw ConfigError("cannot load cost from " + path + ": " + e.what());
  }
}

Session open_session(const std::string& dir) {
  try {
    return load_session(dir);
  } catch (const std::exception& e) {
    throw ConfigError("cannot load session " + dir + ": " + e.what());
  }
}

// Values from a JSON file fill options not given on the command line. Keys
// are long flag names without the leading dashes.
void merge_config(CLI::App& sub, const std::string& path) {
  json doc;
  try {
    doc = read_json_file(path);
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  if (!doc.is_object()) throw ConfigError(path + ": config must be a JSON object");
  for (const auto& [key, value] : doc.items()) {
    CLI::Option* opt = sub.get_option_no_throw("--" + key);
    if (opt == nullptr || key == "config") {
      throw ConfigError(path + ": unknown key '" + key + "' for " + sub.get_name());
    }
    if (opt->count() > 0) continue;
    std::string text;
    if (value.is_string()) {
      text = value.get<std::string>();
    } else if (value.is_boolean()) {
      text = value.get<bool>() ? "true" : "false";
    } else if (value.is_number()) {
      text = value.dump();
    } else if (value.is_array()) {
      for (const auto& v : value) text += (text.empty() ? "" : " ") + v.dump();
    } else {
      throw ConfigError(path + ": unsupported value for '" + key + "'");
    }
    try {
      opt->add_result(text);
      opt->run_callback();
    } catch (const CLI::Error& e) {
      throw ConfigError(path + ": " + key + ": " + e.what());
    }
  }
}

// ---------------------------------------------------------------------------

struct TrainOracleArgs {
  std::string style;
  std::string cost = "featurized";
  std::string oracle;
  std::string oracle_mode = "deterministic";
  int rounds = 25;
  int pairs_per_batch = 4;
  std::uint64_t seed = 0;
  std::string out;
  std::optional<int> epochs;
  std::optional<int> augmentation;
  std::optional<double> learning_rate;
  int waypoints = 10;
  double lambda = 0.5;
  int eval_pairs = 200;
  std::uint64_t eval_seed = 7;
  bool json_output = false;
};

int run_train_oracle(const TrainOracleArgs& a) {
  if (a.oracle.empty()) throw ConfigError("--oracle is required");
  const StyleCost truth = load_cost(a.oracle);

  OracleTrainingConfig cfg;
  cfg.ground_truth = truth;
  cfg.rounds = a.rounds;
  cfg.eval.pairs = a.eval_pairs;
  cfg.eval.seed = a.eval_seed;
  if (a.oracle_mode == "sampled") cfg.oracle_mode = OracleMode::kSampled;

  SessionConfig& s = cfg.session;
  s.style = a.style.empty() ? style_name(truth) : a.style;
  s.cost_type = cost_type_from_string(a.cost);
  if (const auto* f = std::get_if<FeaturizedCost>(&truth)) s.uses_velocity = f->uses_velocity;
  if (s.cost_type == CostType::kMlp) s.uses_velocity = false;
  s.num_waypoints = a.waypoints;
  s.lambda = a.lambda;
  s.pairs_per_batch = a.pairs_per_batch;
  s.seed = a.seed;
  s.trainer.epochs_per_round = a.epochs;
  s.trainer.learning_rate = a.learning_rate;
  if (a.augmentation) s.trainer.augmentation_factor = *a.augmentation;
  s.tasks = default_training_tasks(s.arm);
  try {
    s.validate();
    // Catches an oracle whose weights do not fit this T before any work.
    style_cost(truth, s.arm, linear_interpolation(s.tasks.front(), s.num_waypoints));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }

  if (!a.out.empty()) {
    std::error_code ec;
    fs::create_directories(a.out, ec);
    if (ec) throw ConfigError("cannot create " + a.out + ": " + ec.message());
  }

  const auto t0 = std::chrono::steady_clock::now();
  const std::string id = a.out.empty() ? "oracle" : fs::path(a.out).filename().string();
  const OracleTrainingResult result = run_oracle_training(cfg, id.empty() ? "oracle" : id);
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  json rounds = json::array();
  for (const auto& r : result.rounds) {
    rounds.push_back({{"round", r.round},
                      {"labels", r.labels_total},
                      {"final_loss", r.final_loss ? json(*r.final_loss) : json(nullptr)},
                      {"agreement", r.agreement}});
  }
  json summary = {{"style", s.style},
                  {"cost_type", a.cost},
                  {"rounds", rounds},
                  {"final_agreement", result.final_agreement()},
                  {"labels_total", result.session.labels.size()},
                  {"report", result.last_report ? to_json(*result.last_report) : json(nullptr)},
                  {"seconds", seconds}};
  if (const auto* f = std::get_if<FeaturizedCost>(&result.session.cost)) {
    summary["w"] = to_json(f->weights);
  }

  if (!a.out.empty()) {
    save_session(result.session, a.out);
    write_json_atomic(summary, fs::path(a.out) / "report.json");
    std::cerr << "session written to " << a.out << "\n";
  }

  if (a.json_output) {
    std::cout << summary.dump(2) << "\n";
  } else {
    std::cout << "round\tlabels\tloss\tagreement\n";
    for (const auto& r : result.rounds) {
      std::cout << r.round << '\t' << r.labels_total << '\t';
      if (r.final_loss) {
        std::cout << std::fixed << std::setprecision(6) << *r.final_loss;
      } else {
        std::cout << '-';
      }
      std::cout << '\t' << std::fixed << std::setprecision(3) << r.agreement << '\n';
    }
    std::cout << "final_agreement\t" << std::setprecision(3) << result.final_agreement() << '\n';
  }
  return 0;
}

// ---------------------------------------------------------------------------

std::atomic<bool> g_stop{false};

extern "C" void on_signal(int) { g_stop = true; }

int run_serve(int port, const std::string& host, const std::string& data_dir,
              const std::string& cors_origin) {
  std::unique_ptr<StyleService> service;
  try {
    service = std::make_unique<StyleService>(data_dir);
  } catch (const IoError& e) {
    throw ConfigError(e.what());
  }
  HttpServer server(*service, cors_origin);
  int bound = 0;
  try {
    bound = server.bind(host, port);
  } catch (const IoError& e) {
    throw ConfigError(e.what());
  }
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::thread watcher([&server] {
    while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(50));
    server.stop();
  });
  std::cout << json{{"host", host}, {"port", bound}, {"data_dir", data_dir}}.dump() << std::endl;
  std::cerr << "serving on http://" << host << ':' << bound << " (data in " << data_dir << ")\n";
  server.listen();
  g_stop = true;
  watcher.join();
  return 0;
}

// ---------------------------------------------------------------------------

struct PlanArgs {
  std::string session;
  std::string start;
  std::string goal;
  std::optional<double> lambda;
  std::optional<int> waypoints;
  double duration = 5.0;
  std::string out;
  std::string format;
  bool baseline = false;
};

int run_plan(const PlanArgs& a) {
  const Session s = open_session(a.session);
  const ArmModel& arm = s.config.arm;
  Task task{parse_vector(a.start, "--start"), parse_vector(a.goal, "--goal"), a.duration};
  const int len = a.waypoints.value_or(s.config.num_waypoints);
  ExportFormat fmt = ExportFormat::kJson;
  try {
    check_task(arm, task);
    if (len < 2) throw ValueError("--T must be >= 2");
    fmt = a.format.empty() ? export_format_for(a.out) : export_format_from_string(a.format);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  ObjectiveConfig objective{std::nullopt, a.lambda.value_or(s.config.lambda)};
  if (!a.baseline) objective.style = s.cost;
  std::optional<OptimizeResult> result;
  try {
    result = optimize(objective, arm, task, len, s.config.optimizer);
  } catch (const DimensionError& e) {
    throw ConfigError(e.what());
  }
  const OptimizeResult& r = *result;
  export_trajectory(time_trajectory(r.trajectory, task.duration), a.out, fmt);
  std::cout << json{{"out", a.out},
                    {"T", len},
                    {"lambda", objective.lambda},
                    {"baseline", a.baseline},
                    {"initial_objective", r.objective_history.front()},
                    {"objective", r.objective_history.back()},
                    {"iterations", r.iterations},
                    {"converged", r.converged}}
                   .dump()
            << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct EvalArgs {
  std::string session;
  std::string cost;
  std::string oracle;
  int pairs = 200;
  std::uint64_t seed = 7;
  std::optional<int> waypoints;
  std::optional<double> delta;
};

int run_eval(const EvalArgs& a) {
  if (a.session.empty() == a.cost.empty()) {
    throw ConfigError("give exactly one of --session or --cost");
  }
  if (a.oracle.empty()) throw ConfigError("--oracle is required");
  const StyleCost truth = load_cost(a.oracle);
  ArmModel arm = ArmModel::default_arm();
  StyleCost learned;
  int len = 10;
  double delta = PerturbationSpec{}.delta_magnitude;
  if (!a.session.empty()) {
    Session s = open_session(a.session);
    arm = s.config.arm;
    learned = s.cost;
    len = s.config.num_waypoints;
    delta = s.config.perturbation.delta_magnitude;
  } else {
    learned = load_cost(a.cost);
  }
  len = a.waypoints.value_or(len);
  delta = a.delta.value_or(delta);
  double agreement = 0.0;
  try {
    const auto pairs = heldout_pairs(default_heldout_task(arm), len, a.pairs, delta, a.seed);
    agreement = pairwise_agreement(learned, truth, arm, pairs);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  std::cout << json{{"agreement", agreement}, {"pairs", a.pairs}, {"seed", a.seed}, {"T", len}}
                   .dump()
            << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Learn motion-style costs from pairwise preferences and plan with them."};
  app.require_subcommand(1);

  TrainOracleArgs train;
  std::string train_config;
  auto* t = app.add_subcommand("train-oracle", "Run the query/label/train loop with a synthetic labeler");
  t->add_option("--config", train_config, "JSON file with defaults for these flags");
  t->add_option("--style", train.style, "Style name (default: the oracle's)");
  t->add_option("--cost", train.cost, "Cost family to learn")->check(CLI::IsMember({"featurized", "mlp"}));
  t->add_option("--oracle", train.oracle, "Ground-truth cost JSON");
  t->add_option("--oracle-mode", train.oracle_mode, "Labeling rule")
      ->check(CLI::IsMember({"deterministic", "sampled"}));
  t->add_option("--rounds", train.rounds, "Labeling rounds")->check(CLI::NonNegativeNumber);
  t->add_option("--pairs-per-batch", train.pairs_per_batch, "Pairs per round")->check(CLI::PositiveNumber);
  t->add_option("--seed", train.seed, "Session seed");
  t->add_option("--out", train.out, "Session directory to write");
  t->add_option("--epochs", train.epochs, "Adam steps per round")->check(CLI::NonNegativeNumber);
  t->add_option("--augmentation", train.augmentation, "Rotated copies per pair (MLP)")
      ->check(CLI::NonNegativeNumber);
  t->add_option("--learning-rate", train.learning_rate, "Adam learning rate")->check(CLI::PositiveNumber);
  t->add_option("--T", train.waypoints, "Waypoints per trajectory")->check(CLI::Range(4, 1000));
  t->add_option("--lambda", train.lambda, "Weight of the smoothness term")->check(CLI::NonNegativeNumber);
  t->add_option("--eval-pairs", train.eval_pairs, "Held-out evaluation pairs")->check(CLI::PositiveNumber);
  t->add_option("--eval-seed", train.eval_seed, "Held-out pair seed");
  t->add_flag("--json", train.json_output, "Print a JSON summary instead of a table");

  int port = 8080;
  std::string host = "127.0.0.1";
  std::string data_dir = "sessions";
  std::string cors_origin = "*";
  std::string serve_config;
  auto* sv = app.add_subcommand("serve", "Serve the labeling HTTP API");
  sv->add_option("--config", serve_config, "JSON file with defaults for these flags");
  sv->add_option("--port", port, "TCP port (0 picks a free one)")->check(CLI::Range(0, 65535));
  sv->add_option("--host", host, "Bind address");
  sv->add_option("--data-dir", data_dir, "Session storage root")->envname("STYLE_OPT_DATA_DIR");
  sv->add_option("--cors-origin", cors_origin, "Access-Control-Allow-Origin value");

  PlanArgs plan;
  std::string plan_config;
  auto* p = app.add_subcommand("plan", "Optimize a trajectory with a session's learned cost");
  p->add_option("--config", plan_config, "JSON file with defaults for these flags");
  p->add_option("--session", plan.session, "Session directory");
  p->add_option("--start", plan.start, "Start configuration, e.g. \"0 0.3 0.5\"");
  p->add_option("--goal", plan.goal, "Goal configuration");
  p->add_option("--lambda", plan.lambda, "Weight of the smoothness term")->check(CLI::NonNegativeNumber);
  p->add_option("--T", plan.waypoints, "Waypoints")->check(CLI::Range(2, 100000));
  p->add_option("--duration", plan.duration, "Seconds from start to goal")->check(CLI::PositiveNumber);
  p->add_option("--out", plan.out, "Output file (.json or .csv)");
  p->add_option("--format", plan.format, "Override the output format")->check(CLI::IsMember({"json", "csv"}));
  p->add_flag("--baseline", plan.baseline, "Drop the style term (smoothness only)");

  EvalArgs eval;
  std::string eval_config;
  auto* e = app.add_subcommand("eval", "Held-out pairwise agreement against an oracle");
  e->add_option("--config", eval_config, "JSON file with defaults for these flags");
  e->add_option("--session", eval.session, "Session directory holding the learned cost");
  e->add_option("--cost", eval.cost, "Learned cost JSON (instead of --session)");
  e->add_option("--oracle", eval.oracle, "Ground-truth cost JSON");
  e->add_option("--pairs", eval.pairs, "Evaluation pairs")->check(CLI::PositiveNumber);
  e->add_option("--seed", eval.seed, "Pair seed");
  e->add_option("--T", eval.waypoints, "Waypoints (default: the session's)")->check(CLI::Range(4, 100000));
  e->add_option("--delta", eval.delta, "Perturbation size (rad)")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& err) {
    return app.exit(err);
  } catch (const CLI::CallForAllHelp& err) {
    return app.exit(err);
  } catch (const CLI::ParseError& err) {
    app.exit(err);
    return kConfigError;
  }

  try {
    if (t->parsed()) {
      if (!train_config.empty()) merge_config(*t, train_config);
      return run_train_oracle(train);
    }
    if (sv->parsed()) {
      if (!serve_config.empty()) merge_config(*sv, serve_config);
      return run_serve(port, host, data_dir, cors_origin);
    }
    if (p->parsed()) {
      if (!plan_config.empty()) merge_config(*p, plan_config);
      if (plan.session.empty() || plan.start.empty() || plan.goal.empty() || plan.out.empty()) {
        throw ConfigError("plan needs --session, --start, --goal and --out");
      }
      return run_plan(plan);
    }
    if (e->parsed()) {
      if (!eval_config.empty()) merge_config(*e, eval_config);
      return run_eval(eval);
    }
  } catch (const ConfigError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kConfigError;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  }
  return 1;
}
