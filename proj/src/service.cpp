#include "styleopt/service.hpp"

#include <algorithm>
#include <cstdio>
#include <random>
#include <vector>

#include <httplib.h>

#include "styleopt/errors.hpp"
#include "styleopt/optimizer.hpp"
#include "styleopt/query.hpp"
#include "styleopt/serialization.hpp"
#include "styleopt/store.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace styleopt {

namespace {

bool valid_id(const std::string& id) {
  return !id.empty() && id.size() <= 128 && std::all_of(id.begin(), id.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_';
  });
}

std::vector<std::string> split_path(const std::string& path) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : path) {
    if (c == '/') {
      if (!cur.empty()) parts.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) parts.push_back(cur);
  return parts;
}

json trajectory_view(const ArmModel& arm, const Trajectory& x, double duration) {
  json j = to_json(time_trajectory(x, duration));
  j["ee_path"] = to_json(ee_path(arm, x));
  return j;
}

json cost_summary(const StyleCost& cost) {
  if (const auto* f = std::get_if<FeaturizedCost>(&cost)) {
    return {{"type", "featurized"},
            {"style", f->style},
            {"uses_velocity", f->uses_velocity},
            {"w", to_json(f->weights)}};
  }
  const auto& m = std::get<MlpCost>(cost);
  return {{"type", "mlp"},
          {"style", m.style},
          {"dropout", m.dropout},
          {"parameter_count", m.parameter_count()}};
}

const PreferencePair* find_pair(const std::vector<PreferencePair>& pairs, const std::string& id) {
  for (const auto& p : pairs) {
    if (p.pair_id == id) return &p;
  }
  return nullptr;
}

ApiResponse error_response(int status, const std::string& code, const std::string& message) {
  return {status, {{"code", code}, {"message", message}}};
}

}  // namespace

json batch_view(const Session& session, const QueryBatch& batch) {
  const ArmModel& arm = session.config.arm;
  const double duration = session.config.tasks.at(batch.task_index).duration;
  json pairs = json::array();
  for (const auto& p : batch.pairs) {
    pairs.push_back({{"pair_id", p.pair_id},
                     {"label", p.label == Label::kUnlabeled ? json(nullptr) : json(to_string(p.label))},
                     {"a", trajectory_view(arm, p.a, duration)},
                     {"b", trajectory_view(arm, p.b, duration)}});
  }
  return {{"batch_id", batch.batch_id},
          {"session_id", session.id},
          {"style", session.config.style},
          {"round_index", batch.round_index},
          {"task_index", batch.task_index},
          {"remaining", batch.unlabeled()},
          {"pairs", pairs}};
}

StyleService::StyleService(fs::path data_dir) : data_dir_(std::move(data_dir)) {
  std::error_code ec;
  fs::create_directories(data_dir_, ec);
  if (ec) throw IoError("cannot create data directory " + data_dir_.string() + ": " + ec.message());
}

std::string StyleService::fresh_id() {
  static std::mt19937_64 rng{std::random_device{}()};
  for (;;) {
    char buf[20];
    std::snprintf(buf, sizeof buf, "s%012llx",
                  static_cast<unsigned long long>(rng() & 0xffffffffffffULL));
    const std::string id = buf;
    if (!slots_.count(id) && !fs::exists(data_dir_ / id)) return id;
  }
}

std::shared_ptr<StyleService::Slot> StyleService::slot(const std::string& id) {
  if (!valid_id(id)) throw ApiError(404, "session_not_found", "no session '" + id + "'");
  std::lock_guard lock(slots_mutex_);
  if (auto it = slots_.find(id); it != slots_.end()) return it->second;
  const fs::path dir = data_dir_ / id;
  if (!fs::exists(dir / "session.json")) {
    throw ApiError(404, "session_not_found", "no session '" + id + "'");
  }
  auto s = std::make_shared<Slot>();
  try {
    s->session = load_session(dir);
  } catch (const std::exception& e) {
    throw ApiError(500, "corrupt_session", e.what());
  }
  slots_.emplace(id, s);
  return s;
}

json StyleService::create_session(const json& body) {
  SessionConfig config;
  try {
    config = config_from_json(body);
    if (config.tasks.empty()) config.tasks = default_training_tasks(config.arm);
    config.validate();
  } catch (const std::invalid_argument& e) {
    throw ApiError(422, "invalid_config", e.what());
  } catch (const json::exception& e) {
    throw ApiError(422, "invalid_config", e.what());
  }
  auto s = std::make_shared<Slot>();
  std::lock_guard lock(slots_mutex_);
  const std::string id = fresh_id();
  s->session = styleopt::create_session(std::move(config), id);
  save_session(s->session, data_dir_ / id);
  slots_.emplace(id, s);
  return {{"session_id", id}};
}

json StyleService::next_queries(const std::string& id) {
  auto s = slot(id);
  std::unique_lock lock(s->mutex);
  if (s->session.pending && s->session.pending->unlabeled() > 0) {
    throw ApiError(409, "batch_pending",
                   std::to_string(s->session.pending->unlabeled()) + " pairs of batch '" +
                       s->session.pending->batch_id + "' are still unlabeled");
  }
  Session next = s->session;
  next_batch(next);
  save_session(next, data_dir_ / id);
  s->session = std::move(next);
  return batch_view(s->session, *s->session.pending);
}

json StyleService::current_queries(const std::string& id) {
  auto s = slot(id);
  std::shared_lock lock(s->mutex);
  if (!s->session.pending) {
    throw ApiError(404, "no_pending_batch", "session '" + id + "' has no open batch");
  }
  return batch_view(s->session, *s->session.pending);
}

json StyleService::post_label(const std::string& id, const json& body) {
  if (!body.is_object() || !body.contains("pair_id") || !body.at("pair_id").is_string()) {
    throw ApiError(422, "invalid_request", "body needs a string pair_id");
  }
  const std::string pair_id = body.at("pair_id").get<std::string>();
  const json choice_json = body.value("choice", json(nullptr));
  if (!choice_json.is_string() ||
      (choice_json.get<std::string>() != "A" && choice_json.get<std::string>() != "B")) {
    throw ApiError(422, "invalid_label", "choice must be \"A\" or \"B\"");
  }
  const Label choice = label_from_string(choice_json.get<std::string>());

  auto s = slot(id);
  std::unique_lock lock(s->mutex);
  const Session& cur = s->session;
  const PreferencePair* pair = cur.pending ? find_pair(cur.pending->pairs, pair_id) : nullptr;
  if (pair == nullptr) {
    if (find_pair(cur.labels, pair_id)) {
      throw ApiError(409, "already_labeled", "pair '" + pair_id + "' is already labeled");
    }
    throw ApiError(404, "pair_not_found", "no open pair '" + pair_id + "'");
  }
  if (pair->label != Label::kUnlabeled) {
    throw ApiError(409, "already_labeled", "pair '" + pair_id + "' is already labeled");
  }

  Session next = s->session;
  const LabelOutcome outcome = record_label(next, pair_id, choice);
  save_session(next, data_dir_ / id);
  s->session = std::move(next);

  json out = {{"pair_id", pair_id},
              {"remaining_in_batch", outcome.remaining_in_batch},
              {"trained", outcome.trained},
              {"round_index", s->session.round_index}};
  if (outcome.report) {
    out["final_loss"] = outcome.report->final_loss;
    out["report"] = to_json(*outcome.report);
  }
  return out;
}

json StyleService::status(const std::string& id) {
  auto s = slot(id);
  std::shared_lock lock(s->mutex);
  const Session& cur = s->session;
  int labels_total = static_cast<int>(cur.labels.size());
  json pending = nullptr;
  if (cur.pending) {
    labels_total += static_cast<int>(cur.pending->pairs.size()) - cur.pending->unlabeled();
    pending = {{"batch_id", cur.pending->batch_id}, {"unlabeled", cur.pending->unlabeled()}};
  }
  return {{"session_id", cur.id},
          {"style", cur.config.style},
          {"cost_type", to_string(cur.config.cost_type)},
          {"round_index", cur.round_index},
          {"labels_total", labels_total},
          {"last_loss", cur.last_loss ? json(*cur.last_loss) : json(nullptr)},
          {"pending", pending},
          {"training", false},
          {"cost_summary", cost_summary(cur.cost)}};
}

json StyleService::plan(const std::string& id, const json& body) {
  auto s = slot(id);
  std::shared_lock lock(s->mutex);
  const Session& cur = s->session;
  try {
    if (!body.is_object()) throw ValueError("plan body must be a JSON object");
    Task task = task_from_json(body);
    const int len = body.value("T", cur.config.num_waypoints);
    const double lambda = body.value("lambda", cur.config.lambda);
    const bool baseline = body.value("baseline", false);
    if (len < 2) throw ValueError("T must be >= 2");
    check_task(cur.config.arm, task);
    ObjectiveConfig objective{std::nullopt, lambda};
    if (!baseline) objective.style = cur.cost;
    const OptimizeResult r = optimize(objective, cur.config.arm, task, len, cur.config.optimizer);
    json out = trajectory_view(cur.config.arm, r.trajectory, task.duration);
    out["objective_history"] = r.objective_history;
    out["objective"] = r.objective_history.back();
    out["iterations"] = r.iterations;
    out["converged"] = r.converged;
    out["lambda"] = lambda;
    out["baseline"] = baseline;
    return out;
  } catch (const std::invalid_argument& e) {
    throw ApiError(422, "invalid_task", e.what());
  } catch (const json::exception& e) {
    throw ApiError(422, "invalid_task", e.what());
  }
}

ApiResponse StyleService::handle(const std::string& method, const std::string& path,
                                 const std::string& body) noexcept {
  try {
    if (method == "OPTIONS") return {204, nullptr};
    const auto parts = split_path(path);
    json doc = json::object();
    if (method == "POST" && !body.empty()) {
      try {
        doc = json::parse(body);
      } catch (const json::parse_error& e) {
        return error_response(400, "invalid_json", e.what());
      }
    }
    auto route = [&](const char* m) {
      if (method != m) throw ApiError(405, "method_not_allowed", method + " " + path);
    };
    if (parts.size() == 1 && parts[0] == "healthz") {
      route("GET");
      return {200, {{"status", "ok"}}};
    }
    if (!parts.empty() && parts[0] == "sessions") {
      if (parts.size() == 1) {
        route("POST");
        return {201, create_session(doc)};
      }
      const std::string& id = parts[1];
      if (parts.size() == 4 && parts[2] == "queries" && parts[3] == "next") {
        route("GET");
        return {200, next_queries(id)};
      }
      if (parts.size() == 4 && parts[2] == "queries" && parts[3] == "current") {
        route("GET");
        return {200, current_queries(id)};
      }
      if (parts.size() == 3 && parts[2] == "labels") {
        route("POST");
        return {200, post_label(id, doc)};
      }
      if (parts.size() == 3 && parts[2] == "status") {
        route("GET");
        return {200, status(id)};
      }
      if (parts.size() == 3 && parts[2] == "plan") {
        route("POST");
        return {200, plan(id, doc)};
      }
    }
    return error_response(404, "not_found", "no route for " + method + " " + path);
  } catch (const ApiError& e) {
    return error_response(e.status(), e.code(), e.what());
  } catch (const NotFoundError& e) {
    return error_response(404, "not_found", e.what());
  } catch (const StateError& e) {
    return error_response(409, "conflict", e.what());
  } catch (const std::invalid_argument& e) {
    return error_response(422, "invalid_request", e.what());
  } catch (const json::exception& e) {
    return error_response(422, "invalid_request", e.what());
  } catch (const IoError& e) {
    return error_response(500, "storage_error", e.what());
  } catch (const std::exception& e) {
    return error_response(500, "internal_error", e.what());
  }
}

// ---------------------------------------------------------------------------

struct HttpServer::Impl {
  Impl(StyleService& s, std::string origin) : service(s), cors_origin(std::move(origin)) {}

  StyleService& service;
  std::string cors_origin;
  httplib::Server server;
};

HttpServer::HttpServer(StyleService& service, std::string cors_origin)
    : impl_(std::make_unique<Impl>(service, std::move(cors_origin))) {
  auto handler = [this](const httplib::Request& req, httplib::Response& res) {
    const ApiResponse r = impl_->service.handle(req.method, req.path, req.body);
    res.status = r.status;
    res.set_header("Access-Control-Allow-Origin", impl_->cors_origin);
    res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
    if (r.status != 204) res.set_content(r.body.dump(), "application/json");
  };
  auto& svr = impl_->server;
  svr.Get(".*", handler);
  svr.Post(".*", handler);
  svr.Put(".*", handler);
  svr.Delete(".*", handler);
  svr.Patch(".*", handler);
  svr.Options(".*", handler);
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  if (port < 0 || port > 65535) throw ValueError("port must be in [0, 65535]");
  if (port == 0) {
    const int bound = impl_->server.bind_to_any_port(host);
    if (bound < 0) throw IoError("cannot bind " + host + ":0");
    return bound;
  }
  if (!impl_->server.bind_to_port(host, port)) {
    throw IoError("cannot bind " + host + ":" + std::to_string(port));
  }
  return port;
}

void HttpServer::listen() { impl_->server.listen_after_bind(); }

void HttpServer::stop() {
  if (impl_ && impl_->server.is_running()) impl_->server.stop();
}

}  // namespace styleopt
