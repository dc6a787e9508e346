#include "styleopt/session.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <string>

#include "styleopt/errors.hpp"
#include "styleopt/serialization.hpp"

namespace styleopt {

void SessionConfig::validate() const {
  if (num_waypoints < 4) {
    throw ValueError("sessions need T >= 4 waypoints, got " + std::to_string(num_waypoints));
  }
  if (!std::isfinite(lambda) || lambda < 0.0) throw ValueError("lambda must be finite and >= 0");
  if (pairs_per_batch < 1) throw ValueError("pairs_per_batch must be >= 1");
  if (!(perturbation.delta_magnitude > 0.0) || !std::isfinite(perturbation.delta_magnitude)) {
    throw ValueError("perturbation delta_magnitude must be positive");
  }
  if (perturbation.count < 1) throw ValueError("perturbation count must be >= 1");
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    try {
      check_task(arm, tasks[i]);
    } catch (const DimensionError& e) {
      throw DimensionError("task " + std::to_string(i) + ": " + e.what());
    } catch (const ValueError& e) {
      throw ValueError("task " + std::to_string(i) + ": " + e.what());
    }
  }
  trainer.validate();
  optimizer.validate();
}

int QueryBatch::unlabeled() const {
  int n = 0;
  for (const auto& p : pairs) n += p.label == Label::kUnlabeled ? 1 : 0;
  return n;
}

StyleCost initial_cost(const SessionConfig& config) {
  if (config.cost_type == CostType::kMlp) {
    return MlpCost::glorot(config.style, config.arm.dof(), config.seed);
  }
  return FeaturizedCost::zero(config.style, config.uses_velocity, config.num_waypoints);
}

Session create_session(SessionConfig config, std::string id) {
  config.validate();
  Session s;
  s.id = std::move(id);
  s.cost = initial_cost(config);
  s.rng.seed(config.seed);
  s.config = std::move(config);
  s.log.push_back({{"kind", "config"},
                   {"time", utc_timestamp()},
                   {"session_id", s.id},
                   {"config", to_json(s.config)}});
  return s;
}

std::string utc_timestamp() {
  using namespace std::chrono;
  const auto now = system_clock::now();
  const auto ms = duration_cast<milliseconds>(now.time_since_epoch()).count() % 1000;
  const std::time_t secs = system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&secs, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
  char out[40];
  std::snprintf(out, sizeof out, "%s.%03dZ", buf, static_cast<int>(ms));
  return out;
}

}  // namespace styleopt
