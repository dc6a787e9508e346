#pragma once

#include <random>
#include <string>

#include <Eigen/Core>
#include <json.hpp>

#include "styleopt/costs.hpp"
#include "styleopt/kinematics.hpp"
#include "styleopt/learning.hpp"
#include "styleopt/optimizer.hpp"
#include "styleopt/session.hpp"
#include "styleopt/trajectory.hpp"

// JSON mapping for everything that crosses a file or HTTP boundary. Readers
// throw ValueError / DimensionError naming the offending field. Doubles are
// written in shortest round-trip form, so a write/read cycle is bit-exact.

namespace styleopt {

using nlohmann::json;

json to_json(const Eigen::VectorXd& v);
Eigen::VectorXd vector_from_json(const json& j, const std::string& what = "vector");

json to_json(const ArmModel& arm);
ArmModel arm_from_json(const json& j);

json to_json(const EePose& pose);
json to_json(const std::vector<EePose>& path);

json to_json(const Trajectory& x);
Trajectory trajectory_from_json(const json& j);

json to_json(const TimedTrajectory& x);
TimedTrajectory timed_trajectory_from_json(const json& j);

json to_json(const Task& task);
Task task_from_json(const json& j);

json to_json(const PerturbationSpec& spec);
PerturbationSpec perturbation_from_json(const json& j);

json to_json(const StyleCost& cost);
StyleCost cost_from_json(const json& j);

json to_json(const TrainerSettings& s);
TrainerSettings trainer_from_json(const json& j);

json to_json(const OptimizerSettings& s);
OptimizerSettings optimizer_settings_from_json(const json& j);

json to_json(const OptimizeResult& r);

json to_json(const TrainingReport& r);
TrainingReport report_from_json(const json& j);

std::string to_string(Label label);
Label label_from_string(const std::string& s);

json to_json(const PreferencePair& p);
PreferencePair pair_from_json(const json& j);

json to_json(const QueryBatch& b);
QueryBatch batch_from_json(const json& j);

std::string to_string(CostType t);
CostType cost_type_from_string(const std::string& s);

json to_json(const SessionConfig& c);
/// Missing fields take their defaults; tasks must match the arm dof.
SessionConfig config_from_json(const json& j);

std::string rng_state(const std::mt19937_64& rng);
std::mt19937_64 rng_from_state(const std::string& state);

/// Snapshot without the log.
json to_json(const Session& s);
Session session_from_json(const json& j);

/// Throws ValueError if any number in the document is NaN or infinite.
void require_finite(const json& j, const std::string& where = "document");

}  // namespace styleopt
