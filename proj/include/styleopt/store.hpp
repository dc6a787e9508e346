#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "styleopt/session.hpp"
#include "styleopt/trajectory.hpp"

namespace styleopt {

/// Session directory layout: session.json (snapshot), log.jsonl (append-only
/// records), exports/.
///
/// The snapshot is written to a temporary file and renamed into place, so
/// readers never see a partial document. Only log records not yet on disk are
/// appended. Throws IoError with the path on any filesystem failure and
/// ValueError if the snapshot holds a non-finite number.
void save_session(const Session& session, const std::filesystem::path& dir);

/// Snapshot plus log. Throws DimensionError when the stored pairs or weights
/// disagree with the stored arm and T.
Session load_session(const std::filesystem::path& dir);

std::vector<nlohmann::json> read_log(const std::filesystem::path& file);

enum class ExportFormat { kJson, kCsv };

ExportFormat export_format_from_string(const std::string& name);
/// By file extension (.json / .csv).
ExportFormat export_format_for(const std::filesystem::path& file);

/// csv: header time,q1..qD and one row per waypoint. json: timed trajectory.
void export_trajectory(const TimedTrajectory& x, const std::filesystem::path& file,
                       ExportFormat format);

/// Writes `doc` to `file` through a temporary file and rename.
void write_json_atomic(const nlohmann::json& doc, const std::filesystem::path& file);
nlohmann::json read_json_file(const std::filesystem::path& file);

}  // namespace styleopt
