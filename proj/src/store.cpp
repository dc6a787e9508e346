#include "styleopt/store.hpp"

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <system_error>

#include "styleopt/errors.hpp"
#include "styleopt/serialization.hpp"

namespace fs = std::filesystem;

namespace styleopt {

namespace {

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

std::size_t count_lines(const fs::path& file) {
  std::ifstream in(file);
  if (!in) return 0;
  std::size_t n = 0;
  std::string line;
  while (std::getline(in, line)) n += line.empty() ? 0 : 1;
  return n;
}

}  // namespace

void write_json_atomic(const nlohmann::json& doc, const fs::path& file) {
  require_finite(doc, file.string());
  if (file.has_parent_path()) ensure_dir(file.parent_path());
  fs::path tmp = file;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out << doc.dump(2) << '\n';
    out.flush();
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, file, ec);
  if (ec) throw IoError("cannot rename " + tmp.string() + " to " + file.string() + ": " + ec.message());
}

nlohmann::json read_json_file(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw IoError("cannot read " + file.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValueError(file.string() + ": " + e.what());
  }
}

void save_session(const Session& session, const fs::path& dir) {
  ensure_dir(dir);
  const fs::path log_file = dir / "log.jsonl";
  const std::size_t on_disk = count_lines(log_file);
  if (on_disk > session.log.size()) {
    throw StateError(log_file.string() + " holds more records than the session being saved");
  }
  if (on_disk < session.log.size()) {
    for (std::size_t i = on_disk; i < session.log.size(); ++i) {
      require_finite(session.log[i], log_file.string());
    }
    std::ofstream out(log_file, std::ios::app);
    if (!out) throw IoError("cannot append to " + log_file.string());
    for (std::size_t i = on_disk; i < session.log.size(); ++i) out << session.log[i].dump() << '\n';
    out.flush();
    if (!out) throw IoError("write failed for " + log_file.string());
  }
  write_json_atomic(to_json(session), dir / "session.json");
}

std::vector<nlohmann::json> read_log(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw IoError("cannot read " + file.string());
  std::vector<nlohmann::json> records;
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty()) continue;
    try {
      records.push_back(nlohmann::json::parse(line));
    } catch (const nlohmann::json::parse_error& e) {
      throw ValueError(file.string() + ":" + std::to_string(number) + ": " + e.what());
    }
  }
  return records;
}

Session load_session(const fs::path& dir) {
  const nlohmann::json doc = read_json_file(dir / "session.json");
  Session s;
  try {
    s = session_from_json(doc);
  } catch (const DimensionError& e) {
    throw DimensionError((dir / "session.json").string() + ": " + e.what());
  } catch (const ValueError& e) {
    throw ValueError((dir / "session.json").string() + ": " + e.what());
  }
  if (fs::exists(dir / "log.jsonl")) s.log = read_log(dir / "log.jsonl");
  return s;
}

ExportFormat export_format_from_string(const std::string& name) {
  if (name == "json") return ExportFormat::kJson;
  if (name == "csv") return ExportFormat::kCsv;
  throw ValueError("unknown export format '" + name + "' (expected json or csv)");
}

ExportFormat export_format_for(const fs::path& file) {
  const std::string ext = file.extension().string();
  if (ext.empty()) throw ValueError("cannot infer export format of " + file.string());
  return export_format_from_string(ext.substr(1));
}

void export_trajectory(const TimedTrajectory& x, const fs::path& file, ExportFormat format) {
  if (static_cast<int>(x.timestamps.size()) != x.trajectory.length()) {
    throw DimensionError("timestamps must have one entry per waypoint");
  }
  if (format == ExportFormat::kJson) {
    write_json_atomic(to_json(x), file);
    return;
  }
  if (!x.trajectory.matrix().allFinite()) throw ValueError("refusing to export a non-finite trajectory");
  std::ostringstream csv;
  csv << std::setprecision(17) << "time";
  for (int d = 0; d < x.trajectory.dof(); ++d) csv << ",q" << d + 1;
  csv << '\n';
  for (int t = 0; t < x.trajectory.length(); ++t) {
    csv << x.timestamps[t];
    for (int d = 0; d < x.trajectory.dof(); ++d) csv << ',' << x.trajectory(d, t);
    csv << '\n';
  }
  if (file.has_parent_path()) ensure_dir(file.parent_path());
  std::ofstream out(file, std::ios::trunc);
  if (!out) throw IoError("cannot write " + file.string());
  out << csv.str();
  out.flush();
  if (!out) throw IoError("write failed for " + file.string());
}

}  // namespace styleopt
