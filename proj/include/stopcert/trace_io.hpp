#pragma once

// Trace wire format: UTF-8, newline-delimited records, one StepRecord per
// line as a JSON object. Field names match the StepRecord members
// (snake_case), booleans are true/false, optional fields are omitted when
// absent. Lines may carry "schema_version"; when present it must match the
// version the reader declares. Unknown versions are rejected.

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include <json.hpp>

#include "stopcert/trace.hpp"

namespace stopcert {

inline constexpr const char* kTraceSchemaVersion = "stopcert.trace.v1";

struct io_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct parse_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline nlohmann::ordered_json to_json(const StepRecord& row) {
  nlohmann::ordered_json j;
  j["problem_id"] = row.problem_id;
  j["controller_id"] = row.controller_id;
  j["t"] = row.t;
  j["active"] = row.active;
  j["gate"] = row.gate;
  j["probe_invoked"] = row.probe_invoked;
  j["probe_survived"] = row.probe_survived;
  j["evid_invoked"] = row.evid_invoked;
  j["evid_survived"] = row.evid_survived;
  if (row.hidden_bad) j["hidden_bad"] = *row.hidden_bad;
  j["success"] = row.success;
  j["false_admission"] = row.false_admission;
  if (row.rho) j["rho"] = *row.rho;
  if (row.evidence_nats) j["evidence_nats"] = *row.evidence_nats;
  if (row.memory_snapshot_id) j["memory_snapshot_id"] = *row.memory_snapshot_id;
  j["write_mode"] = to_string(row.write_mode);
  return j;
}

inline StepRecord step_record_from_json(const nlohmann::json& j) {
  StepRecord row;
  row.problem_id = j.at("problem_id").get<std::string>();
  row.controller_id = j.at("controller_id").get<std::string>();
  row.t = j.at("t").get<int>();
  row.active = j.at("active").get<bool>();
  row.gate = j.at("gate").get<bool>();
  row.probe_invoked = j.at("probe_invoked").get<bool>();
  row.probe_survived = j.at("probe_survived").get<bool>();
  row.evid_invoked = j.at("evid_invoked").get<bool>();
  row.evid_survived = j.at("evid_survived").get<bool>();
  if (j.contains("hidden_bad")) row.hidden_bad = j.at("hidden_bad").get<bool>();
  row.success = j.at("success").get<bool>();
  row.false_admission = j.at("false_admission").get<bool>();
  if (j.contains("rho")) row.rho = j.at("rho").get<double>();
  if (j.contains("evidence_nats")) {
    row.evidence_nats = j.at("evidence_nats").get<double>();
  }
  if (j.contains("memory_snapshot_id")) {
    row.memory_snapshot_id = j.at("memory_snapshot_id").get<std::string>();
  }
  const auto mode = parse_write_mode(j.at("write_mode").get<std::string>());
  if (!mode) throw parse_error("unknown write_mode");
  row.write_mode = *mode;
  return row;
}

struct IngestOptions {
  std::string schema_version = kTraceSchemaVersion;
  int horizon = 0;  // 0: take each trajectory's own length as T
};

struct RejectedTrajectory {
  std::string problem_id;
  std::string controller_id;
  std::string reason;
};

struct IngestResult {
  std::vector<Trajectory> trajectories;          // validated, calibration-ready
  std::vector<RejectedTrajectory> rejected;      // invalid, excluded
  std::set<std::string> mechanism_disabled_controllers;  // gate-semantics hits
  std::vector<std::string> warnings;
  std::vector<std::string> parse_errors;         // per-line failures
};

namespace detail {

inline IngestResult ingest_records(std::vector<StepRecord> rows,
                                   const IngestOptions& options) {
  IngestResult result;

  using Key = std::pair<std::string, std::string>;
  std::map<Key, std::vector<StepRecord>> grouped;
  std::set<std::tuple<std::string, std::string, int>> seen;
  std::set<Key> duplicated;
  for (StepRecord& row : rows) {
    const auto key = std::make_tuple(row.problem_id, row.controller_id, row.t);
    if (!seen.insert(key).second) {
      duplicated.insert({row.problem_id, row.controller_id});
      continue;
    }
    grouped[{row.problem_id, row.controller_id}].push_back(std::move(row));
  }

  for (auto& [key, steps] : grouped) {
    if (duplicated.count(key)) {
      result.rejected.push_back({key.first, key.second, "duplicate step key"});
      continue;
    }
    std::sort(steps.begin(), steps.end(),
              [](const StepRecord& a, const StepRecord& b) { return a.t < b.t; });
    Trajectory traj{key.first, key.second, std::move(steps), options.horizon};
    try {
      const ValidationReport report = validate_trajectory(traj);
      bool fatal = false;
      for (const Violation& v : report.violations) {
        if (v.code == ViolationCode::GateSemantics) {
          // Flagged, not repaired: the trajectory stays usable for the raw
          // channel but the controller's mechanism bound is disabled.
          result.mechanism_disabled_controllers.insert(key.second);
        } else {
          fatal = true;
        }
      }
      if (fatal) {
        std::ostringstream reason;
        reason << "invariant violations:";
        for (const Violation& v : report.violations) {
          reason << ' ' << to_string(v.code) << "@t=" << v.step;
        }
        result.rejected.push_back({key.first, key.second, reason.str()});
      } else {
        result.trajectories.push_back(std::move(traj));
      }
    } catch (const structural_error& err) {
      result.rejected.push_back({key.first, key.second, err.what()});
    }
  }
  if (grouped.empty()) {
    result.warnings.push_back("no trace records found");
  }
  return result;
}

}  // namespace detail

inline IngestResult ingest_traces_stream(std::istream& in,
                                         const IngestOptions& options = {}) {
  if (options.schema_version != kTraceSchemaVersion) {
    throw parse_error("unknown trace schema version: " + options.schema_version);
  }
  IngestResult partial;
  std::vector<StepRecord> rows;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const nlohmann::json j = nlohmann::json::parse(line);
      if (j.contains("schema_version") &&
          j.at("schema_version").get<std::string>() != options.schema_version) {
        throw parse_error("schema version mismatch");
      }
      rows.push_back(step_record_from_json(j));
    } catch (const std::exception& err) {
      partial.parse_errors.push_back("line " + std::to_string(line_no) + ": " +
                                     err.what());
    }
  }
  IngestResult result = detail::ingest_records(std::move(rows), options);
  result.parse_errors = std::move(partial.parse_errors);
  return result;
}

inline IngestResult ingest_traces(const std::string& path,
                                  const IngestOptions& options = {}) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open trace file: " + path);
  return ingest_traces_stream(in, options);
}

inline void write_traces_stream(std::ostream& out,
                                const std::vector<Trajectory>& trajectories) {
  for (const Trajectory& traj : trajectories) {
    for (const StepRecord& row : traj.steps) {
      out << to_json(row).dump() << '\n';
    }
  }
}

inline void write_traces(const std::string& path,
                         const std::vector<Trajectory>& trajectories) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot open output file: " + path);
  write_traces_stream(out, trajectories);
}

}  // namespace stopcert
