#pragma once

// Canonical data model for logged stopped-process trajectories.
//
// A trajectory is one (problem, controller) run over refinement steps
// t = 1..len. Each step row records the active flag, the observable
// admission gate, probe/evidence survival, the hidden-judge label when
// available, and the clean-success / false-admission outcome. Validation
// checks the stopped-process invariants; gate-semantics violations carry a
// distinct code because they disable the mechanism-factorized bound for the
// controller instead of rejecting the row.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace stopcert {

enum class WriteMode { AuditOnly, Deploy };

inline const char* to_string(WriteMode mode) {
  return mode == WriteMode::AuditOnly ? "audit-only" : "deploy";
}

inline std::optional<WriteMode> parse_write_mode(const std::string& text) {
  if (text == "audit-only") return WriteMode::AuditOnly;
  if (text == "deploy") return WriteMode::Deploy;
  return std::nullopt;
}

struct StepRecord {
  std::string problem_id;
  std::string controller_id;
  int t = 1;                     // refinement step, 1-based
  bool active = false;           // A_t
  bool gate = false;             // observable admission gate
  bool probe_invoked = false;
  bool probe_survived = true;    // recorded true when not invoked
  bool evid_invoked = false;
  bool evid_survived = true;     // recorded true when not invoked
  std::optional<bool> hidden_bad;  // hidden-judge label, present on labeled rows
  bool success = false;          // S_t
  bool false_admission = false;  // F_t
  std::optional<double> rho;           // residual-risk envelope component
  std::optional<double> evidence_nats; // accumulated evidence at this step
  std::optional<std::string> memory_snapshot_id;
  WriteMode write_mode = WriteMode::AuditOnly;
};

struct Trajectory {
  std::string problem_id;
  std::string controller_id;
  std::vector<StepRecord> steps;  // t = 1..steps.size()
  int horizon = 0;                // T; 0 means "take the step count"

  int effective_horizon() const {
    return horizon > 0 ? horizon : static_cast<int>(steps.size());
  }
};

// Violation codes. GateSemantics is the one downstream consumers must treat
// specially: it disables the mechanism channel rather than dropping data.
enum class ViolationCode {
  MutualExclusivity,      // success and false_admission both set
  AdmissionSemantics,     // S/F inconsistent with active/gate/hidden_bad
  GateSemantics,          // gate passed without probe+evidence survival
  SurvivalConvention,     // survived not recorded true on uninvoked channel
  ActiveStart,            // first step not active
  StoppedZeroing,         // activity or outcomes after the stop
  ActiveRecursion,        // active flag breaks A_{t+1} = A_t and no stop
};

inline const char* to_string(ViolationCode code) {
  switch (code) {
    case ViolationCode::MutualExclusivity: return "MUTUAL_EXCLUSIVITY";
    case ViolationCode::AdmissionSemantics: return "ADMISSION_SEMANTICS";
    case ViolationCode::GateSemantics: return "GATE_SEMANTICS";
    case ViolationCode::SurvivalConvention: return "SURVIVAL_CONVENTION";
    case ViolationCode::ActiveStart: return "ACTIVE_START";
    case ViolationCode::StoppedZeroing: return "STOPPED_ZEROING";
    case ViolationCode::ActiveRecursion: return "ACTIVE_RECURSION";
  }
  return "UNKNOWN";
}

struct Violation {
  ViolationCode code;
  int step;              // 1-based step the violation was detected at
  std::string detail;
};

struct ValidationReport {
  std::vector<Violation> violations;

  bool ok() const { return violations.empty(); }
  bool has(ViolationCode code) const {
    return std::any_of(violations.begin(), violations.end(),
                       [code](const Violation& v) { return v.code == code; });
  }
};

// Structural problems (malformed trajectories) are thrown, not reported:
// rows are rejected, never repaired.
struct structural_error : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

namespace detail {
inline void check_structure(const Trajectory& traj) {
  if (traj.steps.empty()) {
    throw structural_error("trajectory has no steps: " + traj.problem_id);
  }
  for (std::size_t i = 0; i < traj.steps.size(); ++i) {
    if (traj.steps[i].t != static_cast<int>(i) + 1) {
      throw structural_error("steps not contiguous from 1 in trajectory " +
                             traj.problem_id + "/" + traj.controller_id);
    }
  }
  if (traj.horizon > 0 && static_cast<int>(traj.steps.size()) > traj.horizon) {
    throw structural_error("trajectory longer than horizon: " + traj.problem_id);
  }
}
}  // namespace detail

inline ValidationReport validate_trajectory(const Trajectory& traj) {
  detail::check_structure(traj);
  ValidationReport report;
  auto add = [&report](ViolationCode code, int step, std::string detail) {
    report.violations.push_back({code, step, std::move(detail)});
  };

  if (!traj.steps.front().active) {
    add(ViolationCode::ActiveStart, 1, "trajectory does not begin active");
  }

  bool stopped = false;
  bool expected_active = true;  // A_1 = 1
  for (const StepRecord& row : traj.steps) {
    if (row.success && row.false_admission) {
      add(ViolationCode::MutualExclusivity, row.t,
          "success and false_admission both set");
    }
    if (row.false_admission) {
      const bool label_ok = !row.hidden_bad.has_value() || *row.hidden_bad;
      if (!(row.active && row.gate && label_ok)) {
        add(ViolationCode::AdmissionSemantics, row.t,
            "false_admission requires active, gate and a bad label");
      }
    }
    if (row.success) {
      const bool label_ok = !row.hidden_bad.has_value() || !*row.hidden_bad;
      if (!(row.active && row.gate && label_ok)) {
        add(ViolationCode::AdmissionSemantics, row.t,
            "success requires active, gate and a good label");
      }
    }
    if (row.gate && !(row.probe_survived && row.evid_survived)) {
      add(ViolationCode::GateSemantics, row.t,
          "gate passed without probe/evidence survival");
    }
    if (!row.probe_invoked && !row.probe_survived) {
      add(ViolationCode::SurvivalConvention, row.t,
          "probe_survived must be true when probe not invoked");
    }
    if (!row.evid_invoked && !row.evid_survived) {
      add(ViolationCode::SurvivalConvention, row.t,
          "evid_survived must be true when evidence gate not invoked");
    }

    if (stopped && (row.active || row.success || row.false_admission)) {
      add(ViolationCode::StoppedZeroing, row.t,
          "activity or outcome after the stopping step");
    } else if (row.t > 1 && row.active != expected_active) {
      add(ViolationCode::ActiveRecursion, row.t,
          row.active ? "active flag set though the previous step stopped"
                     : "active flag cleared though no stop occurred");
    }
    if (row.active && (row.success || row.false_admission)) stopped = true;
    expected_active = row.active && !row.success && !row.false_admission;
  }
  return report;
}

// Stopping times; absent means the stop never occurred within the log.
struct StoppingTimes {
  std::optional<int> tau_success;
  std::optional<int> tau_false;
};

inline StoppingTimes stopping_times(const Trajectory& traj) {
  StoppingTimes times;
  for (const StepRecord& row : traj.steps) {
    if (!times.tau_success && row.success) times.tau_success = row.t;
    if (!times.tau_false && row.false_admission) times.tau_false = row.t;
  }
  return times;
}

// Horizon-T outcome classes; every validated trajectory lands in exactly one.
enum class TrajectoryOutcome { CleanBeforeFalse, FalseByHorizon, StillActive };

inline TrajectoryOutcome classify_outcome(const Trajectory& traj) {
  const StoppingTimes times = stopping_times(traj);
  const int horizon = traj.effective_horizon();
  if (times.tau_false && *times.tau_false <= horizon) {
    return TrajectoryOutcome::FalseByHorizon;
  }
  if (times.tau_success && *times.tau_success <= horizon) {
    return TrajectoryOutcome::CleanBeforeFalse;
  }
  return TrajectoryOutcome::StillActive;
}

// True when the trajectory carries a logged active row at step t. Only
// logged rows enter calibration denominators.
inline bool active_at(const Trajectory& traj, int t) {
  return t >= 1 && t <= static_cast<int>(traj.steps.size()) &&
         traj.steps[t - 1].active;
}

}  // namespace stopcert
