#include <doctest.h>

#include <sstream>

#include "stopcert/simulator.hpp"
#include "stopcert/trace.hpp"
#include "stopcert/trace_io.hpp"

using namespace stopcert;

namespace {

StepRecord make_row(const std::string& problem, int t, bool active) {
  StepRecord row;
  row.problem_id = problem;
  row.controller_id = "ctrl";
  row.t = t;
  row.active = active;
  return row;
}

// Canonical clean stop at t=1 with a trailing inactive row.
Trajectory clean_stop_trajectory() {
  Trajectory traj;
  traj.problem_id = "p1";
  traj.controller_id = "ctrl";
  traj.horizon = 5;
  StepRecord first = make_row("p1", 1, true);
  first.gate = true;
  first.hidden_bad = false;
  first.success = true;
  StepRecord second = make_row("p1", 2, false);
  traj.steps = {first, second};
  return traj;
}

}  // namespace

TEST_CASE("canonical clean stop validates") {
  CHECK(validate_trajectory(clean_stop_trajectory()).ok());
}

TEST_CASE("success and false admission are mutually exclusive") {
  Trajectory traj = clean_stop_trajectory();
  traj.steps[0].false_admission = true;
  const auto report = validate_trajectory(traj);
  CHECK(report.has(ViolationCode::MutualExclusivity));
}

TEST_CASE("gate without probe survival carries the distinct code") {
  Trajectory traj = clean_stop_trajectory();
  traj.steps.pop_back();
  traj.steps[0].success = false;
  traj.steps[0].gate = false;
  StepRecord second = make_row("p1", 2, true);
  second.gate = true;
  second.probe_invoked = true;
  second.probe_survived = false;
  second.hidden_bad = true;
  second.false_admission = true;
  traj.steps.push_back(second);
  const auto report = validate_trajectory(traj);
  CHECK(report.has(ViolationCode::GateSemantics));
}

TEST_CASE("uninvoked channels must record survival") {
  Trajectory traj = clean_stop_trajectory();
  traj.steps[0].probe_invoked = false;
  traj.steps[0].probe_survived = false;
  const auto report = validate_trajectory(traj);
  CHECK(report.has(ViolationCode::SurvivalConvention));
  CHECK(report.has(ViolationCode::GateSemantics));
}

TEST_CASE("structural problems reject the row outright") {
  Trajectory traj = clean_stop_trajectory();
  traj.steps[1].t = 3;  // gap
  CHECK_THROWS_AS(validate_trajectory(traj), structural_error);

  Trajectory empty;
  empty.problem_id = "p2";
  CHECK_THROWS_AS(validate_trajectory(empty), structural_error);

  Trajectory too_long = clean_stop_trajectory();
  too_long.horizon = 1;
  CHECK_THROWS_AS(validate_trajectory(too_long), structural_error);
}

TEST_CASE("stopping times") {
  SUBCASE("clean stop within horizon") {
    Trajectory traj;
    traj.problem_id = "p1";
    traj.controller_id = "ctrl";
    traj.horizon = 5;
    for (int t = 1; t <= 3; ++t) {
      StepRecord row = make_row("p1", t, true);
      if (t == 3) {
        row.gate = true;
        row.hidden_bad = false;
        row.success = true;
      }
      traj.steps.push_back(row);
    }
    const auto times = stopping_times(traj);
    CHECK(times.tau_success == 3);
    CHECK_FALSE(times.tau_false.has_value());
    CHECK(classify_outcome(traj) == TrajectoryOutcome::CleanBeforeFalse);
  }
  SUBCASE("no stop by the horizon stays active") {
    Trajectory traj;
    traj.problem_id = "p1";
    traj.controller_id = "ctrl";
    traj.horizon = 3;
    for (int t = 1; t <= 3; ++t) traj.steps.push_back(make_row("p1", t, true));
    const auto times = stopping_times(traj);
    CHECK_FALSE(times.tau_success.has_value());
    CHECK_FALSE(times.tau_false.has_value());
    CHECK(classify_outcome(traj) == TrajectoryOutcome::StillActive);
  }
  SUBCASE("false admission") {
    Trajectory traj;
    traj.problem_id = "p1";
    traj.controller_id = "ctrl";
    traj.horizon = 5;
    traj.steps.push_back(make_row("p1", 1, true));
    StepRecord second = make_row("p1", 2, true);
    second.gate = true;
    second.hidden_bad = true;
    second.false_admission = true;
    traj.steps.push_back(second);
    const auto times = stopping_times(traj);
    CHECK_FALSE(times.tau_success.has_value());
    CHECK(times.tau_false == 2);
    CHECK(classify_outcome(traj) == TrajectoryOutcome::FalseByHorizon);
  }
}

TEST_CASE("ingest groups, validates and reports") {
  SUBCASE("two valid trajectories") {
    std::stringstream file;
    write_traces_stream(file, {clean_stop_trajectory()});
    Trajectory other = clean_stop_trajectory();
    other.problem_id = "p2";
    for (auto& row : other.steps) row.problem_id = "p2";
    write_traces_stream(file, {other});
    const auto result = ingest_traces_stream(file);
    CHECK(result.trajectories.size() == 2);
    CHECK(result.rejected.empty());
    CHECK(result.parse_errors.empty());
  }
  SUBCASE("duplicate step key rejects the trajectory") {
    std::stringstream file;
    Trajectory traj = clean_stop_trajectory();
    traj.steps.push_back(traj.steps[1]);  // duplicate t=2
    write_traces_stream(file, {traj});
    const auto result = ingest_traces_stream(file);
    CHECK(result.trajectories.empty());
    REQUIRE(result.rejected.size() == 1);
    CHECK(result.rejected[0].problem_id == "p1");
  }
  SUBCASE("empty file warns") {
    std::stringstream file;
    const auto result = ingest_traces_stream(file);
    CHECK(result.trajectories.empty());
    CHECK_FALSE(result.warnings.empty());
  }
  SUBCASE("malformed line carries its line number") {
    std::stringstream file;
    file << "{not json}\n";
    const auto result = ingest_traces_stream(file);
    REQUIRE(result.parse_errors.size() == 1);
    CHECK(result.parse_errors[0].find("line 1") != std::string::npos);
  }
  SUBCASE("unknown schema version is rejected") {
    std::stringstream file;
    IngestOptions options;
    options.schema_version = "stopcert.trace.v999";
    CHECK_THROWS_AS(ingest_traces_stream(file, options), parse_error);
  }
  SUBCASE("gate-semantics violation keeps the trajectory, flags controller") {
    Trajectory traj = clean_stop_trajectory();
    traj.steps[0].probe_invoked = true;
    traj.steps[0].probe_survived = false;  // gate=1 without survival
    std::stringstream file;
    write_traces_stream(file, {traj});
    const auto result = ingest_traces_stream(file);
    CHECK(result.trajectories.size() == 1);
    CHECK(result.mechanism_disabled_controllers.count("ctrl") == 1);
  }
}

TEST_CASE("serialize then ingest round-trips the trajectory set") {
  GroundTruthProcess process;
  process.horizon = 4;
  process.bad_prior = {0.3};
  process.probe_surv_bad = {0.6};
  process.probe_surv_good = {0.9};
  process.evid_surv_bad = {0.5};
  process.evid_surv_good = {0.95};
  const auto dataset = simulate_dataset(process, 50, 99, "ctrl");

  std::stringstream file;
  write_traces_stream(file, dataset);
  IngestOptions options;
  options.horizon = process.horizon;
  const auto result = ingest_traces_stream(file, options);
  REQUIRE(result.trajectories.size() == dataset.size());
  REQUIRE(result.rejected.empty());

  std::stringstream again;
  write_traces_stream(again, result.trajectories);
  CHECK(file.str() == again.str());
}

TEST_CASE("outcome classes partition every validated trajectory") {
  GroundTruthProcess process;
  process.horizon = 3;
  process.bad_prior = {0.4};
  process.probe_surv_bad = {0.7};
  process.probe_surv_good = {0.8};
  process.evid_surv_bad = {0.6};
  process.evid_surv_good = {0.9};
  const auto dataset = simulate_dataset(process, 300, 7, "ctrl");
  int clean = 0, false_stop = 0, active = 0;
  for (const auto& traj : dataset) {
    CHECK(validate_trajectory(traj).ok());
    switch (classify_outcome(traj)) {
      case TrajectoryOutcome::CleanBeforeFalse: ++clean; break;
      case TrajectoryOutcome::FalseByHorizon: ++false_stop; break;
      case TrajectoryOutcome::StillActive: ++active; break;
    }
  }
  CHECK(clean + false_stop + active == 300);
}
