// Command-line surface for the certification toolkit. Every command is
// deterministic given (inputs, config, seed); machine-readable records are
// the contract, tables are for reading. Runs that write into an output
// directory also drop a run manifest with the resolved parameters.
//
// Exit codes: 0 success, 1 validation/assertion failure, 2 IO error,
// 3 configuration error.

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "stopcert/config_io.hpp"
#include "stopcert/consensus.hpp"
#include "stopcert/dea.hpp"
#include "stopcert/memory_io.hpp"
#include "stopcert/report.hpp"
#include "stopcert/simulator.hpp"
#include "stopcert/trace_io.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitIo = 2;
constexpr int kExitConfig = 3;

using nlohmann::ordered_json;

std::string iso_timestamp() {
  const std::time_t now =
      std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char buffer[32];
  std::tm tm_utc{};
  gmtime_r(&now, &tm_utc);
  std::strftime(buffer, sizeof(buffer), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  return buffer;
}

// Resolved-parameter record emitted alongside outputs; the timestamp is the
// only non-deterministic field.
void write_run_manifest(const std::string& out_dir, const std::string& command,
                        const ordered_json& parameters) {
  if (out_dir.empty()) return;
  std::filesystem::create_directories(out_dir);
  ordered_json manifest;
  manifest["command"] = command;
  manifest["parameters"] = parameters;
  manifest["rng_version"] = stopcert::kRngVersion;
  manifest["trace_schema"] = stopcert::kTraceSchemaVersion;
  manifest["generated_at"] = iso_timestamp();
  std::ofstream out(out_dir + "/run_manifest.json");
  out << manifest.dump(2) << '\n';
}

void write_file(const std::string& out_dir, const std::string& name,
                const std::string& content) {
  if (out_dir.empty()) return;
  std::filesystem::create_directories(out_dir);
  std::ofstream out(out_dir + "/" + name);
  if (!out) throw stopcert::io_error("cannot write " + out_dir + "/" + name);
  out << content;
}

std::vector<double> parse_number_list(const std::string& text) {
  std::vector<double> values;
  std::stringstream stream(text);
  std::string item;
  while (std::getline(stream, item, ',')) {
    if (!item.empty()) values.push_back(std::stod(item));
  }
  return values;
}

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> values;
  for (double v : parse_number_list(text)) values.push_back(static_cast<int>(v));
  return values;
}

// ---------------------------------------------------------------------------
// validate
// ---------------------------------------------------------------------------

int cmd_validate(const std::string& traces_path, int horizon,
                 const std::string& format, const std::string& out_dir) {
  stopcert::IngestOptions options;
  options.horizon = horizon;
  const stopcert::IngestResult result =
      stopcert::ingest_traces(traces_path, options);

  // Kept trajectories can still carry non-fatal violations (gate semantics);
  // report every violation row with its code.
  ordered_json violations = ordered_json::array();
  for (const auto& traj : result.trajectories) {
    const stopcert::ValidationReport report = stopcert::validate_trajectory(traj);
    for (const auto& violation : report.violations) {
      violations.push_back({{"problem_id", traj.problem_id},
                            {"controller_id", traj.controller_id},
                            {"code", stopcert::to_string(violation.code)},
                            {"t", violation.step},
                            {"detail", violation.detail}});
    }
  }

  ordered_json record;
  record["trajectories"] = result.trajectories.size();
  record["violations"] = violations;
  record["rejected"] = ordered_json::array();
  for (const auto& rejected : result.rejected) {
    record["rejected"].push_back({{"problem_id", rejected.problem_id},
                                  {"controller_id", rejected.controller_id},
                                  {"reason", rejected.reason}});
  }
  record["mechanism_disabled_controllers"] = ordered_json::array();
  for (const auto& id : result.mechanism_disabled_controllers) {
    record["mechanism_disabled_controllers"].push_back(id);
  }
  record["parse_errors"] = result.parse_errors;
  record["warnings"] = result.warnings;

  if (format == "records") {
    std::cout << record.dump() << '\n';
  } else {
    std::cout << result.trajectories.size() << " valid trajectories, "
              << result.rejected.size() << " rejected, "
              << result.parse_errors.size() << " parse errors\n";
    for (const auto& v : violations) {
      std::cout << "violation " << v.at("code").get<std::string>() << " at t="
                << v.at("t").get<int>() << " in "
                << v.at("problem_id").get<std::string>() << "/"
                << v.at("controller_id").get<std::string>() << '\n';
    }
    for (const auto& rejected : result.rejected) {
      std::cout << "rejected " << rejected.problem_id << "/"
                << rejected.controller_id << ": " << rejected.reason << '\n';
    }
    for (const auto& id : result.mechanism_disabled_controllers) {
      std::cout << "mechanism disabled: " << id << '\n';
    }
    for (const auto& err : result.parse_errors) std::cout << err << '\n';
    for (const auto& warning : result.warnings) {
      std::cout << "warning: " << warning << '\n';
    }
  }
  write_file(out_dir, "validation.json", record.dump(2) + "\n");
  write_run_manifest(out_dir, "validate",
                     {{"traces", traces_path}, {"horizon", horizon}});

  const bool clean = result.rejected.empty() && result.parse_errors.empty() &&
                     violations.empty();
  return clean ? kExitOk : kExitValidation;
}

// ---------------------------------------------------------------------------
// certify
// ---------------------------------------------------------------------------

int cmd_certify(const std::string& traces_path, const std::string& manifests_path,
                const std::string& budget_path, const std::string& format,
                const std::string& out_dir) {
  const stopcert::ManifestClass manifest_class =
      stopcert::load_manifest_class(manifests_path);
  stopcert::BudgetConfig budget_cfg;
  if (!budget_path.empty()) budget_cfg = stopcert::load_budget(budget_path);

  int horizon = 1;
  int max_grid = 1;
  for (const auto& manifest : manifest_class.controllers) {
    horizon = std::max(horizon, manifest.horizon);
    max_grid = std::max(max_grid,
                        static_cast<int>(manifest.gate_spec.grid.size()));
  }
  const stopcert::BudgetAllocation budget = stopcert::allocate_budget(
      budget_cfg.delta, budget_cfg.split, horizon,
      static_cast<int>(manifest_class.controllers.size()), {max_grid},
      budget_cfg.j_max);

  stopcert::IngestOptions options;
  options.horizon = horizon;
  const stopcert::IngestResult ingest =
      stopcert::ingest_traces(traces_path, options);
  stopcert::CalibrationInput input;
  input.trajectories = ingest.trajectories;
  input.mechanism_disabled_controllers = ingest.mechanism_disabled_controllers;

  const stopcert::SelectionResult selection =
      stopcert::select_controller(manifest_class, input, budget);

  ordered_json records = ordered_json::array();
  for (const auto& report : selection.reports) {
    records.push_back(stopcert::to_json(report));
  }
  ordered_json summary;
  summary["winner"] = selection.winner_id;
  summary["budget"] = stopcert::to_json(budget);
  summary["reports"] = records;

  if (format == "records") {
    std::cout << summary.dump() << '\n';
  } else if (format == "csv") {
    std::cout << "controller,prod_no_false,prod_still_active,c_t_ctrl,c_t_raw,"
                 "selected\n";
    for (const auto& report : selection.reports) {
      char line[256];
      std::snprintf(line, sizeof(line), "%s,%.9f,%.9f,%.9f,%.9f,%s\n",
                    report.controller_id.c_str(), report.prod_no_false,
                    report.prod_still_active, report.c_t_ctrl, report.c_t_raw,
                    report.selected ? "yes" : "no");
      std::cout << line;
    }
  } else {
    std::cout << stopcert::render_certificate_table(selection);
    std::cout << "winner: " << selection.winner_id << '\n';
    for (const auto& report : selection.reports) {
      if (report.no_data) {
        std::cout << "warning: no calibration rows for "
                  << report.controller_id << " (conservative bounds)\n";
      }
    }
  }
  write_file(out_dir, "certificates.json", summary.dump(2) + "\n");
  write_run_manifest(out_dir, "certify",
                     {{"traces", traces_path},
                      {"manifests", manifests_path},
                      {"budget", budget_path},
                      {"horizon", horizon}});
  return kExitOk;
}

// Cumulative judge-acceptance curves for two controller variants with their
// per-step deltas (snapshot-on versus snapshot-off comparison).
int cmd_curves(const std::string& traces_path, const std::string& on_id,
               const std::string& off_id, int t_max, const std::string& format,
               const std::string& out_dir) {
  const stopcert::IngestResult ingest = stopcert::ingest_traces(traces_path);
  std::vector<stopcert::Trajectory> on_rows, off_rows;
  for (const auto& traj : ingest.trajectories) {
    if (traj.controller_id == on_id) on_rows.push_back(traj);
    if (traj.controller_id == off_id) off_rows.push_back(traj);
  }
  if (on_rows.empty() || off_rows.empty()) {
    throw stopcert::config_error("curves: no rows for one of the controllers");
  }
  const auto with_memory = stopcert::cumulative_acceptance(on_rows, t_max);
  const auto without_memory = stopcert::cumulative_acceptance(off_rows, t_max);

  ordered_json record;
  record["controller_on"] = on_id;
  record["controller_off"] = off_id;
  record["with"] = with_memory;
  record["without"] = without_memory;
  ordered_json deltas = ordered_json::array();
  for (int t = 0; t < t_max; ++t) {
    deltas.push_back(with_memory[static_cast<std::size_t>(t)] -
                     without_memory[static_cast<std::size_t>(t)]);
  }
  record["delta"] = deltas;

  if (format == "records") {
    std::cout << record.dump() << '\n';
  } else {
    std::cout << stopcert::render_acceptance_table(with_memory, without_memory);
  }
  write_file(out_dir, "curves.json", record.dump(2) + "\n");
  write_run_manifest(out_dir, "curves",
                     {{"traces", traces_path},
                      {"on", on_id},
                      {"off", off_id},
                      {"t_max", t_max}});
  return kExitOk;
}

// ---------------------------------------------------------------------------
// simulate / coverage
// ---------------------------------------------------------------------------

int cmd_simulate(const std::string& process_path, int n_problems,
                 std::uint64_t seed, const std::string& controller_id,
                 const std::string& out_path, const std::string& out_dir) {
  // accepts a single process object or a {"processes": [...]} file, picking
  // the entry matching the requested controller
  const auto processes = stopcert::load_processes(process_path);
  const auto it = std::find_if(processes.begin(), processes.end(),
                               [&controller_id](const auto& entry) {
                                 return entry.first == controller_id;
                               });
  if (it == processes.end() && processes.size() > 1) {
    throw stopcert::config_error("no process entry for controller " +
                                 controller_id);
  }
  const stopcert::GroundTruthProcess process =
      it != processes.end() ? it->second : processes.front().second;
  const auto dataset =
      stopcert::simulate_dataset(process, n_problems, seed, controller_id);
  if (out_path.empty() || out_path == "-") {
    stopcert::write_traces_stream(std::cout, dataset);
  } else {
    stopcert::write_traces(out_path, dataset);
  }
  write_run_manifest(out_dir, "simulate",
                     {{"process", process_path},
                      {"n", n_problems},
                      {"seed", seed},
                      {"controller_id", controller_id},
                      {"out", out_path}});
  return kExitOk;
}

int cmd_coverage(const std::string& processes_path,
                 const std::string& manifests_path,
                 const std::string& budget_path, int n_cal, int replications,
                 std::uint64_t seed, const std::string& format,
                 const std::string& out_dir) {
  const auto processes = stopcert::load_processes(processes_path);
  const stopcert::ManifestClass manifest_class =
      stopcert::load_manifest_class(manifests_path);
  stopcert::BudgetConfig budget_cfg;
  if (!budget_path.empty()) budget_cfg = stopcert::load_budget(budget_path);

  std::vector<stopcert::ControllerTruth> truths;
  for (const auto& manifest : manifest_class.controllers) {
    const auto it = std::find_if(processes.begin(), processes.end(),
                                 [&manifest](const auto& entry) {
                                   return entry.first == manifest.id;
                                 });
    if (it == processes.end()) {
      throw stopcert::config_error("no process for controller " + manifest.id);
    }
    truths.push_back({manifest, it->second});
  }
  int horizon = 1;
  for (const auto& truth : truths) horizon = std::max(horizon, truth.manifest.horizon);
  const stopcert::BudgetAllocation budget = stopcert::allocate_budget(
      budget_cfg.delta, budget_cfg.split, horizon,
      static_cast<int>(truths.size()), {1}, budget_cfg.j_max);

  const stopcert::CoverageSummary summary =
      stopcert::coverage_experiment(truths, n_cal, replications, budget, seed);

  if (format == "records") {
    std::cout << stopcert::to_json(summary).dump() << '\n';
  } else {
    std::cout << stopcert::render_coverage_table(summary);
  }
  write_file(out_dir, "coverage.json", stopcert::to_json(summary).dump(2) + "\n");
  write_run_manifest(out_dir, "coverage",
                     {{"processes", processes_path},
                      {"manifests", manifests_path},
                      {"budget", budget_path},
                      {"n_cal", n_cal},
                      {"replications", replications},
                      {"seed", seed}});

  bool all_pass = summary.certificate.pass && summary.decomposition_failures == 0;
  for (const auto& channel : summary.channels) all_pass = all_pass && channel.pass;
  return all_pass ? kExitOk : kExitValidation;
}

// ---------------------------------------------------------------------------
// ta
// ---------------------------------------------------------------------------

int cmd_ta_confusion(std::int64_t tp, std::int64_t fn, std::int64_t fp,
                     std::int64_t tn, const std::string& format,
                     const std::string& out_dir) {
  const stopcert::ConfusionMetrics metrics =
      stopcert::confusion_metrics(tp, fn, fp, tn);
  const std::string csv = stopcert::render_confusion_csv(metrics);
  if (format == "records") {
    ordered_json j;
    j["tp"] = tp; j["fn"] = fn; j["fp"] = fp; j["tn"] = tn;
    auto put = [&j](const char* name, const std::optional<double>& v) {
      if (v) j[name] = *v; else j[name] = nullptr;
    };
    put("accuracy", metrics.accuracy);
    put("precision", metrics.precision);
    put("recall", metrics.recall);
    put("f1", metrics.f1);
    put("specificity", metrics.specificity);
    put("false_positive_rate", metrics.false_positive_rate);
    put("false_negative_rate", metrics.false_negative_rate);
    put("post_survival_bug_rate", metrics.post_survival_bug_rate);
    std::cout << j.dump() << '\n';
  } else {
    std::cout << csv;
  }
  write_file(out_dir, "confusion.csv", csv);
  write_run_manifest(out_dir, "ta confusion",
                     {{"tp", tp}, {"fn", fn}, {"fp", fp}, {"tn", tn}});
  return kExitOk;
}

int cmd_ta_detection(const std::string& flags_path, const std::string& ks_text,
                     int draws, std::uint64_t seed, const std::string& out_dir) {
  std::ifstream in(flags_path);
  if (!in) throw stopcert::io_error("cannot open detect-flags file: " + flags_path);
  std::vector<std::vector<bool>> flags;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const nlohmann::json j = nlohmann::json::parse(line);
    flags.push_back(j.at("detects").get<std::vector<bool>>());
  }
  const std::vector<int> ks = parse_int_list(ks_text);
  const auto curve = stopcert::detection_curve(flags, ks, draws, seed);
  const std::string csv = stopcert::render_detection_csv(curve);
  std::cout << csv;
  write_file(out_dir, "detection.csv", csv);
  write_run_manifest(out_dir, "ta detection",
                     {{"flags", flags_path},
                      {"ks", ks_text},
                      {"draws", draws},
                      {"seed", seed}});
  return kExitOk;
}

int cmd_ta_rates(const std::string& outcomes_path, const std::string& out_dir) {
  std::ifstream in(outcomes_path);
  if (!in) throw stopcert::io_error("cannot open outcomes file: " + outcomes_path);
  std::vector<stopcert::ProblemOutcome> outcomes;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const nlohmann::json j = nlohmann::json::parse(line);
    stopcert::ProblemOutcome outcome;
    outcome.problem_id = j.at("problem_id").get<std::string>();
    outcome.suite_nonempty = j.at("suite_nonempty").get<bool>();
    outcome.rescued = j.at("rescued").get<bool>();
    outcomes.push_back(outcome);
  }
  const stopcert::AugmentationRates rates = stopcert::gen_and_rescue_rates(outcomes);
  std::ostringstream csv;
  csv << "metric,value\ngen_rate," << rates.gen_rate << "\nrescue_rate,"
      << rates.rescue_rate << '\n';
  std::cout << csv.str();
  write_file(out_dir, "rates.csv", csv.str());
  write_run_manifest(out_dir, "ta rates", {{"outcomes", outcomes_path}});
  return kExitOk;
}

int cmd_ta_label(const std::string& votes_path, std::int64_t threshold,
                 std::int64_t cap, const std::string& out_dir) {
  std::ifstream in(votes_path);
  if (!in) throw stopcert::io_error("cannot open votes file: " + votes_path);
  std::map<std::string, std::vector<stopcert::VoteSet>> by_problem;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const nlohmann::json j = nlohmann::json::parse(line);
    stopcert::VoteSet votes;
    votes.input_id = j.at("input_id").get<std::string>();
    votes.outputs = j.at("outputs").get<std::vector<std::string>>();
    by_problem[j.value("problem_id", std::string("default"))].push_back(votes);
  }
  ordered_json out = ordered_json::array();
  for (const auto& [problem_id, votes] : by_problem) {
    const stopcert::AugmentedSuite suite =
        stopcert::build_suite(problem_id, votes, cap, threshold);
    ordered_json entry;
    entry["problem_id"] = problem_id;
    entry["cases"] = ordered_json::array();
    for (const auto& test : suite.cases) {
      entry["cases"].push_back({{"input_id", test.input_id},
                                {"consensus_output", test.consensus_output}});
    }
    entry["suite_nonempty"] = !suite.empty();
    out.push_back(entry);
  }
  std::cout << out.dump(2) << '\n';
  write_file(out_dir, "suites.json", out.dump(2) + "\n");
  write_run_manifest(out_dir, "ta label",
                     {{"votes", votes_path},
                      {"threshold", threshold},
                      {"cap", cap}});
  return kExitOk;
}

// ---------------------------------------------------------------------------
// dea
// ---------------------------------------------------------------------------

std::vector<stopcert::Dmu> load_dmu_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw stopcert::io_error("cannot open DMU table: " + path);
  std::vector<stopcert::Dmu> dmus;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (first) {  // header row: name,cost,accuracy
      first = false;
      continue;
    }
    std::stringstream stream(line);
    stopcert::Dmu dmu;
    std::string cost, accuracy;
    if (!std::getline(stream, dmu.name, ',') || !std::getline(stream, cost, ',') ||
        !std::getline(stream, accuracy, ',')) {
      throw stopcert::parse_error("malformed DMU row: " + line);
    }
    dmu.cost = std::stod(cost);
    dmu.accuracy = std::stod(accuracy);
    dmus.push_back(dmu);
  }
  return dmus;
}

int cmd_dea(const std::string& dmus_path, const std::string& out_dir) {
  const std::vector<stopcert::Dmu> dmus = load_dmu_csv(dmus_path);
  if (dmus.empty()) throw stopcert::config_error("DMU table is empty");
  std::vector<stopcert::BccResult> results;
  for (std::size_t i = 0; i < dmus.size(); ++i) {
    results.push_back(stopcert::bcc_efficiency(dmus, i));
  }
  const std::string csv = stopcert::render_dea_csv(dmus, results);
  std::cout << csv;
  write_file(out_dir, "dea.csv", csv);
  write_run_manifest(out_dir, "dea", {{"dmus", dmus_path}});
  return kExitOk;
}

// ---------------------------------------------------------------------------
// memory
// ---------------------------------------------------------------------------

int cmd_memory_build(const std::string& artifacts_path, const std::string& bank_path,
                     bool strict_routing, const std::string& out_dir) {
  const auto problems = stopcert::load_artifacts(artifacts_path);
  stopcert::MemoryBank bank;
  const stopcert::Taxonomy& taxonomy = stopcert::Taxonomy::builtin();
  std::int64_t inserted = 0, duplicates = 0, capacity = 0, skipped = 0;
  for (const auto& problem : problems) {
    auto exp = stopcert::extract_triplet(problem.problem_id, problem.steps);
    if (!exp) {
      ++skipped;
      continue;
    }
    exp->route = stopcert::route_tag(taxonomy, problem.tag, strict_routing);
    switch (stopcert::insert(bank, *exp)) {
      case stopcert::InsertOutcome::Inserted: ++inserted; break;
      case stopcert::InsertOutcome::RejectedDuplicate: ++duplicates; break;
      case stopcert::InsertOutcome::RejectedCapacity: ++capacity; break;
    }
  }
  stopcert::save_bank(bank_path, bank);
  std::cout << "inserted " << inserted << ", duplicates " << duplicates
            << ", capacity-rejected " << capacity << ", no-triplet " << skipped
            << '\n';
  write_run_manifest(out_dir, "memory build",
                     {{"artifacts", artifacts_path}, {"bank", bank_path}});
  return kExitOk;
}

int cmd_memory_freeze(const std::string& bank_path, const std::string& snapshot_path,
                      const std::string& out_dir) {
  const stopcert::MemoryBank bank = stopcert::load_bank(bank_path);
  const stopcert::MemoryBank snapshot = stopcert::freeze(bank);
  stopcert::save_bank(snapshot_path.empty() ? bank_path : snapshot_path, snapshot);
  std::cout << "content_hash " << snapshot.content_hash << '\n';
  write_run_manifest(out_dir, "memory freeze",
                     {{"bank", bank_path}, {"snapshot", snapshot_path}});
  return kExitOk;
}

int cmd_memory_inspect(const std::string& bank_path) {
  const stopcert::MemoryBank bank = stopcert::load_bank(bank_path);
  ordered_json j;
  j["frozen"] = bank.frozen;
  j["hash_algorithm"] = bank.hash_algorithm;
  j["content_hash"] = bank.frozen ? bank.content_hash : stopcert::content_hash(bank);
  j["general_items"] = bank.general.size();
  j["buckets"] = ordered_json::array();
  for (const auto& [pair, bucket] : bank.alg_buckets) {
    j["buckets"].push_back({{"primary", pair.primary},
                            {"secondary", pair.secondary},
                            {"items", bucket.size()}});
  }
  j["total_items"] = bank.total_items();
  std::cout << j.dump(2) << '\n';
  return kExitOk;
}

// Replays audit-only writes against a frozen snapshot and verifies the hash
// never moves.
int cmd_memory_audit_replay(const std::string& snapshot_path,
                            const std::string& artifacts_path,
                            const std::string& audit_out) {
  stopcert::MemoryBank snapshot = stopcert::load_bank(snapshot_path);
  if (!snapshot.frozen) {
    throw stopcert::config_error("audit-replay needs a frozen snapshot");
  }
  const std::string hash_before = snapshot.content_hash;
  stopcert::AuditLog log;
  for (const auto& problem : stopcert::load_artifacts(artifacts_path)) {
    auto exp = stopcert::extract_triplet(problem.problem_id, problem.steps);
    if (!exp) continue;
    stopcert::record(stopcert::RecordMode::AuditOnly, snapshot, log, *exp);
  }
  const std::string hash_after = stopcert::content_hash(snapshot);
  if (!audit_out.empty()) stopcert::save_audit_log(audit_out, log);
  std::cout << "audit entries " << log.entries.size() << ", hash before "
            << hash_before << ", after " << hash_after << '\n';
  return hash_before == hash_after ? kExitOk : kExitValidation;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"trace-calibrated stopped-process certification toolkit"};
  app.require_subcommand(1);

  std::string traces, manifests, budget, process, out_dir, format = "table";
  std::string out_path, controller_id = "sim";
  int horizon = 0;
  std::uint64_t seed = 1;

  auto* validate = app.add_subcommand("validate", "check trace invariants");
  validate->add_option("--traces", traces)->required();
  validate->add_option("--horizon", horizon);
  validate->add_option("--format", format);
  validate->add_option("--out", out_dir);

  auto* certify = app.add_subcommand("certify", "certificates and selection");
  certify->add_option("--traces", traces)->required();
  certify->add_option("--manifests", manifests)->required();
  certify->add_option("--budget", budget);
  certify->add_option("--format", format);
  certify->add_option("--out", out_dir);

  auto* curves = app.add_subcommand("curves",
                                    "cumulative acceptance with deltas");
  std::string on_id, off_id;
  int t_max = 3;
  curves->add_option("--traces", traces)->required();
  curves->add_option("--on", on_id)->required();
  curves->add_option("--off", off_id)->required();
  curves->add_option("--t-max", t_max);
  curves->add_option("--format", format);
  curves->add_option("--out", out_dir);

  auto* simulate = app.add_subcommand("simulate", "generate a synthetic dataset");
  int n_problems = 100;
  simulate->add_option("--process", process)->required();
  simulate->add_option("--n", n_problems);
  simulate->add_option("--seed", seed);
  simulate->add_option("--controller", controller_id);
  simulate->add_option("--out-file", out_path);
  simulate->add_option("--out", out_dir);

  auto* coverage = app.add_subcommand("coverage", "Monte Carlo coverage check");
  int n_cal = 166, replications = 2000;
  coverage->add_option("--process", process)->required();
  coverage->add_option("--manifests", manifests)->required();
  coverage->add_option("--budget", budget);
  coverage->add_option("--n", n_cal);
  coverage->add_option("--replications", replications);
  coverage->add_option("--seed", seed);
  coverage->add_option("--format", format);
  coverage->add_option("--out", out_dir);

  auto* ta = app.add_subcommand("ta", "test-augmentation diagnostics");
  ta->require_subcommand(1);
  auto* confusion = ta->add_subcommand("confusion", "confusion metrics");
  std::int64_t tp = 0, fn = 0, fp = 0, tn = 0;
  confusion->add_option("--tp", tp)->required();
  confusion->add_option("--fn", fn)->required();
  confusion->add_option("--fp", fp)->required();
  confusion->add_option("--tn", tn)->required();
  confusion->add_option("--format", format);
  confusion->add_option("--out", out_dir);

  auto* detection = ta->add_subcommand("detection", "sampled bug-detection curve");
  std::string flags_path, ks_text = "1,2,3,5,9,15";
  int draws = 100;
  detection->add_option("--flags", flags_path)->required();
  detection->add_option("--ks", ks_text);
  detection->add_option("--draws", draws);
  detection->add_option("--seed", seed);
  detection->add_option("--out", out_dir);

  auto* rates = ta->add_subcommand("rates", "generation and rescue rates");
  std::string outcomes_path;
  rates->add_option("--outcomes", outcomes_path)->required();
  rates->add_option("--out", out_dir);

  auto* label = ta->add_subcommand("label", "consensus labels and suites");
  std::string votes_path;
  std::int64_t threshold = 9, cap = 32;
  label->add_option("--votes", votes_path)->required();
  label->add_option("--threshold", threshold);
  label->add_option("--cap", cap);
  label->add_option("--out", out_dir);

  auto* dea = app.add_subcommand("dea", "BCC efficiency scores");
  std::string dmus_path;
  dea->add_option("--dmus", dmus_path)->required();
  dea->add_option("--out", out_dir);

  auto* memory = app.add_subcommand("memory", "experience-bank protocol");
  memory->require_subcommand(1);
  std::string artifacts_path, bank_path, snapshot_path, audit_out;
  bool strict_routing = false;
  auto* build = memory->add_subcommand("build", "deploy-mode bank build");
  build->add_option("--artifacts", artifacts_path)->required();
  build->add_option("--bank", bank_path)->required();
  build->add_flag("--strict-routing", strict_routing);
  build->add_option("--out", out_dir);
  auto* freeze_cmd = memory->add_subcommand("freeze", "freeze a bank into a snapshot");
  freeze_cmd->add_option("--bank", bank_path)->required();
  freeze_cmd->add_option("--snapshot", snapshot_path);
  freeze_cmd->add_option("--out", out_dir);
  auto* inspect = memory->add_subcommand("inspect", "hash and counts");
  inspect->add_option("--bank", bank_path)->required();
  auto* replay = memory->add_subcommand("audit-replay",
                                        "verify hash stability under audit writes");
  replay->add_option("--snapshot", snapshot_path)->required();
  replay->add_option("--artifacts", artifacts_path)->required();
  replay->add_option("--audit-log", audit_out);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*validate) return cmd_validate(traces, horizon, format, out_dir);
    if (*certify) return cmd_certify(traces, manifests, budget, format, out_dir);
    if (*curves) return cmd_curves(traces, on_id, off_id, t_max, format, out_dir);
    if (*simulate) {
      return cmd_simulate(process, n_problems, seed, controller_id, out_path,
                          out_dir);
    }
    if (*coverage) {
      return cmd_coverage(process, manifests, budget, n_cal, replications, seed,
                          format, out_dir);
    }
    if (*confusion) return cmd_ta_confusion(tp, fn, fp, tn, format, out_dir);
    if (*detection) return cmd_ta_detection(flags_path, ks_text, draws, seed, out_dir);
    if (*rates) return cmd_ta_rates(outcomes_path, out_dir);
    if (*label) return cmd_ta_label(votes_path, threshold, cap, out_dir);
    if (*dea) return cmd_dea(dmus_path, out_dir);
    if (*build) return cmd_memory_build(artifacts_path, bank_path, strict_routing, out_dir);
    if (*freeze_cmd) return cmd_memory_freeze(bank_path, snapshot_path, out_dir);
    if (*inspect) return cmd_memory_inspect(bank_path);
    if (*replay) return cmd_memory_audit_replay(snapshot_path, artifacts_path, audit_out);
  } catch (const stopcert::frozen_write_error& err) {
    std::cerr << "frozen-write error: " << err.what() << '\n';
    return kExitValidation;
  } catch (const stopcert::io_error& err) {
    std::cerr << "io error: " << err.what() << '\n';
    return kExitIo;
  } catch (const stopcert::parse_error& err) {
    std::cerr << "parse error: " << err.what() << '\n';
    return kExitConfig;
  } catch (const stopcert::config_error& err) {
    std::cerr << "config error: " << err.what() << '\n';
    return kExitConfig;
  } catch (const nlohmann::json::exception& err) {
    std::cerr << "config error: " << err.what() << '\n';
    return kExitConfig;
  } catch (const std::invalid_argument& err) {
    std::cerr << "config error: " << err.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kExitValidation;
  }
  return kExitOk;
}
