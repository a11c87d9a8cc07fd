#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "stopcert/config_io.hpp"
#include "stopcert/memory_io.hpp"
#include "stopcert/simulator.hpp"
#include "stopcert/trace_io.hpp"

namespace fs = std::filesystem;

namespace {

const std::string kCli = STOPCERT_CLI_PATH;
const std::string kDataDir = STOPCERT_DATA_DIR;

struct RunResult {
  int exit_code = -1;
  std::string output;
};

RunResult run(const std::string& args) {
  const fs::path out_file =
      fs::temp_directory_path() / ("stopcert_cli_out_" +
                                   std::to_string(::getpid()) + ".txt");
  const std::string command =
      kCli + " " + args + " > " + out_file.string() + " 2>&1";
  const int status = std::system(command.c_str());
  RunResult result;
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream in(out_file);
  std::stringstream buffer;
  buffer << in.rdbuf();
  result.output = buffer.str();
  fs::remove(out_file);
  return result;
}

fs::path scratch_dir() {
  const fs::path dir = fs::temp_directory_path() /
                       ("stopcert_cli_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  return dir;
}

void write_text(const fs::path& path, const std::string& content) {
  std::ofstream out(path);
  out << content;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

fs::path write_clean_traces(const fs::path& dir) {
  stopcert::GroundTruthProcess process;
  process.horizon = 3;
  process.bad_prior = {0.2};
  process.probe_surv_bad = {0.5};
  process.probe_surv_good = {0.9};
  process.evid_surv_bad = {0.5};
  process.evid_surv_good = {0.7};
  const auto dataset = stopcert::simulate_dataset(process, 80, 11, "ctrl-a");
  const fs::path path = dir / "traces.jsonl";
  stopcert::write_traces(path.string(), dataset);
  return path;
}

}  // namespace

TEST_CASE("validate: clean file exits zero") {
  const fs::path dir = scratch_dir();
  const fs::path traces = write_clean_traces(dir);
  const RunResult result =
      run("validate --traces " + traces.string() + " --horizon 3");
  CHECK(result.exit_code == 0);
}

TEST_CASE("validate: gate-semantics violation exits one with the code") {
  const fs::path dir = scratch_dir();
  const fs::path traces = dir / "bad.jsonl";
  write_text(traces,
             R"({"problem_id":"p1","controller_id":"c","t":1,"active":true,)"
             R"("gate":true,"probe_invoked":true,"probe_survived":false,)"
             R"("evid_invoked":false,"evid_survived":true,"hidden_bad":true,)"
             R"("success":false,"false_admission":true,"write_mode":"audit-only"})"
             "\n");
  const RunResult result = run("validate --traces " + traces.string());
  CHECK(result.exit_code == 1);
  CHECK(result.output.find("GATE_SEMANTICS") != std::string::npos);
}

TEST_CASE("validate: missing file exits two") {
  const RunResult result = run("validate --traces /nonexistent/file.jsonl");
  CHECK(result.exit_code == 2);
}

TEST_CASE("certify: single controller emits one selected row") {
  const fs::path dir = scratch_dir();
  const fs::path traces = write_clean_traces(dir);
  const fs::path manifests = dir / "manifests.json";
  write_text(manifests, R"({"declared_before":"cal-split",
    "controllers":[{"id":"ctrl-a","horizon":3}]})");
  const RunResult result = run("certify --traces " + traces.string() +
                               " --manifests " + manifests.string() +
                               " --format records");
  CHECK(result.exit_code == 0);
  const auto summary = nlohmann::json::parse(result.output);
  CHECK(summary.at("winner") == "ctrl-a");
  CHECK(summary.at("reports").size() == 1);
  CHECK(summary.at("reports")[0].at("selected") == true);
}

TEST_CASE("certify: empty trace set warns but stays conservative") {
  const fs::path dir = scratch_dir();
  const fs::path traces = dir / "empty.jsonl";
  write_text(traces, "");
  const fs::path manifests = dir / "manifests.json";
  write_text(manifests, R"({"controllers":[{"id":"ctrl-a","horizon":3}]})");
  const RunResult result = run("certify --traces " + traces.string() +
                               " --manifests " + manifests.string() +
                               " --format records");
  CHECK(result.exit_code == 0);
  const auto summary = nlohmann::json::parse(result.output);
  CHECK(summary.at("reports")[0].at("no_data") == true);
  CHECK(summary.at("reports")[0].at("c_t_ctrl") == 0.0);
}

TEST_CASE("certify: budget over delta is a config error") {
  const fs::path dir = scratch_dir();
  const fs::path traces = write_clean_traces(dir);
  const fs::path manifests = dir / "manifests.json";
  write_text(manifests, R"({"controllers":[{"id":"ctrl-a","horizon":3}]})");
  const fs::path budget = dir / "budget.json";
  write_text(budget, R"({"delta":0.10,"delta_raw":0.05,"delta_gate":0.03,
    "delta_probe":0.02,"delta_evid":0.01})");
  const RunResult result = run("certify --traces " + traces.string() +
                               " --manifests " + manifests.string() +
                               " --budget " + budget.string());
  CHECK(result.exit_code == 3);
}

TEST_CASE("simulate then validate round-trips cleanly") {
  const fs::path dir = scratch_dir();
  const fs::path process = dir / "process.json";
  write_text(process, R"({"horizon":3,"bad_prior":0.2,"probe_surv_bad":0.5,
    "probe_surv_good":0.9,"evid_surv_bad":0.5,"evid_surv_good":0.7})");
  const fs::path out = dir / "sim.jsonl";
  const RunResult sim = run("simulate --process " + process.string() +
                            " --n 60 --seed 5 --out-file " + out.string());
  CHECK(sim.exit_code == 0);
  const RunResult check = run("validate --traces " + out.string() +
                              " --horizon 3");
  CHECK(check.exit_code == 0);
}

TEST_CASE("simulate: identical seeds give identical files") {
  const fs::path dir = scratch_dir();
  const fs::path process = dir / "process.json";
  write_text(process, R"({"horizon":2,"bad_prior":0.3,"probe_surv_bad":0.6,
    "probe_surv_good":0.9,"evid_surv_bad":0.4,"evid_surv_good":0.8})");
  const fs::path out_a = dir / "a.jsonl";
  const fs::path out_b = dir / "b.jsonl";
  run("simulate --process " + process.string() + " --n 40 --seed 9 --out-file " +
      out_a.string());
  run("simulate --process " + process.string() + " --n 40 --seed 9 --out-file " +
      out_b.string());
  CHECK(read_text(out_a) == read_text(out_b));
  CHECK_FALSE(read_text(out_a).empty());
}

TEST_CASE("simulate: invalid process is a config error") {
  const fs::path dir = scratch_dir();
  const fs::path process = dir / "invalid.json";
  write_text(process, R"({"horizon":2,"bad_prior":1.7})");
  const RunResult result =
      run("simulate --process " + process.string() + " --n 5");
  CHECK(result.exit_code == 3);
}

TEST_CASE("coverage: tiny run emits a verdict") {
  const fs::path dir = scratch_dir();
  const fs::path process = dir / "processes.json";
  write_text(process, R"({"processes":[{"controller_id":"ctrl-a","horizon":2,
    "bad_prior":0.25,"probe_surv_bad":0.5,"probe_surv_good":0.9,
    "evid_surv_bad":0.6,"evid_surv_good":0.45}]})");
  const fs::path manifests = dir / "manifests.json";
  write_text(manifests, R"({"controllers":[{"id":"ctrl-a","horizon":2}]})");
  const RunResult result = run("coverage --process " + process.string() +
                               " --manifests " + manifests.string() +
                               " --n 50 --replications 100 --seed 3" +
                               " --format records");
  CHECK(result.exit_code == 0);
  const auto summary = nlohmann::json::parse(result.output);
  CHECK(summary.at("decomposition_failures") == 0);
  CHECK(summary.at("certificate").at("pass") == true);
}

TEST_CASE("ta confusion reproduces the published diagnostics") {
  const RunResult result = run("ta confusion --tp 40 --fn 11 --fp 19 --tn 47");
  CHECK(result.exit_code == 0);
  CHECK(result.output.find("accuracy,0.743590") != std::string::npos);
  CHECK(result.output.find("precision,0.677966") != std::string::npos);
  CHECK(result.output.find("post_survival_bug_rate,0.189655") !=
        std::string::npos);
}

TEST_CASE("ta label clusters votes into suites") {
  const fs::path dir = scratch_dir();
  const fs::path votes = dir / "votes.jsonl";
  std::ostringstream lines;
  lines << R"({"problem_id":"p1","input_id":"in1","outputs":)"
        << R"(["42","42","42","42","42","42","42","42","42","1","1","1","1","1","1","1"]})"
        << "\n"
        << R"({"problem_id":"p1","input_id":"in2","outputs":)"
        << R"(["7","8","9","10","11","12","13","14","15","16","17","18","19","20","21","22"]})"
        << "\n";
  write_text(votes, lines.str());
  const RunResult result =
      run("ta label --votes " + votes.string() + " --threshold 9 --cap 32");
  CHECK(result.exit_code == 0);
  const auto suites = nlohmann::json::parse(result.output);
  REQUIRE(suites.size() == 1);
  CHECK(suites[0].at("cases").size() == 1);  // in2 never reaches consensus
  CHECK(suites[0].at("cases")[0].at("consensus_output") == "42");
}

TEST_CASE("ta detection renders the sampled curve") {
  const fs::path dir = scratch_dir();
  const fs::path flags = dir / "flags.jsonl";
  write_text(flags,
             R"({"problem_id":"p1","detects":[true,false,false]})"
             "\n"
             R"({"problem_id":"p2","detects":[false,false]})"
             "\n");
  const RunResult result = run("ta detection --flags " + flags.string() +
                               " --ks 1,2,3 --draws 50 --seed 4");
  CHECK(result.exit_code == 0);
  CHECK(result.output.rfind("k,mean,sd", 0) == 0);
  CHECK(result.output.find("\n3,0.500000,") != std::string::npos);  // exact at k=3
}

TEST_CASE("ta rates computes the problem-set fractions") {
  const fs::path dir = scratch_dir();
  const fs::path outcomes = dir / "outcomes.jsonl";
  std::ostringstream lines;
  for (int i = 0; i < 10; ++i) {
    lines << R"({"problem_id":"p)" << i << R"(","suite_nonempty":)"
          << (i < 7 ? "true" : "false") << R"(,"rescued":)"
          << (i < 2 ? "true" : "false") << "}\n";
  }
  write_text(outcomes, lines.str());
  const RunResult result = run("ta rates --outcomes " + outcomes.string());
  CHECK(result.exit_code == 0);
  CHECK(result.output.find("gen_rate,0.7") != std::string::npos);
  CHECK(result.output.find("rescue_rate,0.2") != std::string::npos);
}

TEST_CASE("dea command reproduces the published efficiency table") {
  const RunResult result = run("dea --dmus " + kDataDir + "/dea_cost_accuracy.csv");
  CHECK(result.exit_code == 0);
  CHECK(result.output.find("CodeSim,0.014984270,40.1000,0.955629,no,0.2631579,"
                           "0.014319399") != std::string::npos);
  CHECK(result.output.find("AlphaCodium,0.023046801,26.9000,0.074198,no,"
                           "0.0973451,0.001710022") != std::string::npos);
  CHECK(result.output.find("CP-Agent,0.035377184,48.5000,1.000000,yes") !=
        std::string::npos);
}

TEST_CASE("memory lifecycle: build, freeze, inspect, audit-replay") {
  const fs::path dir = scratch_dir();
  const fs::path artifacts = dir / "artifacts.jsonl";
  std::ostringstream lines;
  lines << R"({"problem_id":"p1","tag":"segment tree","steps":[)"
        << R"({"step":1,"pass":false,"candidate":"v1","feedback":"wrong answer"},)"
        << R"({"step":2,"pass":true,"candidate":"v2"}]})"
        << "\n"
        << R"({"problem_id":"p2","tag":"missing semicolon","steps":[)"
        << R"({"step":1,"pass":false,"candidate":"w1","feedback":"compile error"},)"
        << R"({"step":3,"pass":true,"candidate":"w2"}]})"
        << "\n";
  write_text(artifacts, lines.str());

  const fs::path bank = dir / "bank.json";
  const RunResult build = run("memory build --artifacts " + artifacts.string() +
                              " --bank " + bank.string());
  CHECK(build.exit_code == 0);
  CHECK(build.output.find("inserted 2") != std::string::npos);

  const fs::path snapshot = dir / "snapshot.json";
  const RunResult freeze_run = run("memory freeze --bank " + bank.string() +
                                   " --snapshot " + snapshot.string());
  CHECK(freeze_run.exit_code == 0);
  CHECK(freeze_run.output.find("content_hash ") != std::string::npos);
  const std::string hash_line = freeze_run.output;

  const RunResult inspect = run("memory inspect --bank " + snapshot.string());
  CHECK(inspect.exit_code == 0);
  const auto info = nlohmann::json::parse(inspect.output);
  CHECK(info.at("frozen") == true);
  CHECK(info.at("general_items") == 1);
  CHECK(info.at("total_items") == 2);

  const RunResult replay = run("memory audit-replay --snapshot " +
                               snapshot.string() + " --artifacts " +
                               artifacts.string());
  CHECK(replay.exit_code == 0);
  CHECK(replay.output.find("audit entries 2") != std::string::npos);

  // freezing the same content twice prints the same hash
  const RunResult freeze_again = run("memory freeze --bank " + bank.string() +
                                     " --snapshot " + (dir / "s2.json").string());
  CHECK(freeze_again.output == hash_line);
}

TEST_CASE("certify: five-controller run matches the library recomputation") {
  const fs::path dir = scratch_dir();

  // build one dataset per controller from the shipped demo processes
  const auto processes =
      stopcert::load_processes(kDataDir + "/processes_demo.json");
  REQUIRE(processes.size() == 5);
  std::vector<stopcert::Trajectory> all;
  std::uint64_t index = 0;
  for (const auto& [controller_id, process] : processes) {
    auto dataset = stopcert::simulate_dataset(
        process, 166, stopcert::derive_stream_seed(4242, index++), controller_id);
    for (auto& traj : dataset) all.push_back(std::move(traj));
  }
  const fs::path traces = dir / "five.jsonl";
  stopcert::write_traces(traces.string(), all);

  const RunResult result = run("certify --traces " + traces.string() +
                               " --manifests " + kDataDir + "/manifest_class.json" +
                               " --budget " + kDataDir + "/budget.json" +
                               " --format records");
  REQUIRE(result.exit_code == 0);
  const auto summary = nlohmann::json::parse(result.output);
  REQUIRE(summary.at("reports").size() == 5);

  // recompute through the library and compare certificate values
  const auto manifest_class =
      stopcert::load_manifest_class(kDataDir + "/manifest_class.json");
  const auto budget_cfg = stopcert::load_budget(kDataDir + "/budget.json");
  const auto budget = stopcert::allocate_budget(
      budget_cfg.delta, budget_cfg.split, 5, 5, {1}, budget_cfg.j_max);
  stopcert::CalibrationInput input;
  input.trajectories = all;
  const auto selection =
      stopcert::select_controller(manifest_class, input, budget);
  CHECK(summary.at("winner") == selection.winner_id);
  for (std::size_t i = 0; i < selection.reports.size(); ++i) {
    CHECK(summary.at("reports")[i].at("controller_id") ==
          selection.reports[i].controller_id);
    CHECK(summary.at("reports")[i].at("c_t_ctrl").get<double>() ==
          doctest::Approx(selection.reports[i].c_t_ctrl).epsilon(1e-12));
    CHECK(summary.at("reports")[i].at("prod_no_false").get<double>() ==
          doctest::Approx(selection.reports[i].prod_no_false).epsilon(1e-12));
  }

  // human-readable form prints five rows plus the winner line
  const RunResult table = run("certify --traces " + traces.string() +
                              " --manifests " + kDataDir + "/manifest_class.json" +
                              " --budget " + kDataDir + "/budget.json");
  CHECK(table.exit_code == 0);
  CHECK(table.output.find("winner: " + selection.winner_id) != std::string::npos);
  CHECK(table.output.find("<- selected") != std::string::npos);
}

TEST_CASE("curves: per-step acceptance deltas between two controllers") {
  const fs::path dir = scratch_dir();
  std::vector<stopcert::Trajectory> all;
  stopcert::GroundTruthProcess strong;
  strong.horizon = 3;
  strong.bad_prior = {0.1};
  strong.evid_surv_good = {0.6};
  strong.memory_snapshot_id = "mstar";
  for (auto& traj : stopcert::simulate_dataset(strong, 120, 3, "with-mem")) {
    all.push_back(std::move(traj));
  }
  stopcert::GroundTruthProcess weak = strong;
  weak.evid_surv_good = {0.35};
  weak.memory_snapshot_id.reset();
  for (auto& traj : stopcert::simulate_dataset(weak, 120, 4, "no-mem")) {
    all.push_back(std::move(traj));
  }
  const fs::path traces = dir / "curves.jsonl";
  stopcert::write_traces(traces.string(), all);

  const RunResult result = run("curves --traces " + traces.string() +
                               " --on with-mem --off no-mem --t-max 3" +
                               " --format records");
  CHECK(result.exit_code == 0);
  const auto record = nlohmann::json::parse(result.output);
  REQUIRE(record.at("with").size() == 3);
  REQUIRE(record.at("delta").size() == 3);
  // the stronger variant accepts more by every step
  for (int t = 0; t < 3; ++t) {
    CHECK(record.at("delta")[t].get<double>() > 0.0);
  }
}

TEST_CASE("shipped taxonomy file matches the built-in table") {
  const stopcert::Taxonomy loaded =
      stopcert::load_taxonomy(kDataDir + "/taxonomy.json");
  const stopcert::Taxonomy& builtin = stopcert::Taxonomy::builtin();
  REQUIRE(loaded.primaries() == builtin.primaries());
  REQUIRE(loaded.secondaries().size() == builtin.secondaries().size());
  for (std::size_t i = 0; i < loaded.secondaries().size(); ++i) {
    CHECK(loaded.secondaries()[i] == builtin.secondaries()[i]);
  }
}

TEST_CASE("run manifest lands next to outputs") {
  const fs::path dir = scratch_dir();
  const fs::path out_dir = dir / "run1";
  const RunResult result = run("ta confusion --tp 1 --fn 2 --fp 3 --tn 4 --out " +
                               out_dir.string());
  CHECK(result.exit_code == 0);
  CHECK(fs::exists(out_dir / "run_manifest.json"));
  CHECK(fs::exists(out_dir / "confusion.csv"));
  const auto manifest =
      nlohmann::json::parse(read_text(out_dir / "run_manifest.json"));
  CHECK(manifest.at("command") == "ta confusion");
  CHECK(manifest.contains("generated_at"));
}
