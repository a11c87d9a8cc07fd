#include <doctest.h>

#include <cmath>
#include <vector>

#include "stopcert/certificate.hpp"
#include "stopcert/simulator.hpp"

using namespace stopcert;

namespace {

ControllerManifest basic_manifest(const std::string& id, int horizon) {
  ControllerManifest manifest;
  manifest.id = id;
  manifest.horizon = horizon;
  return manifest;
}

GroundTruthProcess flat_process(int horizon, double bad, double probe_bad,
                                double good_rate) {
  GroundTruthProcess process;
  process.horizon = horizon;
  process.bad_prior = {bad};
  process.probe_surv_bad = {probe_bad};
  process.probe_surv_good = {1.0};
  process.evid_surv_bad = {1.0};
  process.evid_surv_good = {good_rate};
  return process;
}

}  // namespace

TEST_CASE("budget arithmetic") {
  SUBCASE("published instantiation") {
    const BudgetAllocation alloc =
        allocate_budget(0.10, {0.025, 0.025, 0.025, 0.025}, 5, 5, {1}, 1);
    CHECK(alloc.raw_row_level == 5e-4);
    CHECK(alloc.probe_row_level == doctest::Approx(0.001).epsilon(1e-15));
    CHECK(alloc.evid_row_level == doctest::Approx(0.001).epsilon(1e-15));
    REQUIRE(alloc.gate_row_levels.size() == 5);
    CHECK(alloc.gate_row_levels[0] == doctest::Approx(0.001).epsilon(1e-15));
  }
  SUBCASE("single-controller single-step case") {
    const BudgetAllocation alloc =
        allocate_budget(0.10, {0.025, 0.025, 0.025, 0.025}, 1, 1, {1}, 1);
    CHECK(alloc.raw_row_level == doctest::Approx(0.0125).epsilon(1e-15));
    CHECK(alloc.gate_row_levels[0] == doctest::Approx(0.025).epsilon(1e-15));
    CHECK(alloc.probe_row_level == doctest::Approx(0.025).epsilon(1e-15));
    CHECK(alloc.evid_row_level == doctest::Approx(0.025).epsilon(1e-15));
  }
  SUBCASE("components exceeding delta violate condition (G)") {
    CHECK_THROWS_AS(allocate_budget(0.10, {0.05, 0.02, 0.02, 0.02}, 5, 5, {1}, 1),
                    std::invalid_argument);
  }
  SUBCASE("zero components are allowed") {
    const BudgetAllocation alloc =
        allocate_budget(0.05, {0.05, 0.0, 0.0, 0.0}, 2, 1, {1}, 1);
    CHECK(alloc.probe_row_level == 0.0);
    CHECK(alloc.gate_row_levels[0] == 0.0);
  }
}

TEST_CASE("certificate arithmetic") {
  SUBCASE("single step recovers the clipped difference") {
    const std::vector<double> q = {0.1};
    const std::vector<double> h = {0.5};
    CHECK(certificate(q, h) == doctest::Approx(0.4).epsilon(1e-15));
  }
  SUBCASE("all-zero bounds clip to zero") {
    const std::vector<double> q = {0.0, 0.0};
    const std::vector<double> h = {0.0, 0.0};
    CHECK(certificate(q, h) == 0.0);
  }
  SUBCASE("negative differences clip to zero") {
    const std::vector<double> q = {0.3, 0.3};
    const std::vector<double> h = {0.1, 0.1};
    CHECK(certificate(q, h) == 0.0);  // 0.49 - 0.81 clipped
  }
  SUBCASE("length mismatch is a domain error") {
    const std::vector<double> q = {0.1, 0.2};
    const std::vector<double> h = {0.5};
    CHECK_THROWS_AS(certificate(q, h), std::invalid_argument);
  }
}

TEST_CASE("manifest invariants") {
  ControllerManifest deploy = basic_manifest("x", 3);
  deploy.write_mode = WriteMode::Deploy;
  CHECK_THROWS_AS(deploy.validate(), std::invalid_argument);

  ManifestClass empty;
  CHECK_THROWS_AS(empty.validate(), std::invalid_argument);

  ManifestClass dupes;
  dupes.controllers = {basic_manifest("a", 1), basic_manifest("a", 1)};
  CHECK_THROWS_AS(dupes.validate(), std::invalid_argument);
}

TEST_CASE("controller certificate on synthetic data") {
  const int horizon = 5;
  const BudgetAllocation budget =
      allocate_budget(0.10, {0.025, 0.025, 0.025, 0.025}, horizon, 1, {1}, 1);

  GroundTruthProcess process = flat_process(horizon, 0.3, 0.4, 0.55);
  CalibrationInput input;
  input.trajectories = simulate_dataset(process, 400, 17, "ctrl");

  const CertificateReport report =
      controller_certificate(basic_manifest("ctrl", horizon), input, budget);

  SUBCASE("products match an independent recomputation") {
    double no_false = 1.0;
    double still_active = 1.0;
    for (int t = 1; t <= horizon; ++t) {
      const StepCounts counts = step_counts(input.trajectories, "ctrl", t);
      const double q = std::min(
          cp_upper_bound(counts.f, counts.n_active, budget.raw_row_level),
          cp_upper_bound(counts.f_probe, counts.n_labeled,
                         budget.probe_row_level) *
              cp_upper_bound(counts.k_evid_surv, counts.n_evid_cond,
                             budget.evid_row_level));
      const double h =
          cp_lower_bound(counts.s_nomem, counts.n_nomem, budget.raw_row_level);
      no_false *= 1.0 - q;
      still_active *= 1.0 - h;
    }
    CHECK(report.prod_no_false == doctest::Approx(no_false).epsilon(1e-12));
    CHECK(report.prod_still_active ==
          doctest::Approx(still_active).epsilon(1e-12));
    CHECK(report.c_t_ctrl ==
          doctest::Approx(std::max(0.0, no_false - still_active)).epsilon(1e-12));
  }

  SUBCASE("controller bound is never looser than raw") {
    for (const StepBounds& bounds : report.steps) {
      CHECK(bounds.q_ctrl_ucb <= bounds.q_raw_ucb + 1e-15);
      CHECK(bounds.q_ctrl_ucb <= bounds.q_mech_ucb + 1e-15);
    }
    CHECK(report.c_t_ctrl >= report.c_t_raw - 1e-15);
  }
}

TEST_CASE("no labeled rows falls back to the raw bound") {
  const BudgetAllocation budget =
      allocate_budget(0.10, {0.025, 0.025, 0.025, 0.025}, 2, 1, {1}, 1);
  GroundTruthProcess process = flat_process(2, 0.3, 0.5, 0.5);
  CalibrationInput input;
  input.trajectories = simulate_dataset(process, 100, 3, "ctrl");
  for (auto& traj : input.trajectories) {
    for (auto& row : traj.steps) row.hidden_bad.reset();
  }
  const CertificateReport report =
      controller_certificate(basic_manifest("ctrl", 2), input, budget);
  for (const StepBounds& bounds : report.steps) {
    CHECK(bounds.rho_probe_ucb == 1.0);  // empty labeled cell
    CHECK(bounds.b_evid_ucb == 1.0);
    CHECK(bounds.q_ctrl_ucb == bounds.q_raw_ucb);
  }
}

TEST_CASE("homogeneous bounds give a power-form product") {
  const int horizon = 5;
  const BudgetAllocation budget =
      allocate_budget(0.10, {0.10, 0.0, 0.0, 0.0}, horizon, 1, {1}, 1);
  std::vector<double> q(horizon, 0.2);
  std::vector<double> h(horizon, 0.0);
  CHECK(certificate(q, h) == 0.0);  // 0.8^5 - 1 clips
  // the report's product matches (1-q)^5 when every step repeats
  GroundTruthProcess process = flat_process(horizon, 0.0, 1.0, 0.0);
  CalibrationInput input;
  input.trajectories = simulate_dataset(process, 50, 5, "ctrl");
  const CertificateReport report =
      controller_certificate(basic_manifest("ctrl", horizon), input, budget);
  const double q0 = report.steps[0].q_ctrl_ucb;
  bool homogeneous = true;
  for (const auto& bounds : report.steps) {
    homogeneous = homogeneous && bounds.q_ctrl_ucb == q0;
  }
  if (homogeneous) {
    CHECK(report.prod_no_false ==
          doctest::Approx(std::pow(1.0 - q0, horizon)).epsilon(1e-12));
  }
}

TEST_CASE("gate-semantics flag disables the mechanism channel") {
  const BudgetAllocation budget =
      allocate_budget(0.10, {0.025, 0.025, 0.025, 0.025}, 2, 1, {1}, 1);
  GroundTruthProcess process = flat_process(2, 0.4, 0.3, 0.5);
  CalibrationInput input;
  input.trajectories = simulate_dataset(process, 200, 11, "ctrl");
  input.mechanism_disabled_controllers.insert("ctrl");
  const CertificateReport report =
      controller_certificate(basic_manifest("ctrl", 2), input, budget);
  CHECK(report.mechanism_disabled);
  for (const StepBounds& bounds : report.steps) {
    CHECK_FALSE(bounds.mechanism_enabled);
    CHECK(bounds.q_ctrl_ucb == bounds.q_raw_ucb);
  }
}

TEST_CASE("zero trajectories produce a flagged conservative report") {
  const BudgetAllocation budget =
      allocate_budget(0.10, {0.025, 0.025, 0.025, 0.025}, 3, 1, {1}, 1);
  const CertificateReport report = controller_certificate(
      basic_manifest("ctrl", 3), CalibrationInput{}, budget);
  CHECK(report.no_data);
  CHECK(report.c_t_ctrl == 0.0);
  for (const StepBounds& bounds : report.steps) {
    CHECK(bounds.q_ctrl_ucb == 1.0);
    CHECK(bounds.h_lcb == 0.0);
  }
}

TEST_CASE("selection over a synthetic class") {
  const int horizon = 3;

  SUBCASE("a per-step dominator wins") {
    ManifestClass manifest_class;
    manifest_class.controllers = {basic_manifest("strong", horizon),
                                  basic_manifest("weak", horizon)};
    const BudgetAllocation budget =
        allocate_budget(0.10, {0.025, 0.025, 0.025, 0.025}, horizon, 2, {1}, 1);
    CalibrationInput input;
    for (auto traj : simulate_dataset(flat_process(horizon, 0.05, 0.2, 0.6),
                                      500, 23, "strong")) {
      input.trajectories.push_back(std::move(traj));
    }
    for (auto traj : simulate_dataset(flat_process(horizon, 0.4, 0.9, 0.2),
                                      500, 29, "weak")) {
      input.trajectories.push_back(std::move(traj));
    }
    const SelectionResult result =
        select_controller(manifest_class, input, budget);
    CHECK(result.winner_id == "strong");
    REQUIRE(result.reports.size() == 2);
    CHECK(result.reports[0].selected);
    CHECK_FALSE(result.reports[1].selected);
  }

  SUBCASE("five-variant class ranks by component strength") {
    // Constructed so each added channel tightens the certificate.
    struct Variant {
      const char* id;
      double bad, probe_bad, good;
      bool hp, ta;
    };
    const std::vector<Variant> variants = {
        {"e-base", 0.40, 1.0, 0.30, false, false},
        {"d-sv", 0.30, 1.0, 0.35, false, true},
        {"c-sv-hp", 0.22, 0.6, 0.38, true, true},
        {"b-sv-hp-ta", 0.15, 0.5, 0.42, true, true},
        {"a-full", 0.08, 0.4, 0.55, true, true},
    };
    ManifestClass manifest_class;
    CalibrationInput input;
    std::uint64_t seed = 101;
    for (const Variant& v : variants) {
      ControllerManifest manifest = basic_manifest(v.id, horizon);
      manifest.channels.hp = v.hp;
      manifest.channels.ta = v.ta;
      manifest_class.controllers.push_back(manifest);
      GroundTruthProcess process = flat_process(horizon, v.bad, v.probe_bad, v.good);
      process.evid_surv_bad = {0.6};
      for (auto traj : simulate_dataset(process, 800, seed++, v.id)) {
        input.trajectories.push_back(std::move(traj));
      }
    }
    const BudgetAllocation budget =
        allocate_budget(0.10, {0.025, 0.025, 0.025, 0.025}, horizon, 5, {1}, 1);
    const SelectionResult result =
        select_controller(manifest_class, input, budget);
    CHECK(result.winner_id == "a-full");
    // certificates rise along the component ladder (class order)
    double previous = -1.0;
    for (const CertificateReport& report : result.reports) {
      CHECK(report.c_t_ctrl >= previous);
      previous = report.c_t_ctrl;
    }
  }

  SUBCASE("all-equal certificates break ties by smallest id") {
    ManifestClass manifest_class;
    manifest_class.controllers = {basic_manifest("zeta", 1),
                                  basic_manifest("alpha", 1),
                                  basic_manifest("midway", 1)};
    const BudgetAllocation budget =
        allocate_budget(0.10, {0.025, 0.025, 0.025, 0.025}, 1, 3, {1}, 1);
    const SelectionResult result =
        select_controller(manifest_class, CalibrationInput{}, budget);
    CHECK(result.winner_id == "alpha");
  }

  SUBCASE("budget sized for a different class is rejected") {
    ManifestClass manifest_class;
    manifest_class.controllers = {basic_manifest("a", 1)};
    const BudgetAllocation budget =
        allocate_budget(0.10, {0.025, 0.025, 0.025, 0.025}, 1, 3, {1}, 1);
    CHECK_THROWS_AS(select_controller(manifest_class, CalibrationInput{}, budget),
                    std::invalid_argument);
  }
}

TEST_CASE("manifests with a grid carry a gate audit in the report") {
  const BudgetAllocation budget =
      allocate_budget(0.10, {0.025, 0.025, 0.025, 0.025}, 1, 1, {2}, 1);
  ControllerManifest manifest = basic_manifest("ctrl", 1);
  manifest.gate_spec.grid = {0.1, 0.4};

  CalibrationInput input;
  for (int i = 0; i < 400; ++i) {
    Trajectory traj;
    traj.problem_id = "p" + std::to_string(i);
    traj.controller_id = "ctrl";
    traj.horizon = 1;
    StepRecord row;
    row.problem_id = traj.problem_id;
    row.controller_id = "ctrl";
    row.t = 1;
    row.active = true;
    row.rho = i % 2 == 0 ? 0.05 : 0.3;  // scores split across the grid
    row.evidence_nats = 0.0;
    row.hidden_bad = i % 25 == 0;       // 4% bad overall
    traj.steps = {row};
    input.trajectories.push_back(std::move(traj));
  }
  const CertificateReport report =
      controller_certificate(manifest, input, budget);
  REQUIRE(report.gate_audit.size() == 1);
  const GateDecision& decision = report.gate_audit[0];
  REQUIRE(decision.per_theta.size() == 2);
  CHECK(decision.per_theta[0].n == 200);
  CHECK(decision.per_theta[1].n == 400);
  CHECK(decision.per_theta[0].n <= decision.per_theta[1].n);
  CHECK_FALSE(decision.always_rejects());
}

TEST_CASE("memory-carrying manifests consume the snapshot-conditioned LCB") {
  const int horizon = 2;
  const BudgetAllocation budget =
      allocate_budget(0.10, {0.025, 0.025, 0.025, 0.025}, horizon, 1, {1}, 1);
  GroundTruthProcess process = flat_process(horizon, 0.1, 0.5, 0.6);
  process.memory_snapshot_id = "snap-1";
  CalibrationInput input;
  input.trajectories = simulate_dataset(process, 300, 41, "ctrl");

  ControllerManifest with_memory = basic_manifest("ctrl", horizon);
  with_memory.memory_snapshot_id = "snap-1";
  const CertificateReport report =
      controller_certificate(with_memory, input, budget);
  for (const StepBounds& bounds : report.steps) {
    CHECK(bounds.h_mem_lcb >= 0.0);
    CHECK(bounds.h_lcb == 0.0);  // no off-snapshot rows
  }
  double still_active = 1.0;
  for (const StepBounds& bounds : report.steps) still_active *= 1.0 - bounds.h_mem_lcb;
  CHECK(report.prod_still_active == doctest::Approx(still_active).epsilon(1e-12));
}
