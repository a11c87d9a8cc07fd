#pragma once

// Controller manifests, confidence-budget allocation, and the
// clean-before-false certificate with finite-class selection.
//
// The certificate for a controller is
//     C_T = clip+[ prod_t (1 - q_ctrl_t) - prod_t (1 - h_lcb_t) ]
// from per-step controller UCBs on the false hazard and LCBs on the clean
// hazard. Selection over a pre-declared finite class takes the argmax of
// the per-controller certificates; the budget allocator splits the total
// calibration failure probability across channels, steps, grid cells and
// controllers so that all bounds hold jointly.

#include <algorithm>
#include <cmath>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "stopcert/gate.hpp"
#include "stopcert/hazard.hpp"
#include "stopcert/trace.hpp"

namespace stopcert {

struct ChannelFlags {
  bool sv = true;
  bool hp = true;
  bool ta = true;
  bool exp = true;
};

struct GateSpec {
  std::string kind = "sv_ta_hard_screen";  // observable gate description
  std::vector<double> grid;                // optional risk-score grid
  std::vector<double> alpha = {0.10};      // per-step risk budgets, broadcast

  double alpha_at(int t) const {
    if (alpha.empty()) return 0.10;
    const auto idx = std::min<std::size_t>(static_cast<std::size_t>(t) - 1,
                                           alpha.size() - 1);
    return alpha[idx];
  }
};

// Frozen policy description. Certificate-bearing manifests must be
// audit-only: the memory snapshot is read-only during calibration and test.
struct ControllerManifest {
  std::string id;
  GateSpec gate_spec;
  std::string probe_interface_id;
  int evid_intensity = 0;            // TA input budget m
  std::string evid_aggregation;      // consensus rule reference
  int k_gen = 0;                     // general-bank injection budget
  int l_alg = 0;                     // algorithmic-bucket retrieval budget
  std::string routing_id;
  std::string dedup_id;
  std::string prompt_id;
  std::string decode_id;
  int horizon = 1;                   // T
  std::optional<std::string> memory_snapshot_id;
  WriteMode write_mode = WriteMode::AuditOnly;
  ChannelFlags channels;

  void validate() const {
    if (id.empty()) throw std::invalid_argument("manifest id must be non-empty");
    if (horizon < 1) throw std::invalid_argument("manifest horizon must be >= 1");
    if (write_mode != WriteMode::AuditOnly) {
      throw std::invalid_argument(
          "certificate-bearing manifests must be audit-only: " + id);
    }
  }
};

struct ManifestClass {
  std::vector<ControllerManifest> controllers;
  std::string declared_before;  // calibration-split identifier

  void validate() const {
    if (controllers.empty()) {
      throw std::invalid_argument("manifest class must be non-empty");
    }
    std::set<std::string> ids;
    for (const ControllerManifest& manifest : controllers) {
      manifest.validate();
      if (!ids.insert(manifest.id).second) {
        throw std::invalid_argument("duplicate controller id: " + manifest.id);
      }
    }
  }
};

struct BudgetSplit {
  double raw = 0.0;
  double gate = 0.0;
  double probe = 0.0;
  double evid = 0.0;

  double sum() const { return raw + gate + probe + evid; }
};

struct BudgetAllocation {
  double delta = 0.0;
  BudgetSplit split;
  int horizon = 1;
  int n_controllers = 1;
  std::vector<int> grid_sizes;  // |Theta_t| per step
  int j_max = 1;

  double raw_row_level = 0.0;    // split.raw  / (2 T |Pi|)
  double probe_row_level = 0.0;  // split.probe / (T |Pi|)
  double evid_row_level = 0.0;   // split.evid / (T |Pi| J_max)
  std::vector<double> gate_row_levels;  // split.gate / (T |Theta_t| |Pi|)

  double gate_row_level(int grid_size) const {
    if (grid_size < 1) return 0.0;
    return split.gate / (static_cast<double>(horizon) *
                         static_cast<double>(grid_size) *
                         static_cast<double>(n_controllers));
  }
};

// Splits the calibration failure probability. A component equal to zero is
// allowed: the corresponding channel is simply forced to its conservative
// constant downstream instead of dividing by zero.
inline BudgetAllocation allocate_budget(double delta, const BudgetSplit& split,
                                        int horizon, int n_controllers,
                                        std::vector<int> grid_sizes, int j_max) {
  if (!(delta > 0.0 && delta < 1.0)) {
    throw std::invalid_argument("budget delta must be in (0,1)");
  }
  if (split.raw < 0.0 || split.gate < 0.0 || split.probe < 0.0 ||
      split.evid < 0.0) {
    throw std::invalid_argument("budget components must be non-negative");
  }
  if (split.sum() > delta + 1e-12) {
    throw std::invalid_argument("budget components exceed delta");
  }
  if (horizon < 1 || n_controllers < 1 || j_max < 1) {
    throw std::invalid_argument("budget sizes must be >= 1");
  }
  if (grid_sizes.empty()) grid_sizes.assign(1, 1);
  if (static_cast<int>(grid_sizes.size()) == 1 && horizon > 1) {
    grid_sizes.assign(static_cast<std::size_t>(horizon), grid_sizes.front());
  }
  if (static_cast<int>(grid_sizes.size()) != horizon) {
    throw std::invalid_argument("grid sizes must match the horizon");
  }

  BudgetAllocation alloc;
  alloc.delta = delta;
  alloc.split = split;
  alloc.horizon = horizon;
  alloc.n_controllers = n_controllers;
  alloc.grid_sizes = std::move(grid_sizes);
  alloc.j_max = j_max;

  const double t = static_cast<double>(horizon);
  const double pi = static_cast<double>(n_controllers);
  alloc.raw_row_level = split.raw / (2.0 * t * pi);
  alloc.probe_row_level = split.probe / (t * pi);
  alloc.evid_row_level = split.evid / (t * pi * static_cast<double>(j_max));
  alloc.gate_row_levels.reserve(alloc.grid_sizes.size());
  for (int size : alloc.grid_sizes) {
    if (size < 1) throw std::invalid_argument("grid sizes must be >= 1");
    alloc.gate_row_levels.push_back(alloc.gate_row_level(size));
  }
  return alloc;
}

// clip+( prod(1-q) - prod(1-h) ): the stopped clean-before-false bound.
inline double certificate(std::span<const double> q_ucb,
                          std::span<const double> h_lcb) {
  if (q_ucb.size() != h_lcb.size()) {
    throw std::invalid_argument("certificate: bound vectors differ in length");
  }
  double no_false = 1.0;
  double still_active = 1.0;
  for (std::size_t i = 0; i < q_ucb.size(); ++i) {
    if (q_ucb[i] < 0.0 || q_ucb[i] > 1.0 || h_lcb[i] < 0.0 || h_lcb[i] > 1.0) {
      throw std::invalid_argument("certificate: bounds must lie in [0,1]");
    }
    no_false *= 1.0 - q_ucb[i];
    still_active *= 1.0 - h_lcb[i];
  }
  return std::max(0.0, no_false - still_active);
}

struct CertificateReport {
  std::string controller_id;
  std::vector<StepBounds> steps;
  double prod_no_false = 0.0;      // prod(1 - q_ctrl)
  double prod_still_active = 1.0;  // prod(1 - h)
  double c_t_ctrl = 0.0;
  double c_t_raw = 0.0;            // raw-only certificate, for transparency
  bool mechanism_disabled = false;
  bool no_data = false;
  bool selected = false;
  std::vector<GateDecision> gate_audit;  // present when the manifest has a grid
};

// Inputs to certification: validated trajectories plus the controllers whose
// mechanism channel was disabled by gate-semantics violations.
struct CalibrationInput {
  std::vector<Trajectory> trajectories;
  std::set<std::string> mechanism_disabled_controllers;
};

namespace detail {

inline std::vector<GateRow> gate_rows_at(std::span<const Trajectory> trajectories,
                                         const std::string& controller_id,
                                         int t) {
  std::vector<GateRow> rows;
  for (const Trajectory& traj : trajectories) {
    if (traj.controller_id != controller_id) continue;
    if (!active_at(traj, t)) continue;
    const StepRecord& row = traj.steps[t - 1];
    if (!row.rho || !row.hidden_bad) continue;
    const double nats = row.evidence_nats.value_or(0.0);
    rows.push_back({risk_score(*row.rho, nats), *row.hidden_bad});
  }
  return rows;
}

}  // namespace detail

inline CertificateReport controller_certificate(
    const ControllerManifest& manifest, const CalibrationInput& input,
    const BudgetAllocation& budget) {
  manifest.validate();
  CertificateReport report;
  report.controller_id = manifest.id;
  report.mechanism_disabled =
      input.mechanism_disabled_controllers.count(manifest.id) > 0;

  const ChannelLevels levels{budget.raw_row_level, budget.probe_row_level,
                             budget.evid_row_level};
  ChannelSwitches switches;
  switches.probe = manifest.channels.hp;
  switches.evidence = manifest.channels.ta;
  switches.mechanism = !report.mechanism_disabled &&
                       (manifest.channels.hp || manifest.channels.ta);

  std::vector<double> q_ctrl, q_raw, h_used;
  bool any_rows = false;
  for (int t = 1; t <= manifest.horizon; ++t) {
    const StepCounts counts = step_counts(input.trajectories, manifest.id, t,
                                          manifest.memory_snapshot_id);
    any_rows = any_rows || counts.n_active > 0;
    StepBounds bounds = compute_step_bounds(counts, levels, switches);
    q_ctrl.push_back(bounds.q_ctrl_ucb);
    q_raw.push_back(bounds.q_raw_ucb);
    // The certificate consumes the snapshot-conditioned success LCB when the
    // manifest carries a snapshot; the on/off gap stays a diagnostic.
    h_used.push_back(manifest.memory_snapshot_id ? bounds.h_mem_lcb
                                                 : bounds.h_lcb);
    report.steps.push_back(std::move(bounds));

    if (!manifest.gate_spec.grid.empty()) {
      const auto rows = detail::gate_rows_at(input.trajectories, manifest.id, t);
      ThresholdGrid grid{t, manifest.gate_spec.grid};
      report.gate_audit.push_back(
          calibrate_gate(rows, grid, manifest.gate_spec.alpha_at(t),
                         budget.split.gate, manifest.horizon,
                         budget.n_controllers));
    }
  }

  report.no_data = !any_rows;
  report.prod_no_false = 1.0;
  report.prod_still_active = 1.0;
  for (int t = 0; t < manifest.horizon; ++t) {
    report.prod_no_false *= 1.0 - q_ctrl[static_cast<std::size_t>(t)];
    report.prod_still_active *= 1.0 - h_used[static_cast<std::size_t>(t)];
  }
  report.c_t_ctrl = certificate(q_ctrl, h_used);
  report.c_t_raw = certificate(q_raw, h_used);
  return report;
}

struct SelectionResult {
  std::string winner_id;
  std::vector<CertificateReport> reports;  // in class order
};

// Argmax of the controller certificates over the pre-declared class; ties
// resolve to the lexicographically smallest controller id so selection is
// reproducible.
inline SelectionResult select_controller(const ManifestClass& manifest_class,
                                         const CalibrationInput& input,
                                         const BudgetAllocation& budget) {
  manifest_class.validate();
  if (budget.n_controllers !=
      static_cast<int>(manifest_class.controllers.size())) {
    throw std::invalid_argument(
        "budget must be allocated over the full manifest class");
  }
  SelectionResult result;
  for (const ControllerManifest& manifest : manifest_class.controllers) {
    result.reports.push_back(controller_certificate(manifest, input, budget));
  }
  const CertificateReport* best = nullptr;
  for (const CertificateReport& report : result.reports) {
    if (!best || report.c_t_ctrl > best->c_t_ctrl ||
        (report.c_t_ctrl == best->c_t_ctrl &&
         report.controller_id < best->controller_id)) {
      best = &report;
    }
  }
  result.winner_id = best->controller_id;
  for (CertificateReport& report : result.reports) {
    report.selected = report.controller_id == result.winner_id;
  }
  return result;
}

}  // namespace stopcert
