#pragma once

// Per-step, per-controller calibration counts and channel bounds.
//
// Channels, all exact one-sided Clopper-Pearson on held-out active rows:
//   raw        upper bound on the false-admission hazard, lower bound on the
//              clean-success hazard (shared active-row denominator)
//   probe      upper bound on the joint bad-and-probe-survive mass
//   evidence   upper bound on evidence-gate survival conditional on
//              bad-and-probe-surviving; its negative log is the per-step
//              evidence increment in nats
//   context    success LCB on the memory-on / memory-off partitions; the
//              on/off gap is a diagnostic only and never certifies
//
// The mechanism-factorized bound multiplies the probe mass with the
// exponentiated negative evidence and competes with the raw bound; the
// controller bound takes the minimum. A channel that is disabled (manifest
// switch, gate-semantics violation, or a zero budget share) falls back to
// its conservative constant, which reduces the mechanism bound to 1 and the
// controller bound to the raw bound.
//
// Rows without a hidden-judge label stay in the raw counts but are excluded
// from every mechanism-channel count and denominator; per-step label
// coverage is reported so the gap is visible.

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "stopcert/binomial.hpp"
#include "stopcert/trace.hpp"

namespace stopcert {

struct StepCounts {
  int t = 0;
  std::int64_t n_active = 0;   // active rows (raw denominator)
  std::int64_t f = 0;          // false admissions
  std::int64_t s = 0;          // clean successes
  std::int64_t n_labeled = 0;  // active rows carrying hidden_bad
  std::int64_t n_bad = 0;      // labeled bad
  std::int64_t n_good = 0;     // labeled good
  std::int64_t f_probe = 0;    // labeled bad and probe-survived
  std::int64_t k_good_surv = 0;  // labeled good and probe-survived (diagnostic)
  std::int64_t n_evid_cond = 0;  // = f_probe: bad, probe-surviving subset
  std::int64_t k_evid_surv = 0;  // of those, evidence-gate survived
  std::int64_t n_mem = 0;      // active rows carrying the memory snapshot
  std::int64_t s_mem = 0;
  std::int64_t n_nomem = 0;    // active rows without a snapshot
  std::int64_t s_nomem = 0;

  double label_coverage() const {
    return n_active == 0 ? 1.0
                         : static_cast<double>(n_labeled) /
                               static_cast<double>(n_active);
  }
};

// Counts over one controller's validated trajectories at step t. When
// `snapshot_id` is given, the memory partition matches that id exactly;
// otherwise any row with a snapshot counts as memory-on.
inline StepCounts step_counts(
    std::span<const Trajectory> trajectories, const std::string& controller_id,
    int t, const std::optional<std::string>& snapshot_id = std::nullopt) {
  StepCounts counts;
  counts.t = t;
  for (const Trajectory& traj : trajectories) {
    if (traj.controller_id != controller_id) continue;
    if (!active_at(traj, t)) continue;
    const StepRecord& row = traj.steps[t - 1];
    counts.n_active += 1;
    if (row.false_admission) counts.f += 1;
    if (row.success) counts.s += 1;

    const bool mem_on = snapshot_id ? (row.memory_snapshot_id == snapshot_id)
                                    : row.memory_snapshot_id.has_value();
    if (mem_on) {
      counts.n_mem += 1;
      if (row.success) counts.s_mem += 1;
    } else {
      counts.n_nomem += 1;
      if (row.success) counts.s_nomem += 1;
    }

    if (!row.hidden_bad.has_value()) continue;
    counts.n_labeled += 1;
    if (*row.hidden_bad) {
      counts.n_bad += 1;
      if (row.probe_survived) {
        counts.f_probe += 1;
        counts.n_evid_cond += 1;
        if (row.evid_survived) counts.k_evid_surv += 1;
      }
    } else {
      counts.n_good += 1;
      if (row.probe_survived) counts.k_good_surv += 1;
    }
  }
  return counts;
}

struct RawBounds {
  double q_raw_ucb = 1.0;
  double h_lcb = 0.0;
};

// Raw channel: UCB on the false hazard and LCB on the clean hazard, both at
// the per-row level supplied by the budget allocator. A non-positive level
// means the channel has no budget and returns the conservative constants.
inline RawBounds raw_bounds(const StepCounts& counts, double eta_row) {
  if (eta_row <= 0.0) return {1.0, 0.0};
  return {cp_upper_bound(counts.f, counts.n_active, eta_row),
          cp_lower_bound(counts.s, counts.n_active, eta_row)};
}

// Probe channel: UCB on Pr(bad and probe-survive | active). The denominator
// is the labeled active-row count; with full labels it equals n_active.
inline double probe_ucb(const StepCounts& counts, double eta_probe) {
  if (eta_probe <= 0.0) return 1.0;
  return cp_upper_bound(counts.f_probe, counts.n_labeled, eta_probe);
}

struct EvidenceBound {
  double b_evid_ucb = 1.0;
  double delta_I_nats = 0.0;
};

// Evidence channel on the bad-and-probe-surviving conditional subset. An
// empty cell keeps the factor at 1 (zero nats) so the mechanism bound falls
// back to raw.
inline EvidenceBound evidence_ucb(const StepCounts& counts, double eta_evid) {
  if (eta_evid <= 0.0) return {1.0, 0.0};
  const double b =
      cp_upper_bound(counts.k_evid_surv, counts.n_evid_cond, eta_evid);
  return {b, -std::log(b)};
}

// Sums per-channel evidence increments acting on one admission decision.
inline double accumulate_evidence(std::span<const double> delta_I_nats) {
  double total = 0.0;
  for (double delta : delta_I_nats) {
    if (delta < 0.0) {
      throw std::invalid_argument("evidence increments must be non-negative");
    }
    total += delta;
  }
  return total;
}

struct MechanismBounds {
  double q_mech_ucb = 1.0;
  double q_ctrl_ucb = 1.0;
};

// Mechanism-factorized bound and the controller bound (minimum with raw).
// With the channel disabled only the raw bound applies.
inline MechanismBounds mechanism_ucb(double rho_probe_ucb, double evidence_nats,
                                     double q_raw_ucb, bool enabled = true) {
  if (!enabled) return {1.0, q_raw_ucb};
  const double q_mech = rho_probe_ucb * std::exp(-evidence_nats);
  return {q_mech, std::min(q_raw_ucb, q_mech)};
}

struct ContextBounds {
  double h_mem_lcb = 0.0;
  double h_off_lcb = 0.0;
  double hazard_gap = 0.0;  // diagnostic only, never certifies
};

inline ContextBounds context_lcb(const StepCounts& counts, double eta_row) {
  if (eta_row <= 0.0) return {0.0, 0.0, 0.0};
  ContextBounds out;
  out.h_mem_lcb = cp_lower_bound(counts.s_mem, counts.n_mem, eta_row);
  out.h_off_lcb = cp_lower_bound(counts.s_nomem, counts.n_nomem, eta_row);
  out.hazard_gap = out.h_mem_lcb - out.h_off_lcb;
  return out;
}

inline ContextBounds context_lcb(std::span<const Trajectory> trajectories,
                                 const std::string& controller_id, int t,
                                 double eta_row,
                                 const std::optional<std::string>& snapshot_id =
                                     std::nullopt) {
  return context_lcb(step_counts(trajectories, controller_id, t, snapshot_id),
                     eta_row);
}

// Probe survival point rates conditional on the hidden label. Diagnostics
// for reporting; no bound consumes them.
struct ProbeRateDiagnostics {
  std::optional<double> sigma_bad;
  std::optional<double> sigma_good;
};

inline ProbeRateDiagnostics probe_rate_diagnostics(const StepCounts& counts) {
  ProbeRateDiagnostics d;
  if (counts.n_bad > 0) {
    d.sigma_bad = static_cast<double>(counts.f_probe) /
                  static_cast<double>(counts.n_bad);
  }
  if (counts.n_good > 0) {
    d.sigma_good = static_cast<double>(counts.k_good_surv) /
                   static_cast<double>(counts.n_good);
  }
  return d;
}

// UCB-over-LCB contraction ratio of conditional probe survival (bad vs
// good), at caller-chosen levels. Undefined when a denominator is empty or
// the good-rate LCB is zero.
inline std::optional<double> probe_contraction_ratio(const StepCounts& counts,
                                                     double eta_bad,
                                                     double eta_good) {
  if (counts.n_bad == 0 || counts.n_good == 0) return std::nullopt;
  const double bad_ucb = cp_upper_bound(counts.f_probe, counts.n_bad, eta_bad);
  const double good_lcb =
      cp_lower_bound(counts.k_good_surv, counts.n_good, eta_good);
  if (good_lcb <= 0.0) return std::nullopt;
  return bad_ucb / good_lcb;
}

// All bounds for one step, assembled from the counts and per-row levels.
struct StepBounds {
  int t = 0;
  double q_raw_ucb = 1.0;
  double h_lcb = 0.0;       // memory-off partition
  double h_mem_lcb = 0.0;   // memory-on partition
  double rho_probe_ucb = 1.0;
  double b_evid_ucb = 1.0;
  double delta_I_nats = 0.0;
  double I_cum_nats = 0.0;  // channel-accumulated evidence for this step
  double q_mech_ucb = 1.0;
  double q_ctrl_ucb = 1.0;
  double hazard_gap = 0.0;  // diagnostic only
  double label_coverage = 1.0;
  std::optional<double> sigma_bad;   // diagnostic only
  std::optional<double> sigma_good;  // diagnostic only
  bool mechanism_enabled = true;
};

struct ChannelLevels {
  double raw = 0.0;
  double probe = 0.0;
  double evid = 0.0;
};

struct ChannelSwitches {
  bool probe = true;       // manifest HP channel
  bool evidence = true;    // manifest SV/TA channel
  bool mechanism = true;   // false when gate semantics are violated
};

inline StepBounds compute_step_bounds(const StepCounts& counts,
                                      const ChannelLevels& levels,
                                      const ChannelSwitches& switches = {}) {
  StepBounds out;
  out.t = counts.t;
  const RawBounds raw = raw_bounds(counts, levels.raw);
  out.q_raw_ucb = raw.q_raw_ucb;

  const ContextBounds ctx = context_lcb(counts, levels.raw);
  out.h_lcb = ctx.h_off_lcb;
  out.h_mem_lcb = ctx.h_mem_lcb;
  out.hazard_gap = ctx.hazard_gap;

  out.rho_probe_ucb = switches.probe ? probe_ucb(counts, levels.probe) : 1.0;
  if (switches.evidence) {
    const EvidenceBound evid = evidence_ucb(counts, levels.evid);
    out.b_evid_ucb = evid.b_evid_ucb;
    out.delta_I_nats = evid.delta_I_nats;
  }
  out.I_cum_nats = out.delta_I_nats;  // single evidence channel per admission

  out.mechanism_enabled = switches.mechanism;
  const MechanismBounds mech = mechanism_ucb(out.rho_probe_ucb, out.I_cum_nats,
                                             out.q_raw_ucb, switches.mechanism);
  out.q_mech_ucb = mech.q_mech_ucb;
  out.q_ctrl_ucb = mech.q_ctrl_ucb;

  out.label_coverage = counts.label_coverage();
  const ProbeRateDiagnostics rates = probe_rate_diagnostics(counts);
  out.sigma_bad = rates.sigma_bad;
  out.sigma_good = rates.sigma_good;
  return out;
}

// Fraction of trajectories whose first clean success arrives by step t, for
// t = 1..t_max. Non-decreasing in t by construction.
inline std::vector<double> cumulative_acceptance(
    std::span<const Trajectory> trajectories, int t_max) {
  std::vector<double> curve(static_cast<std::size_t>(t_max), 0.0);
  if (trajectories.empty() || t_max <= 0) return curve;
  for (const Trajectory& traj : trajectories) {
    const StoppingTimes times = stopping_times(traj);
    if (!times.tau_success) continue;
    for (int t = *times.tau_success; t <= t_max; ++t) {
      curve[static_cast<std::size_t>(t - 1)] += 1.0;
    }
  }
  for (double& value : curve) {
    value /= static_cast<double>(trajectories.size());
  }
  return curve;
}

}  // namespace stopcert
