#pragma once

// Ground-truth stopped-process generator with exactly computable event
// probabilities, plus the Monte Carlo coverage experiments that validate the
// calibration pipeline against it.
//
// Each active step factorizes as bad-draw -> probe -> evidence -> gate ->
// adjudication, mirroring the chain-rule decomposition the mechanism bound
// relies on, so every channel's true rate is available in closed form:
//   q_t = rho_t * probe_surv_bad_t * evid_surv_bad_t * gate_admit_bad_t
//   h_t = (1-rho_t) * probe_surv_good_t * evid_surv_good_t * gate_admit_good_t
// The default gate admits exactly the candidates that survived both screens
// (admit probabilities 1), which guarantees the gate-semantics containment
// on every generated row; admit probabilities below 1 realize a
// score-threshold gate as an extra admission stage.
//
// Randomness: per-trajectory substreams are derived from the master seed by
// index (rng.hpp), so datasets are reproducible bit-for-bit and independent
// of evaluation order or worker count.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <iterator>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "stopcert/certificate.hpp"
#include "stopcert/rng.hpp"
#include "stopcert/trace.hpp"

namespace stopcert {

struct GroundTruthProcess {
  int horizon = 1;
  std::vector<double> bad_prior;        // rho_t
  std::vector<double> probe_surv_bad;   // sigma_t^bad
  std::vector<double> probe_surv_good;  // sigma_t^good
  std::vector<double> evid_surv_bad;
  std::vector<double> evid_surv_good;
  std::vector<double> gate_admit_bad;   // default 1: pass iff survived both
  std::vector<double> gate_admit_good;
  bool probe_enabled = true;
  bool evid_enabled = true;
  std::optional<std::string> memory_snapshot_id;  // stamped on generated rows

  double at(const std::vector<double>& values, int t, double fallback) const {
    if (values.empty()) return fallback;
    if (values.size() == 1) return values.front();
    return values[static_cast<std::size_t>(t) - 1];
  }

  void validate() const {
    if (horizon < 1) throw std::invalid_argument("process horizon must be >= 1");
    auto check = [this](const std::vector<double>& values, const char* name) {
      if (!values.empty() && values.size() != 1 &&
          static_cast<int>(values.size()) != horizon) {
        throw std::invalid_argument(std::string("process parameter ") + name +
                                    " must have size 1 or T");
      }
      for (double v : values) {
        if (!(v >= 0.0 && v <= 1.0)) {
          throw std::invalid_argument(std::string("process parameter ") + name +
                                      " out of [0,1]");
        }
      }
    };
    check(bad_prior, "bad_prior");
    check(probe_surv_bad, "probe_surv_bad");
    check(probe_surv_good, "probe_surv_good");
    check(evid_surv_bad, "evid_surv_bad");
    check(evid_surv_good, "evid_surv_good");
    check(gate_admit_bad, "gate_admit_bad");
    check(gate_admit_good, "gate_admit_good");
  }
};

struct StepHazards {
  double q = 0.0;  // false-admission hazard given active
  double h = 0.0;  // clean-success hazard given active
};

inline StepHazards step_hazards(const GroundTruthProcess& process, int t) {
  if (t < 1 || t > process.horizon) {
    throw std::invalid_argument("step_hazards: step out of horizon");
  }
  const double rho = process.at(process.bad_prior, t, 0.0);
  const double sb = process.probe_enabled
                        ? process.at(process.probe_surv_bad, t, 1.0)
                        : 1.0;
  const double sg = process.probe_enabled
                        ? process.at(process.probe_surv_good, t, 1.0)
                        : 1.0;
  const double eb =
      process.evid_enabled ? process.at(process.evid_surv_bad, t, 1.0) : 1.0;
  const double eg =
      process.evid_enabled ? process.at(process.evid_surv_good, t, 1.0) : 1.0;
  const double gb = process.at(process.gate_admit_bad, t, 1.0);
  const double gg = process.at(process.gate_admit_good, t, 1.0);
  return {rho * sb * eb * gb, (1.0 - rho) * sg * eg * gg};
}

// True per-step channel rates used by the coverage checks.
struct StepTruth {
  double q = 0.0;
  double h = 0.0;
  double bad_and_probe_survive = 0.0;  // Pr(B and W_probe | A)
  double evid_surv_given_bad = 0.0;    // Pr(W_evid | B, W_probe, A)
};

inline StepTruth step_truth(const GroundTruthProcess& process, int t) {
  const StepHazards hz = step_hazards(process, t);
  StepTruth truth;
  truth.q = hz.q;
  truth.h = hz.h;
  const double rho = process.at(process.bad_prior, t, 0.0);
  const double sb =
      process.probe_enabled ? process.at(process.probe_surv_bad, t, 1.0) : 1.0;
  truth.bad_and_probe_survive = rho * sb;
  truth.evid_surv_given_bad =
      process.evid_enabled ? process.at(process.evid_surv_bad, t, 1.0) : 1.0;
  return truth;
}

struct ExactEventProbabilities {
  std::vector<double> q;  // per step
  std::vector<double> h;
  double p_false_free = 0.0;     // Pr(tau_F > T)
  double p_still_active = 0.0;   // Pr(A_{T+1})
  double p_clean_before_false = 0.0;
};

// Forward recursion over the active mass; the disjoint identity
// Pr(clean-before-false) = Pr(tau_F > T) - Pr(A_{T+1}) holds exactly.
inline ExactEventProbabilities exact_probabilities(
    const GroundTruthProcess& process) {
  process.validate();
  ExactEventProbabilities out;
  double active_mass = 1.0;
  double clean = 0.0;
  for (int t = 1; t <= process.horizon; ++t) {
    const StepHazards hz = step_hazards(process, t);
    if (hz.q + hz.h > 1.0 + 1e-15) {
      throw std::invalid_argument("invalid process: q_t + h_t exceeds 1");
    }
    out.q.push_back(hz.q);
    out.h.push_back(hz.h);
    clean += active_mass * hz.h;
    active_mass *= 1.0 - hz.q - hz.h;
  }
  out.p_still_active = active_mass;
  out.p_clean_before_false = clean;
  out.p_false_free = clean + active_mass;
  return out;
}

// Simulates one trajectory from its own substream. Rows are emitted while
// active; the log ends at the stopping step or the horizon.
inline Trajectory simulate_trajectory(const GroundTruthProcess& process,
                                      const std::string& problem_id,
                                      const std::string& controller_id,
                                      SplitMix64& rng) {
  Trajectory traj;
  traj.problem_id = problem_id;
  traj.controller_id = controller_id;
  traj.horizon = process.horizon;
  for (int t = 1; t <= process.horizon; ++t) {
    StepRecord row;
    row.problem_id = problem_id;
    row.controller_id = controller_id;
    row.t = t;
    row.active = true;
    row.write_mode = WriteMode::AuditOnly;
    row.memory_snapshot_id = process.memory_snapshot_id;

    const bool bad = rng.bernoulli(process.at(process.bad_prior, t, 0.0));
    row.hidden_bad = bad;

    bool survived = true;
    if (process.probe_enabled) {
      row.probe_invoked = true;
      const double p = bad ? process.at(process.probe_surv_bad, t, 1.0)
                           : process.at(process.probe_surv_good, t, 1.0);
      row.probe_survived = rng.bernoulli(p);
      survived = row.probe_survived;
    }
    if (survived && process.evid_enabled) {
      row.evid_invoked = true;
      const double p = bad ? process.at(process.evid_surv_bad, t, 1.0)
                           : process.at(process.evid_surv_good, t, 1.0);
      row.evid_survived = rng.bernoulli(p);
      survived = row.evid_survived;
    }
    if (survived) {
      const double admit = bad ? process.at(process.gate_admit_bad, t, 1.0)
                               : process.at(process.gate_admit_good, t, 1.0);
      row.gate = rng.bernoulli(admit);
    }
    if (row.gate) {
      row.false_admission = bad;
      row.success = !bad;
    }
    const bool stopped = row.success || row.false_admission;
    traj.steps.push_back(std::move(row));
    if (stopped) break;
  }
  return traj;
}

inline std::vector<Trajectory> simulate_dataset(
    const GroundTruthProcess& process, int n_problems, std::uint64_t master_seed,
    const std::string& controller_id = "sim") {
  process.validate();
  if (n_problems < 1) {
    throw std::invalid_argument("simulate_dataset: n_problems must be >= 1");
  }
  std::vector<Trajectory> dataset;
  dataset.reserve(static_cast<std::size_t>(n_problems));
  for (int i = 0; i < n_problems; ++i) {
    SplitMix64 rng(derive_stream_seed(master_seed, static_cast<std::uint64_t>(i)));
    char buffer[24];
    std::snprintf(buffer, sizeof(buffer), "p%06d", i + 1);
    dataset.push_back(simulate_trajectory(process, buffer, controller_id, rng));
  }
  return dataset;
}

// ---------------------------------------------------------------------------
// Coverage experiment: repeatedly calibrate and select on fresh synthetic
// datasets, counting bound violations against the exact truths.
// ---------------------------------------------------------------------------

struct ControllerTruth {
  ControllerManifest manifest;
  GroundTruthProcess process;
};

struct ChannelCoverage {
  std::string channel;
  std::int64_t violations = 0;
  double frequency = 0.0;
  double mc_standard_error = 0.0;
  double allowed_level = 0.0;  // summed per-row allocation for the channel
  bool pass = false;
};

struct CoverageSummary {
  std::int64_t replications = 0;
  std::vector<ChannelCoverage> channels;
  ChannelCoverage certificate;  // selected-controller certificate violations
  std::int64_t decomposition_failures = 0;  // disjoint-identity breaks
  std::int64_t positive_selected_certificates = 0;  // replications with C > 0
  double mean_selected_certificate = 0.0;
};

namespace detail {

inline ChannelCoverage finalize_channel(std::string name, std::int64_t hits,
                                        std::int64_t reps, double allowed) {
  ChannelCoverage c;
  c.channel = std::move(name);
  c.violations = hits;
  c.frequency = static_cast<double>(hits) / static_cast<double>(reps);
  c.mc_standard_error = std::sqrt(c.frequency * (1.0 - c.frequency) /
                                  static_cast<double>(reps));
  c.allowed_level = allowed;
  c.pass = c.frequency <= allowed + 3.0 * c.mc_standard_error;
  return c;
}

}  // namespace detail

inline CoverageSummary coverage_experiment(
    const std::vector<ControllerTruth>& truths, int n_cal, int replications,
    const BudgetAllocation& budget, std::uint64_t master_seed) {
  if (truths.empty()) throw std::invalid_argument("coverage: empty class");
  if (n_cal < 0) throw std::invalid_argument("coverage: n_cal must be >= 0");
  if (replications < 1) throw std::invalid_argument("coverage: replications >= 1");
  if (budget.n_controllers != static_cast<int>(truths.size())) {
    throw std::invalid_argument("coverage: budget sized for a different class");
  }

  ManifestClass manifest_class;
  std::vector<ExactEventProbabilities> exact;
  std::vector<std::vector<StepTruth>> channel_truth;
  for (const ControllerTruth& entry : truths) {
    entry.process.validate();
    entry.manifest.validate();
    manifest_class.controllers.push_back(entry.manifest);
    exact.push_back(exact_probabilities(entry.process));
    std::vector<StepTruth> per_step;
    for (int t = 1; t <= entry.process.horizon; ++t) {
      per_step.push_back(step_truth(entry.process, t));
    }
    channel_truth.push_back(std::move(per_step));
  }

  std::int64_t raw_q_hits = 0, raw_h_hits = 0, probe_hits = 0, evid_hits = 0;
  std::int64_t cert_hits = 0;
  std::int64_t decomposition_failures = 0;
  std::int64_t positive_certificates = 0;
  double certificate_sum = 0.0;

  for (int rep = 0; rep < replications; ++rep) {
    const std::uint64_t rep_seed =
        derive_stream_seed(master_seed, static_cast<std::uint64_t>(rep));

    CalibrationInput input;
    for (std::size_t c = 0; c < truths.size(); ++c) {
      if (n_cal == 0) continue;  // empty calibration: conservative bounds
      auto dataset = simulate_dataset(
          truths[c].process, n_cal, derive_stream_seed(rep_seed, c),
          truths[c].manifest.id);
      // disjoint identity: #(tau_F > T) = #(clean) + #(still active)
      std::int64_t clean = 0, still_active = 0, false_free = 0;
      for (const Trajectory& traj : dataset) {
        const TrajectoryOutcome outcome = classify_outcome(traj);
        if (outcome != TrajectoryOutcome::FalseByHorizon) false_free += 1;
        if (outcome == TrajectoryOutcome::CleanBeforeFalse) clean += 1;
        if (outcome == TrajectoryOutcome::StillActive) still_active += 1;
      }
      if (false_free != clean + still_active) decomposition_failures += 1;
      input.trajectories.insert(input.trajectories.end(),
                                std::make_move_iterator(dataset.begin()),
                                std::make_move_iterator(dataset.end()));
    }

    const SelectionResult selection =
        select_controller(manifest_class, input, budget);

    bool rep_raw_q = false, rep_raw_h = false, rep_probe = false,
         rep_evid = false;
    for (std::size_t c = 0; c < truths.size(); ++c) {
      const CertificateReport& report = selection.reports[c];
      const ControllerManifest& manifest = truths[c].manifest;
      for (int t = 1; t <= manifest.horizon; ++t) {
        const StepBounds& bounds = report.steps[static_cast<std::size_t>(t - 1)];
        const StepTruth& truth = channel_truth[c][static_cast<std::size_t>(t - 1)];
        if (bounds.q_raw_ucb < truth.q) rep_raw_q = true;
        if (manifest.memory_snapshot_id) {
          if (bounds.h_mem_lcb > truth.h) rep_raw_h = true;
        } else {
          if (bounds.h_lcb > truth.h) rep_raw_h = true;
        }
        if (manifest.channels.hp &&
            bounds.rho_probe_ucb < truth.bad_and_probe_survive) {
          rep_probe = true;
        }
        if (manifest.channels.ta &&
            bounds.b_evid_ucb < truth.evid_surv_given_bad) {
          rep_evid = true;
        }
      }
      if (report.selected) {
        certificate_sum += report.c_t_ctrl;
        if (report.c_t_ctrl > 0.0) positive_certificates += 1;
        if (report.c_t_ctrl > exact[c].p_clean_before_false + 1e-12) {
          cert_hits += 1;
        }
      }
    }
    raw_q_hits += rep_raw_q ? 1 : 0;
    raw_h_hits += rep_raw_h ? 1 : 0;
    probe_hits += rep_probe ? 1 : 0;
    evid_hits += rep_evid ? 1 : 0;
  }

  CoverageSummary summary;
  summary.replications = replications;
  summary.channels.push_back(detail::finalize_channel(
      "raw_false_ucb", raw_q_hits, replications, budget.split.raw / 2.0));
  summary.channels.push_back(detail::finalize_channel(
      "raw_clean_lcb", raw_h_hits, replications, budget.split.raw / 2.0));
  summary.channels.push_back(detail::finalize_channel(
      "probe_ucb", probe_hits, replications, budget.split.probe));
  summary.channels.push_back(detail::finalize_channel(
      "evidence_ucb", evid_hits, replications, budget.split.evid));
  summary.certificate = detail::finalize_channel(
      "certificate", cert_hits, replications, budget.delta);
  summary.decomposition_failures = decomposition_failures;
  summary.positive_selected_certificates = positive_certificates;
  summary.mean_selected_certificate =
      certificate_sum / static_cast<double>(replications);
  return summary;
}

// ---------------------------------------------------------------------------
// Gate coverage experiment: the threshold-grid guarantee against a known
// score model.
// ---------------------------------------------------------------------------

// Scores take finitely many values (the grid points); each value carries a
// sampling weight and a true conditional rejection rate.
struct GateTruthModel {
  std::vector<double> score_values;  // strictly increasing
  std::vector<double> weights;      // positive, summing to anything
  std::vector<double> reject_rates; // Pr(reject | score == value)

  void validate() const {
    if (score_values.empty() || score_values.size() != weights.size() ||
        score_values.size() != reject_rates.size()) {
      throw std::invalid_argument("gate truth model: mismatched sizes");
    }
    for (std::size_t i = 1; i < score_values.size(); ++i) {
      if (!(score_values[i - 1] < score_values[i])) {
        throw std::invalid_argument("gate truth model: scores must increase");
      }
    }
  }
};

// Exact Pr(reject | score <= theta_i) per grid point.
inline std::vector<double> bucket_rejection_rates(const GateTruthModel& model) {
  model.validate();
  std::vector<double> rates;
  double mass = 0.0;
  double reject_mass = 0.0;
  for (std::size_t i = 0; i < model.score_values.size(); ++i) {
    mass += model.weights[i];
    reject_mass += model.weights[i] * model.reject_rates[i];
    rates.push_back(reject_mass / mass);
  }
  return rates;
}

struct GateCoverageSummary {
  std::int64_t replications = 0;
  std::int64_t violations = 0;       // theta selected with true rate > alpha
  std::int64_t empty_selections = 0; // gate forced to always-reject
  double frequency = 0.0;
  double mc_standard_error = 0.0;
  double allowed_level = 0.0;  // delta_gate
  bool pass = false;
};

inline GateCoverageSummary gate_coverage_experiment(
    const GateTruthModel& model, double alpha, double delta_gate, int n_rows,
    int replications, std::uint64_t master_seed) {
  model.validate();
  if (n_rows < 1 || replications < 1) {
    throw std::invalid_argument("gate experiment: sizes must be >= 1");
  }
  const std::vector<double> true_bucket = bucket_rejection_rates(model);
  ThresholdGrid grid{1, model.score_values};

  double weight_sum = 0.0;
  for (double w : model.weights) weight_sum += w;

  GateCoverageSummary summary;
  summary.replications = replications;
  summary.allowed_level = delta_gate;
  for (int rep = 0; rep < replications; ++rep) {
    SplitMix64 rng(derive_stream_seed(master_seed, static_cast<std::uint64_t>(rep)));
    std::vector<GateRow> rows;
    rows.reserve(static_cast<std::size_t>(n_rows));
    for (int i = 0; i < n_rows; ++i) {
      double u = rng.next_unit() * weight_sum;
      std::size_t idx = 0;
      while (idx + 1 < model.weights.size() && u >= model.weights[idx]) {
        u -= model.weights[idx];
        ++idx;
      }
      rows.push_back({model.score_values[idx],
                      rng.bernoulli(model.reject_rates[idx])});
    }
    const GateDecision decision =
        calibrate_gate(rows, grid, alpha, delta_gate, /*horizon=*/1);
    if (decision.always_rejects()) {
      summary.empty_selections += 1;
      continue;
    }
    for (std::size_t i = 0; i < model.score_values.size(); ++i) {
      if (model.score_values[i] == decision.theta_hat &&
          true_bucket[i] > alpha) {
        summary.violations += 1;
        break;
      }
    }
  }
  summary.frequency = static_cast<double>(summary.violations) /
                      static_cast<double>(replications);
  summary.mc_standard_error =
      std::sqrt(summary.frequency * (1.0 - summary.frequency) /
                static_cast<double>(replications));
  summary.pass =
      summary.frequency <= delta_gate + 3.0 * summary.mc_standard_error;
  return summary;
}

}  // namespace stopcert
