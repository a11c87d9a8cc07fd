#pragma once

// Risk-score admission gate calibrated over a finite threshold grid.
//
// For each grid threshold the conditional rejection rate among active
// admissions with score at or below the threshold gets a Clopper-Pearson
// UCB at level delta_gate / (T * |grid| * n_controllers); the calibrated
// threshold is the largest one whose UCB clears the per-step risk budget.
// An empty selection set yields a gate that always rejects.

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "stopcert/binomial.hpp"

namespace stopcert {

// Residual admission-risk score: bad-mass envelope discounted by evidence.
inline double risk_score(double rho, double evidence_nats) {
  if (rho < 0.0 || rho > 1.0) {
    throw std::invalid_argument("risk_score: rho must be in [0,1]");
  }
  if (evidence_nats < 0.0) {
    throw std::invalid_argument("risk_score: evidence must be non-negative");
  }
  return rho * std::exp(-evidence_nats);
}

struct ThresholdGrid {
  int t = 1;
  std::vector<double> thetas;  // strictly increasing, finite, non-empty

  void validate() const {
    if (thetas.empty()) {
      throw std::invalid_argument("threshold grid must be non-empty");
    }
    for (std::size_t i = 1; i < thetas.size(); ++i) {
      if (!(thetas[i - 1] < thetas[i])) {
        throw std::invalid_argument("threshold grid must be strictly increasing");
      }
    }
  }
};

// One calibration row: an active candidate admission with its score and the
// hidden-judge rejection label.
struct GateRow {
  double score = 0.0;
  bool rejected = false;
};

struct ThresholdCell {
  double theta = 0.0;
  std::int64_t n = 0;       // admissions with score <= theta
  std::int64_t f = 0;       // of those, hidden-rejected
  double r_ucb = 1.0;       // Clopper-Pearson UCB on the conditional rate
};

inline constexpr double kGateAlwaysReject =
    -std::numeric_limits<double>::infinity();

struct GateDecision {
  int t = 1;
  double theta_hat = kGateAlwaysReject;  // -inf: gate identically rejects
  double alpha_t = 0.0;
  std::vector<ThresholdCell> per_theta;

  bool always_rejects() const { return std::isinf(theta_hat) && theta_hat < 0; }
};

// Calibrates the admission threshold on labeled scored rows. The per-theta
// level divides delta_gate by T * |grid| and, under manifest-class
// calibration, by the class cardinality.
inline GateDecision calibrate_gate(const std::vector<GateRow>& rows,
                                   const ThresholdGrid& grid, double alpha_t,
                                   double delta_gate, int horizon,
                                   int n_controllers = 1) {
  grid.validate();
  if (horizon < 1 || n_controllers < 1) {
    throw std::invalid_argument("calibrate_gate: horizon and class size >= 1");
  }
  const double level =
      delta_gate / (static_cast<double>(horizon) *
                    static_cast<double>(grid.thetas.size()) *
                    static_cast<double>(n_controllers));

  GateDecision decision;
  decision.t = grid.t;
  decision.alpha_t = alpha_t;
  for (double theta : grid.thetas) {
    ThresholdCell cell;
    cell.theta = theta;
    for (const GateRow& row : rows) {
      if (row.score <= theta) {
        cell.n += 1;
        if (row.rejected) cell.f += 1;
      }
    }
    cell.r_ucb = level > 0.0 ? cp_upper_bound(cell.f, cell.n, level) : 1.0;
    decision.per_theta.push_back(cell);
  }
  for (const ThresholdCell& cell : decision.per_theta) {
    if (cell.r_ucb <= alpha_t) decision.theta_hat = cell.theta;
  }
  return decision;
}

// The calibrated gate: admit iff a threshold was selected and the score is
// at or below it (closed comparison).
inline bool apply_gate(double score, double theta_hat) {
  return !(std::isinf(theta_hat) && theta_hat < 0) && score <= theta_hat;
}

}  // namespace stopcert
