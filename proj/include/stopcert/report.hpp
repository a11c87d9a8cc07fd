#pragma once

// Report rendering: one machine-readable record form (JSON) and one
// human-readable table per surface. The machine form is the contract; the
// tables mirror the published layouts (certificate summary, cumulative
// acceptance with on/off-memory deltas, confusion metrics, DEA scores).

#include <algorithm>
#include <cstdio>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "stopcert/certificate.hpp"
#include "stopcert/consensus.hpp"
#include "stopcert/dea.hpp"
#include "stopcert/simulator.hpp"

namespace stopcert {

namespace detail {

inline std::string fixed(double value, int digits) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.*f", digits, value);
  return buffer;
}

inline std::string percent(double value, int digits = 1) {
  return fixed(100.0 * value, digits) + "%";
}

inline std::string opt_percent(const std::optional<double>& value,
                               int digits = 1) {
  return value ? percent(*value, digits) : std::string("undefined");
}

}  // namespace detail

inline nlohmann::ordered_json to_json(const StepBounds& bounds) {
  nlohmann::ordered_json j;
  j["t"] = bounds.t;
  j["q_raw_ucb"] = bounds.q_raw_ucb;
  j["h_lcb"] = bounds.h_lcb;
  j["h_mem_lcb"] = bounds.h_mem_lcb;
  j["rho_probe_ucb"] = bounds.rho_probe_ucb;
  j["b_evid_ucb"] = bounds.b_evid_ucb;
  j["delta_I_nats"] = bounds.delta_I_nats;
  j["I_cum_nats"] = bounds.I_cum_nats;
  j["q_mech_ucb"] = bounds.q_mech_ucb;
  j["q_ctrl_ucb"] = bounds.q_ctrl_ucb;
  j["hazard_gap_diagnostic"] = bounds.hazard_gap;  // non-certifying
  j["label_coverage"] = bounds.label_coverage;
  if (bounds.sigma_bad) j["sigma_bad_diagnostic"] = *bounds.sigma_bad;
  if (bounds.sigma_good) j["sigma_good_diagnostic"] = *bounds.sigma_good;
  j["mechanism_enabled"] = bounds.mechanism_enabled;
  return j;
}

inline nlohmann::ordered_json to_json(const CertificateReport& report) {
  nlohmann::ordered_json j;
  j["controller_id"] = report.controller_id;
  j["prod_no_false"] = report.prod_no_false;
  j["prod_still_active"] = report.prod_still_active;
  j["c_t_ctrl"] = report.c_t_ctrl;
  j["c_t_raw"] = report.c_t_raw;
  j["selected"] = report.selected;
  j["mechanism_disabled"] = report.mechanism_disabled;
  j["no_data"] = report.no_data;
  j["steps"] = nlohmann::ordered_json::array();
  for (const StepBounds& bounds : report.steps) {
    j["steps"].push_back(to_json(bounds));
  }
  if (!report.gate_audit.empty()) {
    j["gate_audit"] = nlohmann::ordered_json::array();
    for (const GateDecision& decision : report.gate_audit) {
      nlohmann::ordered_json g;
      g["t"] = decision.t;
      g["alpha_t"] = decision.alpha_t;
      g["theta_hat"] = decision.always_rejects()
                           ? nlohmann::ordered_json(nullptr)
                           : nlohmann::ordered_json(decision.theta_hat);
      g["per_theta"] = nlohmann::ordered_json::array();
      for (const ThresholdCell& cell : decision.per_theta) {
        g["per_theta"].push_back({{"theta", cell.theta},
                                  {"n", cell.n},
                                  {"f", cell.f},
                                  {"r_ucb", cell.r_ucb}});
      }
      j["gate_audit"].push_back(g);
    }
  }
  return j;
}

inline nlohmann::ordered_json to_json(const BudgetAllocation& budget) {
  nlohmann::ordered_json j;
  j["delta"] = budget.delta;
  j["delta_raw"] = budget.split.raw;
  j["delta_gate"] = budget.split.gate;
  j["delta_probe"] = budget.split.probe;
  j["delta_evid"] = budget.split.evid;
  j["horizon"] = budget.horizon;
  j["n_controllers"] = budget.n_controllers;
  j["j_max"] = budget.j_max;
  j["raw_row_level"] = budget.raw_row_level;
  j["probe_row_level"] = budget.probe_row_level;
  j["evid_row_level"] = budget.evid_row_level;
  j["gate_row_levels"] = budget.gate_row_levels;
  return j;
}

// Certificate summary in the published column layout: the two products,
// the controller certificate, and the raw-only certificate per controller.
inline std::string render_certificate_table(const SelectionResult& selection) {
  std::ostringstream out;
  out << "controller            prod(1-q)   prod(1-h)   C_T^ctrl    C_T^raw\n";
  for (const CertificateReport& report : selection.reports) {
    char line[160];
    std::snprintf(line, sizeof(line), "%-20s  %9s  %9s  %9s  %9s%s%s\n",
                  report.controller_id.c_str(),
                  detail::percent(report.prod_no_false).c_str(),
                  detail::percent(report.prod_still_active).c_str(),
                  detail::percent(report.c_t_ctrl).c_str(),
                  detail::percent(report.c_t_raw).c_str(),
                  report.selected ? "  <- selected" : "",
                  report.no_data ? "  [no data]" : "");
    out << line;
  }
  return out.str();
}

// Cumulative acceptance layout: per-step rates with and without the frozen
// snapshot and their deltas.
inline std::string render_acceptance_table(std::span<const double> with_memory,
                                           std::span<const double> without_memory) {
  std::ostringstream out;
  const std::size_t t_max = std::min(with_memory.size(), without_memory.size());
  out << "step            ";
  for (std::size_t t = 1; t <= t_max; ++t) out << "  t=" << t << "     ";
  out << "\nw/   snapshot   ";
  for (std::size_t t = 0; t < t_max; ++t) {
    out << "  " << detail::percent(with_memory[t]);
  }
  out << "\nw/o  snapshot   ";
  for (std::size_t t = 0; t < t_max; ++t) {
    out << "  " << detail::percent(without_memory[t]);
  }
  out << "\ndelta           ";
  for (std::size_t t = 0; t < t_max; ++t) {
    const double delta = with_memory[t] - without_memory[t];
    out << "  " << (delta >= 0 ? "+" : "") << detail::fixed(100.0 * delta, 1)
        << "pp";
  }
  out << '\n';
  return out.str();
}

inline std::string render_confusion_csv(const ConfusionMetrics& m) {
  std::ostringstream out;
  out << "metric,value\n";
  out << "tp," << m.tp << "\nfn," << m.fn << "\nfp," << m.fp << "\ntn," << m.tn
      << "\n";
  auto emit = [&out](const char* name, const std::optional<double>& value) {
    out << name << ',' << (value ? detail::fixed(*value, 6) : "undefined")
        << '\n';
  };
  emit("accuracy", m.accuracy);
  emit("precision", m.precision);
  emit("recall", m.recall);
  emit("f1", m.f1);
  emit("specificity", m.specificity);
  emit("false_positive_rate", m.false_positive_rate);
  emit("false_negative_rate", m.false_negative_rate);
  emit("post_survival_bug_rate", m.post_survival_bug_rate);
  return out.str();
}

inline std::string render_detection_csv(std::span<const DetectionPoint> curve) {
  std::ostringstream out;
  out << "k,mean,sd\n";
  for (const DetectionPoint& point : curve) {
    out << point.k << ',' << detail::fixed(point.mean, 6) << ','
        << detail::fixed(point.standard_deviation, 6) << '\n';
  }
  return out.str();
}

inline std::string render_dea_csv(const std::vector<Dmu>& dmus,
                                  const std::vector<BccResult>& results) {
  std::ostringstream out;
  out << "name,cost,accuracy,theta,frontier,lambda,x_star\n";
  for (std::size_t i = 0; i < dmus.size(); ++i) {
    const BccResult& r = results[i];
    out << dmus[i].name << ',' << detail::fixed(dmus[i].cost, 9) << ','
        << detail::fixed(dmus[i].accuracy, 4) << ',';
    out << (r.theta ? detail::fixed(*r.theta, 6) : "infeasible") << ',';
    out << (r.status == BccStatus::Efficient ? "yes" : "no") << ',';
    out << (r.lambda ? detail::fixed(*r.lambda, 7) : "") << ',';
    out << (r.x_star ? detail::fixed(*r.x_star, 9) : "") << '\n';
  }
  return out.str();
}

inline nlohmann::ordered_json to_json(const CoverageSummary& summary) {
  nlohmann::ordered_json j;
  j["replications"] = summary.replications;
  j["channels"] = nlohmann::ordered_json::array();
  auto channel_json = [](const ChannelCoverage& c) {
    nlohmann::ordered_json e;
    e["channel"] = c.channel;
    e["violations"] = c.violations;
    e["frequency"] = c.frequency;
    e["mc_standard_error"] = c.mc_standard_error;
    e["allowed_level"] = c.allowed_level;
    e["pass"] = c.pass;
    return e;
  };
  for (const ChannelCoverage& c : summary.channels) {
    j["channels"].push_back(channel_json(c));
  }
  j["certificate"] = channel_json(summary.certificate);
  j["decomposition_failures"] = summary.decomposition_failures;
  j["positive_selected_certificates"] = summary.positive_selected_certificates;
  j["mean_selected_certificate"] = summary.mean_selected_certificate;
  return j;
}

inline std::string render_coverage_table(const CoverageSummary& summary) {
  std::ostringstream out;
  out << "channel           violations  frequency   allowed+3se  verdict\n";
  auto row = [&out](const ChannelCoverage& c) {
    char line[160];
    std::snprintf(line, sizeof(line), "%-16s  %10lld  %9s  %10s  %s\n",
                  c.channel.c_str(), static_cast<long long>(c.violations),
                  detail::fixed(c.frequency, 5).c_str(),
                  detail::fixed(c.allowed_level + 3.0 * c.mc_standard_error, 5)
                      .c_str(),
                  c.pass ? "pass" : "FAIL");
    out << line;
  };
  for (const ChannelCoverage& c : summary.channels) row(c);
  row(summary.certificate);
  out << "decomposition identity failures: " << summary.decomposition_failures
      << '\n';
  out << "positive selected certificates: "
      << summary.positive_selected_certificates << " / "
      << summary.replications
      << " (mean C = " << detail::fixed(summary.mean_selected_certificate, 4)
      << ")\n";
  return out.str();
}

}  // namespace stopcert
