#pragma once

// Deterministic consensus labeling and suite evaluation for augmented tests,
// plus the associated diagnostics (confusion metrics, sampled bug-detection
// curve, generation/rescue rates).
//
// Outputs are normalized before voting: trailing newlines are stripped and
// each line loses trailing whitespace (judge-style comparison); a token-wise
// mode collapses all whitespace runs instead. Execution of solvers is out of
// scope here -- vote sets arrive as pre-computed output strings.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "stopcert/rng.hpp"

namespace stopcert {

enum class OutputNormalization { LineTrimmed, TokenWise };

inline std::string normalize_output(std::string_view raw,
                                    OutputNormalization mode) {
  if (mode == OutputNormalization::TokenWise) {
    std::string out;
    bool in_token = false;
    for (char c : raw) {
      const bool ws = c == ' ' || c == '\t' || c == '\r' || c == '\n';
      if (ws) {
        in_token = false;
      } else {
        if (!in_token && !out.empty()) out.push_back(' ');
        out.push_back(c);
        in_token = true;
      }
    }
    return out;
  }
  std::string out;
  std::string line;
  auto flush_line = [&out, &line]() {
    while (!line.empty() && (line.back() == ' ' || line.back() == '\t' ||
                             line.back() == '\r')) {
      line.pop_back();
    }
    out += line;
    line.clear();
  };
  for (char c : raw) {
    if (c == '\n') {
      flush_line();
      out.push_back('\n');
    } else {
      line.push_back(c);
    }
  }
  flush_line();
  while (!out.empty() && out.back() == '\n') out.pop_back();
  return out;
}

struct VoteSet {
  std::string input_id;
  std::vector<std::string> outputs;  // one per brute-force sample

  std::size_t vote_count() const { return outputs.size(); }
};

struct ConsensusLabel {
  std::optional<std::string> output;  // normalized consensus value
  bool threshold_exceeds_votes = false;  // configuration warning
};

// Majority vote: the unique normalized value reaching the threshold, if any.
// With threshold > m/2 at most one value can qualify; with a permissive
// threshold, a non-unique qualifier still yields no label.
inline ConsensusLabel consensus_label(
    const VoteSet& votes, std::int64_t threshold,
    OutputNormalization mode = OutputNormalization::LineTrimmed) {
  if (votes.outputs.empty()) {
    throw std::invalid_argument("consensus_label: vote set must be non-empty");
  }
  ConsensusLabel result;
  if (threshold > static_cast<std::int64_t>(votes.outputs.size())) {
    result.threshold_exceeds_votes = true;
    return result;
  }
  std::map<std::string, std::int64_t> tally;
  for (const std::string& raw : votes.outputs) {
    tally[normalize_output(raw, mode)] += 1;
  }
  const std::string* winner = nullptr;
  for (const auto& [value, count] : tally) {
    if (count >= threshold) {
      if (winner) return result;  // not unique
      winner = &value;
    }
  }
  if (winner) result.output = *winner;
  return result;
}

struct SuiteCase {
  std::string input_id;
  std::string consensus_output;  // normalized
};

struct AugmentedSuite {
  std::string problem_id;
  std::vector<SuiteCase> cases;
  std::int64_t cap = 0;
  int retries_used = 0;

  bool empty() const { return cases.empty(); }
};

// Retains consensus-labeled inputs in input order, up to the cap. The cap is
// an upper bound; nothing is resampled to fill it.
inline AugmentedSuite build_suite(
    const std::string& problem_id, const std::vector<VoteSet>& candidate_inputs,
    std::int64_t cap, std::int64_t threshold,
    OutputNormalization mode = OutputNormalization::LineTrimmed,
    int retries_used = 0) {
  if (cap < 0) throw std::invalid_argument("build_suite: cap must be >= 0");
  AugmentedSuite suite;
  suite.problem_id = problem_id;
  suite.cap = cap;
  suite.retries_used = retries_used;
  for (const VoteSet& votes : candidate_inputs) {
    if (static_cast<std::int64_t>(suite.cases.size()) >= cap) break;
    const ConsensusLabel label = consensus_label(votes, threshold, mode);
    if (label.output) {
      suite.cases.push_back({votes.input_id, *label.output});
    }
  }
  return suite;
}

struct SurvivalResult {
  bool survived = false;
  bool uninformative = false;  // empty suite: maps to the factor-1 fallback
};

// All-pass event over the suite. A missing candidate output fails the case;
// an empty suite survives but is flagged uninformative.
inline SurvivalResult evaluate_candidate(
    const std::map<std::string, std::string>& candidate_outputs,
    const AugmentedSuite& suite,
    OutputNormalization mode = OutputNormalization::LineTrimmed) {
  if (suite.empty()) return {true, true};
  for (const SuiteCase& test : suite.cases) {
    const auto it = candidate_outputs.find(test.input_id);
    if (it == candidate_outputs.end()) return {false, false};
    if (normalize_output(it->second, mode) != test.consensus_output) {
      return {false, false};
    }
  }
  return {true, false};
}

// Confusion-matrix diagnostics. Undefined ratios (zero denominators) stay
// undefined rather than collapsing to 0.
struct ConfusionMetrics {
  std::int64_t tp = 0, fn = 0, fp = 0, tn = 0;
  std::optional<double> accuracy;
  std::optional<double> precision;
  std::optional<double> recall;
  std::optional<double> f1;
  std::optional<double> specificity;
  std::optional<double> false_positive_rate;
  std::optional<double> false_negative_rate;
  std::optional<double> post_survival_bug_rate;  // fn / (fn + tn)
};

inline ConfusionMetrics confusion_metrics(std::int64_t tp, std::int64_t fn,
                                          std::int64_t fp, std::int64_t tn) {
  if (tp < 0 || fn < 0 || fp < 0 || tn < 0) {
    throw std::invalid_argument("confusion_metrics: counts must be >= 0");
  }
  const std::int64_t total = tp + fn + fp + tn;
  if (total == 0) {
    throw std::invalid_argument("confusion_metrics: all counts are zero");
  }
  auto ratio = [](std::int64_t num,
                  std::int64_t den) -> std::optional<double> {
    if (den == 0) return std::nullopt;
    return static_cast<double>(num) / static_cast<double>(den);
  };
  ConfusionMetrics m;
  m.tp = tp;
  m.fn = fn;
  m.fp = fp;
  m.tn = tn;
  m.accuracy = ratio(tp + tn, total);
  m.precision = ratio(tp, tp + fp);
  m.recall = ratio(tp, tp + fn);
  if (m.precision && m.recall && *m.precision + *m.recall > 0.0) {
    m.f1 = 2.0 * *m.precision * *m.recall / (*m.precision + *m.recall);
  }
  m.specificity = ratio(tn, tn + fp);
  m.false_positive_rate = ratio(fp, fp + tn);
  m.false_negative_rate = ratio(fn, fn + tp);
  m.post_survival_bug_rate = ratio(fn, fn + tn);
  return m;
}

struct DetectionPoint {
  int k = 0;
  double mean = 0.0;
  double standard_deviation = 0.0;
};

// Bug-detection rate when sampling k suite tests per problem without
// replacement, averaged across problems, with mean and standard deviation
// over seeded replications.
inline std::vector<DetectionPoint> detection_curve(
    const std::vector<std::vector<bool>>& detect_flags,
    const std::vector<int>& ks, int draws, std::uint64_t seed) {
  if (draws < 1) throw std::invalid_argument("detection_curve: draws must be >= 1");
  if (detect_flags.empty()) {
    throw std::invalid_argument("detection_curve: no problems given");
  }
  for (const auto& flags : detect_flags) {
    if (flags.empty()) {
      throw std::invalid_argument("detection_curve: each problem needs >= 1 test");
    }
  }
  std::vector<DetectionPoint> curve;
  for (std::size_t ki = 0; ki < ks.size(); ++ki) {
    const int k = ks[ki];
    if (k < 1) throw std::invalid_argument("detection_curve: k must be >= 1");
    double sum = 0.0;
    double sum_sq = 0.0;
    for (int draw = 0; draw < draws; ++draw) {
      SplitMix64 rng(derive_stream_seed(
          seed, static_cast<std::uint64_t>(ki) * 1000003ull +
                    static_cast<std::uint64_t>(draw)));
      std::int64_t detected = 0;
      for (const auto& flags : detect_flags) {
        const std::size_t take =
            std::min<std::size_t>(static_cast<std::size_t>(k), flags.size());
        // partial Fisher-Yates over test indices
        std::vector<std::size_t> order(flags.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        bool hit = false;
        for (std::size_t i = 0; i < take; ++i) {
          const std::size_t j =
              i + static_cast<std::size_t>(rng.next_below(order.size() - i));
          std::swap(order[i], order[j]);
          if (flags[order[i]]) {
            hit = true;
            break;
          }
        }
        detected += hit ? 1 : 0;
      }
      const double rate =
          static_cast<double>(detected) / static_cast<double>(detect_flags.size());
      sum += rate;
      sum_sq += rate * rate;
    }
    DetectionPoint point;
    point.k = k;
    point.mean = sum / draws;
    if (draws > 1) {
      const double variance =
          std::max(0.0, (sum_sq - sum * sum / draws) / (draws - 1));
      point.standard_deviation = std::sqrt(variance);
    }
    curve.push_back(point);
  }
  return curve;
}

struct ProblemOutcome {
  std::string problem_id;
  bool suite_nonempty = false;
  bool rescued = false;  // public-pass, TA-fail, later TA-pass and accepted
};

struct AugmentationRates {
  double gen_rate = 0.0;
  double rescue_rate = 0.0;
};

inline AugmentationRates gen_and_rescue_rates(
    const std::vector<ProblemOutcome>& outcomes) {
  if (outcomes.empty()) {
    throw std::invalid_argument("gen_and_rescue_rates: empty problem set");
  }
  std::int64_t nonempty = 0;
  std::int64_t rescued = 0;
  for (const ProblemOutcome& outcome : outcomes) {
    nonempty += outcome.suite_nonempty ? 1 : 0;
    rescued += outcome.rescued ? 1 : 0;
  }
  const double n = static_cast<double>(outcomes.size());
  return {static_cast<double>(nonempty) / n, static_cast<double>(rescued) / n};
}

}  // namespace stopcert
