#pragma once

// Input-oriented variable-returns-to-scale (BCC) efficiency for one-input /
// one-output cost-accuracy points.
//
// With a single input and a single output the BCC program has a closed form:
// the efficient frontier is the lower convex envelope of input as a function
// of output over the non-dominated points, and the efficiency of a unit is
// the ratio of the frontier-interpolated input at its output level to its
// own input. Frontier members score exactly 1; outputs above the frontier
// maximum are infeasible under VRS.

#include <algorithm>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace stopcert {

struct Dmu {
  std::string name;
  double cost = 0.0;      // input, > 0
  double accuracy = 0.0;  // output, >= 0

  void validate() const {
    if (!(cost > 0.0)) {
      throw std::invalid_argument("DMU input (cost) must be positive: " + name);
    }
    if (accuracy < 0.0) {
      throw std::invalid_argument("DMU output must be non-negative: " + name);
    }
  }
};

struct ParetoSplit {
  std::vector<std::size_t> kept;       // indices into the input set
  std::vector<std::size_t> dominated;
};

// A point is dominated when another point has no more input and no less
// output, with at least one strict inequality. Identical points do not
// dominate each other.
inline ParetoSplit pareto_filter(const std::vector<Dmu>& dmus) {
  if (dmus.empty()) throw std::invalid_argument("pareto_filter: empty set");
  ParetoSplit split;
  for (std::size_t i = 0; i < dmus.size(); ++i) {
    dmus[i].validate();
    bool dominated = false;
    for (std::size_t j = 0; j < dmus.size() && !dominated; ++j) {
      if (i == j) continue;
      const bool no_worse = dmus[j].cost <= dmus[i].cost &&
                            dmus[j].accuracy >= dmus[i].accuracy;
      const bool strict = dmus[j].cost < dmus[i].cost ||
                          dmus[j].accuracy > dmus[i].accuracy;
      dominated = no_worse && strict;
    }
    (dominated ? split.dominated : split.kept).push_back(i);
  }
  return split;
}

// Upper envelope: the non-dominated points that survive the convexity test,
// ordered by input. Collinear points stay on the envelope.
inline std::vector<std::size_t> frontier_indices(const std::vector<Dmu>& dmus) {
  const ParetoSplit split = pareto_filter(dmus);
  std::vector<std::size_t> order = split.kept;
  std::sort(order.begin(), order.end(), [&dmus](std::size_t a, std::size_t b) {
    if (dmus[a].accuracy != dmus[b].accuracy) {
      return dmus[a].accuracy < dmus[b].accuracy;
    }
    return dmus[a].cost < dmus[b].cost;
  });
  // Lower convex hull of cost as a function of accuracy; pop a middle point
  // only when it lies strictly above the chord of its neighbours.
  std::vector<std::size_t> hull;
  for (std::size_t idx : order) {
    while (hull.size() >= 2) {
      const Dmu& a = dmus[hull[hull.size() - 2]];
      const Dmu& b = dmus[hull[hull.size() - 1]];
      const Dmu& c = dmus[idx];
      const double cross = (b.accuracy - a.accuracy) * (c.cost - a.cost) -
                           (b.cost - a.cost) * (c.accuracy - a.accuracy);
      if (cross < 0.0) {
        hull.pop_back();
      } else {
        break;
      }
    }
    hull.push_back(idx);
  }
  return hull;
}

inline std::vector<Dmu> frontier(const std::vector<Dmu>& dmus) {
  std::vector<Dmu> envelope;
  for (std::size_t idx : frontier_indices(dmus)) envelope.push_back(dmus[idx]);
  return envelope;
}

enum class BccStatus { Efficient, Interpolated, BelowFrontier, AboveFrontier };

struct BccResult {
  std::optional<double> theta;   // absent when infeasible under VRS
  BccStatus status = BccStatus::Interpolated;
  std::optional<double> lambda;  // mixing weight toward the upper reference
  std::optional<double> x_star;  // frontier input at the target output
  std::string ref_low, ref_high; // frontier reference points
};

inline BccResult bcc_efficiency(const std::vector<Dmu>& dmus,
                                std::size_t target) {
  if (target >= dmus.size()) {
    throw std::invalid_argument("bcc_efficiency: target outside the set");
  }
  const std::vector<std::size_t> hull = frontier_indices(dmus);
  const Dmu& unit = dmus[target];

  BccResult result;
  for (std::size_t idx : hull) {
    if (idx == target) {
      result.theta = 1.0;
      result.status = BccStatus::Efficient;
      result.lambda = 1.0;
      result.x_star = unit.cost;
      result.ref_low = result.ref_high = unit.name;
      return result;
    }
  }

  const Dmu& lowest = dmus[hull.front()];
  const Dmu& highest = dmus[hull.back()];
  if (unit.accuracy > highest.accuracy) {
    result.status = BccStatus::AboveFrontier;  // infeasible under VRS
    return result;
  }
  if (unit.accuracy < lowest.accuracy) {
    result.status = BccStatus::BelowFrontier;
    result.x_star = lowest.cost;
    result.theta = std::min(1.0, lowest.cost / unit.cost);
    result.ref_low = result.ref_high = lowest.name;
    return result;
  }

  for (std::size_t i = 0; i + 1 < hull.size(); ++i) {
    const Dmu& low = dmus[hull[i]];
    const Dmu& high = dmus[hull[i + 1]];
    if (unit.accuracy < low.accuracy || unit.accuracy > high.accuracy) continue;
    const double span = high.accuracy - low.accuracy;
    const double lambda =
        span > 0.0 ? (unit.accuracy - low.accuracy) / span : 0.0;
    const double x_star = (1.0 - lambda) * low.cost + lambda * high.cost;
    result.lambda = lambda;
    result.x_star = x_star;
    result.theta = x_star / unit.cost;
    result.status = BccStatus::Interpolated;
    result.ref_low = low.name;
    result.ref_high = high.name;
    return result;
  }
  // Single-point frontier at exactly the target output.
  result.x_star = lowest.cost;
  result.theta = std::min(1.0, lowest.cost / unit.cost);
  result.status = BccStatus::Interpolated;
  result.ref_low = result.ref_high = lowest.name;
  return result;
}

}  // namespace stopcert
