#pragma once

// Exact one-sided Clopper-Pearson confidence limits for a binomial rate.
//
// The upper limit at level eta is the p solving P(Bin(n,p) <= k) = eta
// (equivalently the 1-eta quantile of Beta(k+1, n-k)); the lower limit is
// the p solving P(Bin(n,p) >= k) = eta. Both are inverted by bisection on
// the binomial tail, evaluated through the regularized incomplete beta
// function, to an absolute tolerance of 1e-12 on the probability scale.
// Closed forms are used at k = 0 and k = n.
//
// Degenerate-cell conventions:
//   upper(0, 0, eta) = 1    lower(0, 0, eta) = 0
// so an empty cell always yields the conservative constant.

#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace stopcert {

namespace detail {

// Continued-fraction kernel for the regularized incomplete beta function
// (modified Lentz algorithm).
inline double beta_continued_fraction(double a, double b, double x) {
  constexpr int max_iterations = 400;
  constexpr double eps = 1e-16;
  constexpr double tiny = 1e-300;

  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < tiny) d = tiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= max_iterations; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < eps) break;
  }
  return h;
}

// Regularized incomplete beta I_x(a, b).
inline double regularized_incomplete_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                          a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(ln_front);
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return front * beta_continued_fraction(a, b, x) / a;
  }
  return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

}  // namespace detail

// P(Bin(n, p) <= k) through the incomplete-beta identity
// P(X <= k) = I_{1-p}(n-k, k+1).
inline double binomial_cdf(std::int64_t k, std::int64_t n, double p) {
  if (k < 0) return 0.0;
  if (k >= n) return 1.0;
  if (p <= 0.0) return 1.0;
  if (p >= 1.0) return 0.0;
  return detail::regularized_incomplete_beta(static_cast<double>(n - k),
                                             static_cast<double>(k + 1), 1.0 - p);
}

namespace detail {

inline void check_binomial_args(std::int64_t k, std::int64_t n, double eta) {
  if (k < 0 || n < 0 || k > n) {
    throw std::invalid_argument("clopper-pearson: require 0 <= k <= n");
  }
  if (!(eta > 0.0 && eta < 1.0)) {
    throw std::invalid_argument("clopper-pearson: require eta in (0,1)");
  }
}

// Bisect the monotone map p -> binomial_cdf(k, n, p) to the target value.
// The CDF is strictly decreasing in p for 0 <= k < n.
inline double invert_binomial_cdf(std::int64_t k, std::int64_t n, double target) {
  double lo = 0.0;
  double hi = 1.0;
  for (int iter = 0; iter < 200 && hi - lo > 1e-13; ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (binomial_cdf(k, n, mid) > target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace detail

// Exact one-sided upper confidence limit: P(true rate <= result) >= 1 - eta.
inline double cp_upper_bound(std::int64_t k, std::int64_t n, double eta) {
  detail::check_binomial_args(k, n, eta);
  if (n == 0) return 1.0;   // empty cell, conservative convention
  if (k == n) return 1.0;
  if (k == 0) return 1.0 - std::pow(eta, 1.0 / static_cast<double>(n));
  return detail::invert_binomial_cdf(k, n, eta);
}

// Exact one-sided lower confidence limit: P(true rate >= result) >= 1 - eta.
inline double cp_lower_bound(std::int64_t k, std::int64_t n, double eta) {
  detail::check_binomial_args(k, n, eta);
  if (n == 0 || k == 0) return 0.0;
  if (k == n) return std::pow(eta, 1.0 / static_cast<double>(n));
  // P(Bin(n,p) >= k) = eta  <=>  P(Bin(n,p) <= k-1) = 1 - eta.
  return detail::invert_binomial_cdf(k - 1, n, 1.0 - eta);
}

enum class BoundKind { Upper, Lower };

// A computed bound together with the cell it came from.
struct BinomialBound {
  BoundKind kind = BoundKind::Upper;
  std::int64_t successes = 0;
  std::int64_t trials = 0;
  double level = 0.0;
  double value = 0.0;
};

inline BinomialBound make_upper_bound(std::int64_t k, std::int64_t n, double eta) {
  return {BoundKind::Upper, k, n, eta, cp_upper_bound(k, n, eta)};
}

inline BinomialBound make_lower_bound(std::int64_t k, std::int64_t n, double eta) {
  return {BoundKind::Lower, k, n, eta, cp_lower_bound(k, n, eta)};
}

}  // namespace stopcert
