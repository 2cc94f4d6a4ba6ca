#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

namespace bvdual {

/// Componentwise floor applied to every probability vector.
inline constexpr double kProbabilityFloor = 1e-12;

namespace detail {

inline double pairwise_sum_impl(const double* x, std::size_t n) {
  if (n <= 8) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += x[i];
    return s;
  }
  const std::size_t half = n / 2;
  return pairwise_sum_impl(x, half) + pairwise_sum_impl(x + half, n - half);
}

}  // namespace detail

/// Pairwise (cascade) summation; error grows as O(log n) rather than O(n).
inline double pairwise_sum(std::span<const double> x) {
  return detail::pairwise_sum_impl(x.data(), x.size());
}

inline double mean(std::span<const double> x) {
  return x.empty() ? 0.0 : pairwise_sum(x) / static_cast<double>(x.size());
}

/// log(sum(exp(z))) with a max shift.
inline double logsumexp(std::span<const double> z) {
  if (z.empty()) return -std::numeric_limits<double>::infinity();
  const double m = *std::max_element(z.begin(), z.end());
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double v : z) s += std::exp(v - m);
  return m + std::log(s);
}

inline std::vector<double> softmax(std::span<const double> z) {
  std::vector<double> out(z.size());
  if (z.empty()) return out;
  const double m = *std::max_element(z.begin(), z.end());
  double s = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    out[i] = std::exp(z[i] - m);
    s += out[i];
  }
  for (double& v : out) v /= s;
  return out;
}

inline std::vector<double> log_softmax(std::span<const double> z) {
  const double lse = logsumexp(z);
  std::vector<double> out(z.begin(), z.end());
  for (double& v : out) v -= lse;
  return out;
}

/// Clamp every entry to at least `kProbabilityFloor` and renormalize in place.
/// The floor is reapplied after renormalization so the minimum entry never
/// drops below it; the sum then differs from 1 by at most ~1e-24.
inline void floor_and_normalize(std::span<double> p) {
  double s = 0.0;
  for (double& v : p) {
    v = std::max(v, kProbabilityFloor);
    s += v;
  }
  for (double& v : p) v = std::max(v / s, kProbabilityFloor);
}

/// Same as `floor_and_normalize`, but on a row of log-probabilities (or
/// unnormalized logits). On return the row is the log of a floored simplex point.
inline void floor_log_row(std::span<double> row) {
  std::vector<double> p = softmax(row);
  floor_and_normalize(p);
  for (std::size_t i = 0; i < row.size(); ++i) row[i] = std::log(p[i]);
}

inline bool all_finite(std::span<const double> x) {
  return std::all_of(x.begin(), x.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace bvdual
