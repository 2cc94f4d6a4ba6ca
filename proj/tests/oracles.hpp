#pragma once

// Reference computations for the tests. Written from definitions only: no
// library routine is used to compute an expected value.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <random>
#include <vector>

namespace oracle {

using Vec = std::vector<double>;

// High-precision values of the two-point example {(0.8,0.2),(0.6,0.4)},
// computed offline with 50-digit arithmetic. The dual mean p solves
// p/(1-p) = sqrt(0.8*0.6 / (0.2*0.4)).
inline constexpr double kDualMean0 = 0.71010205144336438;
inline constexpr double kVariance = 0.02463800269179498;
inline constexpr double kBias = 0.3423465848483052;
inline constexpr double kTotal = 0.3669845875401002;
inline constexpr double kBiasClass1 = 1.2382263194623327;
inline constexpr double kEnsembleMean0 = 0.7050761861325029;
inline constexpr double kEnsembleBias0 = 0.3494494165723426;
inline constexpr double kEnsembleBias1 = 1.2210382140729582;
inline constexpr double kEnsembleVariance = 0.01238034916707367;

inline double kl(const Vec& p, const Vec& q) {
  double s = 0.0;
  for (std::size_t j = 0; j < p.size(); ++j) {
    if (p[j] > 0.0) s += p[j] * std::log(p[j] / q[j]);
  }
  return s;
}

inline double sq_dist(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) s += (a[j] - b[j]) * (a[j] - b[j]);
  return s;
}

/// Euclidean projection onto the probability simplex (sort-based).
inline Vec project_simplex(const Vec& v) {
  Vec u = v;
  std::sort(u.begin(), u.end(), std::greater<>());
  double css = 0.0, theta = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    css += u[i];
    const double t = (css - 1.0) / static_cast<double>(i + 1);
    if (u[i] - t > 0.0) theta = t;
  }
  Vec out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = std::max(v[i] - theta, 0.0);
  return out;
}

/// argmin_z sum_i w_i KL(z || x_i) over the simplex, by projected gradient
/// descent with Armijo backtracking, started at the arithmetic mean.
inline Vec kl_argmin(const std::vector<Vec>& xs, const Vec& w) {
  const std::size_t c = xs.front().size();
  auto f = [&](const Vec& z) {
    double s = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) s += w[i] * kl(z, xs[i]);
    return s;
  };
  Vec z(c, 0.0);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    for (std::size_t j = 0; j < c; ++j) z[j] += w[i] * xs[i][j];
  }
  double step = 0.1;
  for (int it = 0; it < 20000; ++it) {
    Vec g(c, 0.0);
    for (std::size_t i = 0; i < xs.size(); ++i) {
      for (std::size_t j = 0; j < c; ++j) g[j] += w[i] * (std::log(z[j]) - std::log(xs[i][j]) + 1.0);
    }
    const double fz = f(z);
    Vec next;
    for (;;) {
      Vec trial(c);
      for (std::size_t j = 0; j < c; ++j) trial[j] = z[j] - step * g[j];
      next = project_simplex(trial);
      for (double& v : next) v = std::max(v, 1e-300);
      double decrease = 0.0;
      for (std::size_t j = 0; j < c; ++j) decrease += g[j] * (z[j] - next[j]);
      if (f(next) <= fz - 0.5 * decrease || step < 1e-16) break;
      step *= 0.5;
    }
    double moved = 0.0;
    for (std::size_t j = 0; j < c; ++j) moved = std::max(moved, std::abs(next[j] - z[j]));
    z = next;
    step *= 2.0;
    if (moved < 1e-15) break;
  }
  return z;
}

/// Ensemble law of k i.i.d. draws from a weighted pool: every ordered tuple,
/// combined by arithmetic (primal) or normalized geometric (dual) averaging.
struct Law {
  std::vector<Vec> points;
  Vec weights;
};

inline Law enumerate_law(const std::vector<Vec>& pool, const Vec& w, std::size_t k, bool geometric) {
  Law law;
  const std::size_t m = pool.size();
  std::vector<std::size_t> idx(k, 0);
  for (;;) {
    const std::size_t c = pool.front().size();
    Vec p(c, 0.0);
    double weight = 1.0;
    for (std::size_t l = 0; l < k; ++l) {
      weight *= w[idx[l]];
      for (std::size_t j = 0; j < c; ++j) {
        p[j] += geometric ? std::log(pool[idx[l]][j]) / static_cast<double>(k)
                          : pool[idx[l]][j] / static_cast<double>(k);
      }
    }
    if (geometric) {
      double s = 0.0;
      for (double& v : p) s += (v = std::exp(v));
      for (double& v : p) v /= s;
    }
    law.points.push_back(p);
    law.weights.push_back(weight);
    std::size_t pos = 0;
    while (pos < k && ++idx[pos] == m) idx[pos++] = 0;
    if (pos == k) break;
  }
  return law;
}

/// Normalized geometric mean sum_i w_i log x_i, then softmax: the KL dual
/// mean written out directly.
inline Vec geometric_center(const std::vector<Vec>& xs, const Vec& w) {
  const std::size_t c = xs.front().size();
  Vec g(c, 0.0);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    for (std::size_t j = 0; j < c; ++j) g[j] += w[i] * std::log(xs[i][j]);
  }
  double s = 0.0;
  for (double& v : g) s += (v = std::exp(v));
  for (double& v : g) v /= s;
  return g;
}

/// KL variance E KL(center || X) by the defining sum.
inline double kl_variance_direct(const std::vector<Vec>& xs, const Vec& w) {
  const Vec center = geometric_center(xs, w);
  double s = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) s += w[i] * kl(center, xs[i]);
  return s;
}

inline Vec random_simplex(std::mt19937_64& rng, std::size_t c, double lo = 0.02) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Vec p(c);
  double s = 0.0;
  for (double& v : p) s += (v = -std::log(1.0 - u(rng)) + lo);
  for (double& v : p) v /= s;
  return p;
}

inline Vec uniform_weights(std::size_t n) { return Vec(n, 1.0 / static_cast<double>(n)); }

inline Vec random_weights(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> u(0.1, 1.0);
  Vec w(n);
  double s = 0.0;
  for (double& v : w) s += (v = u(rng));
  for (double& v : w) v /= s;
  return w;
}

}  // namespace oracle
