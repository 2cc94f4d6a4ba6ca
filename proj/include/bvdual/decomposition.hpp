#pragma once

// The Bregman bias-variance decomposition
//
//   E D[Y || X] = E D[Y || E Y]     (Bayes error)
//               + D[E Y || EX]      (bias)
//               + E D[EX || X]      (model variance)
//
// where EX is the dual mean of the prediction law, its conditional variant, and
// the closed-form KL estimators used throughout the experiments.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "bvdual/bregman.hpp"
#include "bvdual/central_moments.hpp"
#include "bvdual/error.hpp"
#include "bvdual/numeric.hpp"
#include "bvdual/parallel.hpp"
#include "bvdual/pool.hpp"
#include "bvdual/prediction_set.hpp"
#include "bvdual/rng.hpp"

namespace bvdual {

struct Decomposition {
  double bayes_error = 0.0;
  double bias = 0.0;
  double variance = 0.0;
  double total = 0.0;
};

/// Label and prediction laws are independent: total = sum_ij w_i v_j D(y_i, x_j).
/// The total is computed by that double sum and checked against the sum of the
/// three parts (NumericalError beyond 1e-9 relative).
template <ConvexGenerator G>
Decomposition decompose(const G& gen, const PredictionSet& labels, const PredictionSet& preds) {
  if (labels.dimension() != preds.dimension()) {
    throw UsageError("labels have dimension " + std::to_string(labels.dimension()) +
                     ", predictions " + std::to_string(preds.dimension()));
  }
  const PredictionSet ys = labels.canonicalized(gen);
  const PredictionSet xs = preds.canonicalized(gen);

  bool deterministic_label = true;
  for (std::size_t i = 1; i < ys.size(); ++i) deterministic_label &= ys.point(i) == ys.point(0);

  const Vector central_label = deterministic_label ? ys.point(0) : mean_label(gen, ys);
  const Vector central_pred = dual_mean(gen, xs);

  Decomposition d;
  if (!deterministic_label) {
    Vector terms(ys.size());
    for (std::size_t i = 0; i < ys.size(); ++i) {
      terms[i] = ys.weight(i) * divergence_canonical(gen, ys.point(i), central_label);
    }
    d.bayes_error = pairwise_sum(terms);
  }
  d.bias = divergence_canonical(gen, central_label, central_pred);
  {
    Vector terms(xs.size());
    for (std::size_t j = 0; j < xs.size(); ++j) {
      terms[j] = xs.weight(j) * divergence_canonical(gen, central_pred, xs.point(j));
    }
    d.variance = pairwise_sum(terms);
  }
  {
    Vector terms;
    terms.reserve(ys.size() * xs.size());
    for (std::size_t i = 0; i < ys.size(); ++i) {
      for (std::size_t j = 0; j < xs.size(); ++j) {
        terms.push_back(ys.weight(i) * xs.weight(j) *
                        divergence_canonical(gen, ys.point(i), xs.point(j)));
      }
    }
    d.total = pairwise_sum(terms);
  }
  const double parts = d.bayes_error + d.bias + d.variance;
  if (!(std::abs(d.total - parts) <= 1e-9 * std::max(1.0, std::abs(d.total)))) {
    throw NumericalError("decompose", "total " + std::to_string(d.total) +
                                          " does not match bayes + bias + variance " +
                                          std::to_string(parts));
  }
  return d;
}

struct ConditionalDecomposition {
  double conditional_bias = 0.0;      // E_Z D[y || E(X|Z)]
  double conditional_variance = 0.0;  // E_Z E_{X|Z} D[E(X|Z) || X]
  double gap = 0.0;                   // E_Z D[EX || E(X|Z)]
  double total_bias = 0.0;            // D[y || EX]
  double total_variance = 0.0;        // E D[EX || X]
};

/// Decomposition of E D[y || X] conditioned on the grouping Z of the
/// predictions. Conditional bias exceeds the total bias, and conditional
/// variance falls short of the total variance, by the same gap.
template <ConvexGenerator G>
ConditionalDecomposition conditional_decompose(const G& gen, std::span<const double> label,
                                               const PredictionSet& preds,
                                               GroupKey key = GroupKey::group) {
  const Vector y = gen.canonical(label);
  const PredictionSet xs = preds.canonicalized(gen);
  const Vector center = dual_mean(gen, xs);

  Vector bias_terms, var_terms, gap_terms;
  for (const auto& [name, idx] : group_indices(xs, key)) {
    double w = 0.0;
    for (std::size_t i : idx) w += xs.weight(i);
    const PredictionSet sub = xs.restricted(idx);
    const Vector group_center = dual_mean(gen, sub);
    bias_terms.push_back(w * divergence_canonical(gen, y, group_center));
    gap_terms.push_back(w * divergence_canonical(gen, center, group_center));
    Vector inner(sub.size());
    for (std::size_t i = 0; i < sub.size(); ++i) {
      inner[i] = sub.weight(i) * divergence_canonical(gen, group_center, sub.point(i));
    }
    var_terms.push_back(w * pairwise_sum(inner));
  }

  ConditionalDecomposition c;
  c.conditional_bias = pairwise_sum(bias_terms);
  c.conditional_variance = pairwise_sum(var_terms);
  c.gap = pairwise_sum(gap_terms);
  c.total_bias = divergence_canonical(gen, y, center);
  Vector terms(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    terms[i] = xs.weight(i) * divergence_canonical(gen, center, xs.point(i));
  }
  c.total_variance = pairwise_sum(terms);
  return c;
}

// ---------------------------------------------------------------------------
// Closed-form KL estimators

struct BiasVariance {
  double bias = 0.0;
  double variance = 0.0;

  double nll() const noexcept { return bias + variance; }
};

namespace detail {

inline void check_log_row(std::span<const double> row, double tol, const char* what) {
  const double lse = logsumexp(row);
  if (!std::isfinite(lse) || std::abs(lse) > tol) {
    throw ValidationError(what, "log-probabilities are not normalized (logsumexp = " +
                                    std::to_string(lse) + ")");
  }
}

/// From per-prediction CE values and per-class mean log-probabilities:
///   variance = -log sum_j exp(V_j),  bias = mean CE - variance.
inline BiasVariance bias_variance_from_moments(double mean_ce, std::span<const double> mean_log) {
  BiasVariance r;
  r.variance = -logsumexp(mean_log);
  r.bias = mean_ce - r.variance;
  return r;
}

}  // namespace detail

/// Bias and variance of N predictions against class y for the KL divergence:
/// V_j = mean_i log p^i_j, variance = -log sum_j exp(V_j), bias = mean CE - variance.
/// Each row must satisfy logsumexp = 0 within 1e-9.
inline BiasVariance kl_bias_variance_closed_form(std::span<const Vector> log_preds, std::size_t y) {
  if (log_preds.empty()) throw UsageError("at least one prediction is required");
  const std::size_t c = log_preds.front().size();
  if (y >= c) throw UsageError("class index " + std::to_string(y) + " out of range");
  Vector ce(log_preds.size());
  for (std::size_t i = 0; i < log_preds.size(); ++i) {
    if (log_preds[i].size() != c) throw UsageError("prediction vectors differ in length");
    detail::check_log_row(log_preds[i], 1e-9, "log_preds");
    ce[i] = -log_preds[i][y];
  }
  Vector mean_log(c), column(log_preds.size());
  for (std::size_t j = 0; j < c; ++j) {
    for (std::size_t i = 0; i < log_preds.size(); ++i) column[i] = log_preds[i][j];
    mean_log[j] = mean(column);
  }
  return detail::bias_variance_from_moments(mean(ce), mean_log);
}

/// Closed-form estimate per evaluation example over a set of predictors, then
/// averaged over examples.
inline BiasVariance kl_bias_variance(std::span<const Predictions> predictors,
                                     std::span<const int> labels) {
  if (predictors.empty()) throw UsageError("at least one predictor is required");
  const std::size_t n = predictors.front().n_examples;
  const std::size_t c = predictors.front().n_classes;
  if (labels.size() != n) throw UsageError("one label per evaluation example required");
  for (const Predictions& p : predictors) {
    if (p.n_examples != n || p.n_classes != c) throw UsageError("predictor shapes differ");
  }
  Vector bias(n), var(n);
  Vector ce(predictors.size()), mean_log(c), column(predictors.size());
  for (std::size_t e = 0; e < n; ++e) {
    if (labels[e] < 0 || static_cast<std::size_t>(labels[e]) >= c) {
      throw UsageError("label of example " + std::to_string(e) + " out of range");
    }
    for (std::size_t i = 0; i < predictors.size(); ++i) {
      detail::check_log_row(predictors[i].row(e), 1e-9, "predictions");
      ce[i] = -predictors[i].row(e)[static_cast<std::size_t>(labels[e])];
    }
    for (std::size_t j = 0; j < c; ++j) {
      for (std::size_t i = 0; i < predictors.size(); ++i) column[i] = predictors[i].row(e)[j];
      mean_log[j] = mean(column);
    }
    const BiasVariance r = detail::bias_variance_from_moments(mean(ce), mean_log);
    bias[e] = r.bias;
    var[e] = r.variance;
  }
  return {mean(bias), mean(var)};
}

/// Monte-Carlo closed-form estimate with the spread of the NLL accumulator.
struct DrawEstimate {
  double bias = 0.0;
  double variance = 0.0;
  double nll = 0.0;
  double nll_stderr = 0.0;  // sample standard deviation of per-draw CE / sqrt(n_draws)
};

/// Conditional bias-variance estimate for k-member primal ensembles drawn
/// from a pool of KL predictions: each draw samples k members uniformly with
/// replacement, averages them in probability space and accumulates CE(y | p~)
/// and log p~. Draw r uses the stream derive_seed(seed, {r}), so the result
/// does not depend on the thread count.
inline DrawEstimate ensemble_draw_estimate(const PredictionSet& pool, std::size_t k,
                                           std::size_t n_draws, std::size_t y,
                                           std::uint64_t seed) {
  if (k == 0) throw UsageError("ensemble size must be at least 1");
  if (n_draws == 0) throw UsageError("number of draws must be at least 1");
  const NegativeEntropy gen(pool.dimension());
  const PredictionSet members = pool.canonicalized(gen);
  const std::size_t c = members.dimension();
  if (y >= c) throw UsageError("class index " + std::to_string(y) + " out of range");
  const std::size_t m = members.size();

  bool uniform = true;
  for (std::size_t i = 1; i < m; ++i) uniform &= members.weight(i) == members.weight(0);
  Vector cdf(m);
  double acc = 0.0;
  for (std::size_t i = 0; i < m; ++i) cdf[i] = (acc += members.weight(i));

  std::vector<Vector> logs(n_draws, Vector(c));
  Vector ce(n_draws);
  parallel_for(n_draws, [&](std::size_t r) {
    Stream stream(derive_seed(seed, {r}));
    Vector avg(c, 0.0);
    for (std::size_t l = 0; l < k; ++l) {
      std::size_t pick;
      if (uniform) {
        pick = static_cast<std::size_t>(stream.index(m));
      } else {
        const double u = stream.uniform();
        pick = static_cast<std::size_t>(std::upper_bound(cdf.begin(), cdf.end() - 1, u) - cdf.begin());
      }
      for (std::size_t j = 0; j < c; ++j) avg[j] += members.point(pick)[j];
    }
    for (double& v : avg) v /= static_cast<double>(k);
    floor_and_normalize(avg);
    for (std::size_t j = 0; j < c; ++j) logs[r][j] = std::log(avg[j]);
    ce[r] = -logs[r][y];
  });

  Vector mean_log(c), column(n_draws);
  for (std::size_t j = 0; j < c; ++j) {
    for (std::size_t r = 0; r < n_draws; ++r) column[r] = logs[r][j];
    mean_log[j] = mean(column);
  }
  const double mean_ce = mean(ce);
  const BiasVariance bv = detail::bias_variance_from_moments(mean_ce, mean_log);

  DrawEstimate out;
  out.bias = bv.bias;
  out.variance = bv.variance;
  out.nll = mean_ce;
  if (n_draws > 1) {
    Vector sq(n_draws);
    for (std::size_t r = 0; r < n_draws; ++r) sq[r] = (ce[r] - mean_ce) * (ce[r] - mean_ce);
    const double sd = std::sqrt(pairwise_sum(sq) / static_cast<double>(n_draws - 1));
    out.nll_stderr = sd / std::sqrt(static_cast<double>(n_draws));
  }
  return out;
}

}  // namespace bvdual
