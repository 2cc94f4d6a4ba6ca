#pragma once

// Primal (probability-space) and dual (log-space for KL) ensembling, ensemble
// laws by exact enumeration, ensemble-size sweeps, and greedy selection.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bvdual/bregman.hpp"
#include "bvdual/central_moments.hpp"
#include "bvdual/decomposition.hpp"
#include "bvdual/error.hpp"
#include "bvdual/numeric.hpp"
#include "bvdual/parallel.hpp"
#include "bvdual/pool.hpp"
#include "bvdual/prediction_set.hpp"
#include "bvdual/rng.hpp"

namespace bvdual {

enum class EnsembleMode { primal, dual };

inline std::string_view to_string(EnsembleMode m) { return m == EnsembleMode::primal ? "primal" : "dual"; }

inline EnsembleMode parse_ensemble_mode(std::string_view s) {
  if (s == "primal") return EnsembleMode::primal;
  if (s == "dual") return EnsembleMode::dual;
  throw UsageError("unknown ensemble mode '" + std::string(s) + "' (expected primal or dual)");
}

namespace detail {

inline void check_members(std::span<const Vector> members) {
  if (members.empty()) throw UsageError("ensemble needs at least one member");
  for (std::size_t i = 1; i < members.size(); ++i) {
    if (members[i].size() != members[0].size()) {
      throw DomainError("ensemble member dimension mismatch", i);
    }
  }
}

}  // namespace detail

/// Arithmetic mean of the members.
inline Vector primal_ensemble(std::span<const Vector> members) {
  detail::check_members(members);
  const std::vector<Vector> xs(members.begin(), members.end());
  const Vector w(xs.size(), 1.0 / static_cast<double>(xs.size()));
  return detail::weighted_mean(xs, w);
}

/// (mean of member duals)*; softmax(mean log) for KL.
template <ConvexGenerator G>
Vector dual_ensemble(const G& gen, std::span<const Vector> members) {
  detail::check_members(members);
  return dual_mean(gen, PredictionSet(std::vector<Vector>(members.begin(), members.end())));
}

/// Law of the k-member ensemble of i.i.d. draws from `pool`, by exhaustive
/// enumeration of all |pool|^k ordered draws (weights multiply).
template <ConvexGenerator G>
PredictionSet ensemble_law(const G& gen, const PredictionSet& pool, std::size_t k,
                           EnsembleMode mode) {
  if (k == 0) throw UsageError("ensemble size must be at least 1");
  const std::size_t m = pool.size();
  double outcomes = std::pow(static_cast<double>(m), static_cast<double>(k));
  if (outcomes > 1e6) throw UsageError("ensemble law too large to enumerate");
  const PredictionSet canon = pool.canonicalized(gen);

  std::vector<Vector> points;
  std::vector<double> weights;
  std::vector<std::size_t> draw(k, 0);
  std::vector<Vector> members(k);
  for (;;) {
    double w = 1.0;
    for (std::size_t l = 0; l < k; ++l) {
      members[l] = canon.point(draw[l]);
      w *= canon.weight(draw[l]);
    }
    points.push_back(mode == EnsembleMode::primal ? gen.canonical(primal_ensemble(members))
                                                  : dual_ensemble(gen, members));
    weights.push_back(w);
    std::size_t pos = 0;
    while (pos < k && ++draw[pos] == m) draw[pos++] = 0;
    if (pos == k) break;
  }
  return PredictionSet(std::move(points), std::move(weights));
}

// ---------------------------------------------------------------------------
// Ensemble-size sweeps

enum class Sampling { with_replacement, without_replacement };

struct EnsembleCurve {
  EnsembleMode mode = EnsembleMode::primal;
  Sampling sampling = Sampling::with_replacement;
  std::vector<std::size_t> ks;
  std::vector<double> bias;
  std::vector<double> variance;
  std::vector<double> nll;
  // Monte-Carlo standard errors from batch means over the draws (0 when exact).
  std::vector<double> bias_stderr;
  std::vector<double> variance_stderr;
  std::vector<double> nll_stderr;
  std::size_t n_draws = 0;
  std::uint64_t seed = 0;
};

namespace detail {

/// Combine the selected models' rows for one example into an ensemble log row.
inline void combine_row(const PredictionPool& pool, std::span<const std::size_t> picks,
                        std::size_t e, EnsembleMode mode, std::span<double> out) {
  const std::size_t c = out.size();
  std::fill(out.begin(), out.end(), 0.0);
  const double inv = 1.0 / static_cast<double>(picks.size());
  if (mode == EnsembleMode::primal) {
    for (std::size_t m : picks) {
      const auto row = pool.models[m].row(e);
      for (std::size_t j = 0; j < c; ++j) out[j] += std::exp(row[j]);
    }
    double s = 0.0;
    for (double& v : out) {
      v = std::max(v * inv, kProbabilityFloor);
      s += v;
    }
    for (double& v : out) v = std::log(std::max(v / s, kProbabilityFloor));
  } else {
    for (std::size_t m : picks) {
      const auto row = pool.models[m].row(e);
      for (std::size_t j = 0; j < c; ++j) out[j] += row[j];
    }
    for (double& v : out) v *= inv;
    floor_log_row(out);
  }
}

struct CurvePoint {
  double bias, variance, nll;
};

/// Per-example closed form over draws [lo, hi), averaged over examples.
/// `logs` is laid out [draw][example][class].
inline CurvePoint reduce_draws(const std::vector<double>& logs, std::span<const int> labels,
                               std::size_t n_examples, std::size_t c, std::size_t lo,
                               std::size_t hi) {
  const std::size_t n = hi - lo;
  Vector bias(n_examples), var(n_examples), nll(n_examples);
  Vector ce(n), column(n), mean_log(c);
  for (std::size_t e = 0; e < n_examples; ++e) {
    const auto y = static_cast<std::size_t>(labels[e]);
    for (std::size_t r = lo; r < hi; ++r) ce[r - lo] = -logs[(r * n_examples + e) * c + y];
    for (std::size_t j = 0; j < c; ++j) {
      for (std::size_t r = lo; r < hi; ++r) column[r - lo] = logs[(r * n_examples + e) * c + j];
      mean_log[j] = mean(column);
    }
    const BiasVariance bv = bias_variance_from_moments(mean(ce), mean_log);
    bias[e] = bv.bias;
    var[e] = bv.variance;
    nll[e] = bv.bias + bv.variance;
  }
  return {mean(bias), mean(var), mean(nll)};
}

inline double batch_stderr(const std::vector<double>& xs) {
  const double mu = mean(xs);
  Vector sq(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) sq[i] = (xs[i] - mu) * (xs[i] - mu);
  const auto n = static_cast<double>(xs.size());
  return std::sqrt(pairwise_sum(sq) / (n - 1.0)) / std::sqrt(n);
}

}  // namespace detail

/// Bias, variance and NLL of k-member ensembles drawn from a pool, for each k.
///
/// For k = 1 the ensemble law is the pool law itself and the closed form is
/// evaluated exactly over all members. For k > 1, each of `n_draws` replicates
/// samples k models (stream derive_seed(seed, {k, r})), combines them per
/// example by `mode`, and the closed-form estimator runs per example over the
/// replicates before averaging over examples. Standard errors come from
/// min(10, n_draws) contiguous batches of replicates.
inline EnsembleCurve ensemble_curve(const PredictionPool& pool, std::span<const int> labels,
                                    EnsembleMode mode, std::span<const std::size_t> ks,
                                    std::size_t n_draws, std::uint64_t seed,
                                    Sampling sampling = Sampling::with_replacement) {
  check_labels(pool, labels);
  if (n_draws == 0) throw UsageError("number of draws must be at least 1");
  const std::size_t m = pool.n_models();
  const std::size_t n_ex = pool.n_examples();
  const std::size_t c = pool.n_classes();
  for (std::size_t k : ks) {
    if (k == 0) throw UsageError("ensemble size must be at least 1");
    if (sampling == Sampling::without_replacement && k > m) {
      throw UsageError("ensemble size " + std::to_string(k) + " exceeds pool size " +
                       std::to_string(m) + " without replacement");
    }
  }

  EnsembleCurve curve;
  curve.mode = mode;
  curve.sampling = sampling;
  curve.ks.assign(ks.begin(), ks.end());
  curve.n_draws = n_draws;
  curve.seed = seed;

  for (std::size_t k : ks) {
    if (k == 1) {
      const BiasVariance bv = kl_bias_variance(pool.models, labels);
      curve.bias.push_back(bv.bias);
      curve.variance.push_back(bv.variance);
      curve.nll.push_back(bv.nll());
      curve.bias_stderr.push_back(0.0);
      curve.variance_stderr.push_back(0.0);
      curve.nll_stderr.push_back(0.0);
      continue;
    }

    std::vector<double> logs(n_draws * n_ex * c);
    parallel_for(n_draws, [&](std::size_t r) {
      Stream stream(derive_seed(seed, {k, r}));
      std::vector<std::size_t> picks(k);
      if (sampling == Sampling::with_replacement) {
        for (auto& p : picks) p = static_cast<std::size_t>(stream.index(m));
      } else {
        std::vector<std::size_t> perm(m);
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        for (std::size_t l = 0; l < k; ++l) {
          const auto j = l + static_cast<std::size_t>(stream.index(m - l));
          std::swap(perm[l], perm[j]);
          picks[l] = perm[l];
        }
      }
      for (std::size_t e = 0; e < n_ex; ++e) {
        detail::combine_row(pool, picks, e, mode,
                            std::span<double>(logs.data() + (r * n_ex + e) * c, c));
      }
    });

    const auto full = detail::reduce_draws(logs, labels, n_ex, c, 0, n_draws);
    curve.bias.push_back(full.bias);
    curve.variance.push_back(full.variance);
    curve.nll.push_back(full.nll);

    const std::size_t n_batches = std::min<std::size_t>(10, n_draws);
    if (n_batches < 2) {
      curve.bias_stderr.push_back(std::numeric_limits<double>::quiet_NaN());
      curve.variance_stderr.push_back(std::numeric_limits<double>::quiet_NaN());
      curve.nll_stderr.push_back(std::numeric_limits<double>::quiet_NaN());
      continue;
    }
    std::vector<double> bb, vb, nb;
    for (std::size_t b = 0; b < n_batches; ++b) {
      const auto part = detail::reduce_draws(logs, labels, n_ex, c, b * n_draws / n_batches,
                                             (b + 1) * n_draws / n_batches);
      bb.push_back(part.bias);
      vb.push_back(part.variance);
      nb.push_back(part.nll);
    }
    curve.bias_stderr.push_back(detail::batch_stderr(bb));
    curve.variance_stderr.push_back(detail::batch_stderr(vb));
    curve.nll_stderr.push_back(detail::batch_stderr(nb));
  }
  return curve;
}

// ---------------------------------------------------------------------------
// Two-point counterexample: primal ensembling moves the KL bias in opposite
// directions for the two classes.

struct CounterexampleReport {
  Vector dual_mean_single;
  Vector dual_mean_ensemble;
  double bias_class0_single = 0.0;
  double bias_class0_ensemble = 0.0;
  double bias_class1_single = 0.0;
  double bias_class1_ensemble = 0.0;

  bool central_predictions_differ() const {
    return std::abs(dual_mean_single[0] - dual_mean_ensemble[0]) > 1e-9;
  }
  bool class0_bias_increases() const { return bias_class0_ensemble > bias_class0_single; }
  bool class1_bias_decreases() const { return bias_class1_ensemble < bias_class1_single; }
  bool opposite_directions() const {
    return (class0_bias_increases() && class1_bias_decreases()) ||
           (bias_class0_ensemble < bias_class0_single && bias_class1_ensemble > bias_class1_single);
  }
  bool passed() const { return central_predictions_differ() && opposite_directions(); }
};

/// X uniform on {(0.8, 0.2), (0.6, 0.4)}; the 2-member primal ensemble law puts
/// 1/4 on each endpoint and 1/2 on (0.7, 0.3). Everything is recomputed.
inline CounterexampleReport counterexample_report() {
  const NegativeEntropy gen(2);
  const PredictionSet single({{0.8, 0.2}, {0.6, 0.4}});
  const PredictionSet ensemble = ensemble_law(gen, single, 2, EnsembleMode::primal);

  CounterexampleReport r;
  r.dual_mean_single = dual_mean(gen, single);
  r.dual_mean_ensemble = dual_mean(gen, ensemble);
  r.bias_class0_single = -std::log(r.dual_mean_single[0]);
  r.bias_class1_single = -std::log(r.dual_mean_single[1]);
  r.bias_class0_ensemble = -std::log(r.dual_mean_ensemble[0]);
  r.bias_class1_ensemble = -std::log(r.dual_mean_ensemble[1]);
  return r;
}

// ---------------------------------------------------------------------------
// Greedy forward selection

struct GreedySelection {
  std::vector<std::size_t> members;  // selection order; repeats allowed
  std::vector<double> nll;           // validation NLL after each pick
};

/// Forward selection on validation NLL of the primal ensemble. Each step adds
/// the model (repeats allowed) whose inclusion gives the lowest NLL, ties going
/// to the lowest index. Selection stops early once no candidate strictly lowers
/// the NLL, so NLL never increases with the budget.
inline GreedySelection greedy_select_trace(const PredictionPool& pool, std::span<const int> val_labels,
                                           std::size_t budget) {
  GreedySelection out;
  if (budget == 0) return out;
  if (pool.models.empty()) throw UsageError("greedy selection needs a non-empty pool");
  check_labels(pool, val_labels);
  const std::size_t n_ex = pool.n_examples();
  const std::size_t m = pool.n_models();

  // Probability of the true class, per model and example.
  std::vector<double> p_true(m * n_ex);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t e = 0; e < n_ex; ++e) {
      p_true[i * n_ex + e] = std::exp(pool.models[i].row(e)[static_cast<std::size_t>(val_labels[e])]);
    }
  }
  std::vector<double> running(n_ex, 0.0);
  double current = std::numeric_limits<double>::infinity();
  std::vector<double> scores(m);
  for (std::size_t step = 0; step < budget; ++step) {
    const double size = static_cast<double>(step + 1);
    parallel_for(m, [&](std::size_t i) {
      Vector terms(n_ex);
      for (std::size_t e = 0; e < n_ex; ++e) {
        terms[e] = -std::log(std::max((running[e] + p_true[i * n_ex + e]) / size, kProbabilityFloor));
      }
      scores[i] = mean(terms);
    });
    std::size_t best = 0;
    for (std::size_t i = 1; i < m; ++i) {
      if (scores[i] < scores[best]) best = i;
    }
    if (!(scores[best] < current)) break;
    current = scores[best];
    for (std::size_t e = 0; e < n_ex; ++e) running[e] += p_true[best * n_ex + e];
    out.members.push_back(best);
    out.nll.push_back(current);
  }
  return out;
}

inline std::vector<std::size_t> greedy_select(const PredictionPool& pool,
                                              std::span<const int> val_labels, std::size_t budget) {
  return greedy_select_trace(pool, val_labels, budget).members;
}

}  // namespace bvdual
