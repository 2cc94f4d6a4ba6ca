#pragma once

// Estimators of bias and variance for a training procedure treated as a black
// box: conditional (seed-only), partitioned, and double-bootstrap.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "bvdual/decomposition.hpp"
#include "bvdual/error.hpp"
#include "bvdual/numeric.hpp"
#include "bvdual/parallel.hpp"
#include "bvdual/pool.hpp"
#include "bvdual/rng.hpp"

namespace bvdual {

/// Feature vectors (row-major, `dim` columns) with class targets.
struct Dataset {
  std::size_t dim = 0;
  std::vector<double> inputs;
  std::vector<int> targets;
  std::string id;

  std::size_t size() const noexcept { return targets.size(); }
  std::span<const double> input(std::size_t i) const { return {inputs.data() + i * dim, dim}; }

  void validate() const {
    if (targets.empty()) throw UsageError("dataset '" + id + "' is empty");
    if (inputs.size() != targets.size() * dim) {
      throw UsageError("dataset '" + id + "' has mismatched input and target counts");
    }
  }

  /// Rows `indices` (in order, repeats kept) under a new id.
  Dataset select(std::span<const std::size_t> indices, std::string new_id) const {
    Dataset out;
    out.dim = dim;
    out.id = std::move(new_id);
    out.inputs.reserve(indices.size() * dim);
    out.targets.reserve(indices.size());
    for (std::size_t i : indices) {
      const auto x = input(i);
      out.inputs.insert(out.inputs.end(), x.begin(), x.end());
      out.targets.push_back(targets[i]);
    }
    return out;
  }

  bool operator==(const Dataset&) const = default;
};

/// A training procedure: (dataset, seed) -> predictions on a fixed evaluation
/// set. Must be deterministic in (dataset contents, seed). When `thread_safe`
/// is false the estimators call it from one thread only.
struct TrainerHandle {
  std::function<Predictions(const Dataset&, std::uint64_t)> train;
  bool thread_safe = true;
};

/// Level-1 estimate b1, level-2 mean b2, corrective term t = b1 / b2 and the
/// corrected estimate b0 = t * b1. When b2 <= 0 the correction is undefined:
/// `degenerate` is set, t = 1 and b0 = b1.
struct BootstrapEstimate {
  double b1 = 0.0;
  double b2 = 0.0;
  double t = 1.0;
  double b0 = 0.0;
  bool degenerate = false;
};

inline BootstrapEstimate make_bootstrap_estimate(double b1, double b2) {
  BootstrapEstimate e;
  e.b1 = b1;
  e.b2 = b2;
  if (!(b2 > 0.0) || !std::isfinite(b1) || !std::isfinite(b2)) {
    e.degenerate = true;
    e.t = 1.0;
    e.b0 = b1;
    return e;
  }
  e.t = b1 / b2;
  e.b0 = e.t * b1;
  return e;
}

/// Resample with replacement to the same size; the child id is "<parent>+<seed>".
inline Dataset bootstrap_sample(const Dataset& d, std::uint64_t seed) {
  d.validate();
  Stream stream(seed);
  std::vector<std::size_t> idx(d.size());
  for (auto& i : idx) i = static_cast<std::size_t>(stream.index(d.size()));
  return d.select(idx, d.id + "+" + std::to_string(seed));
}

namespace detail {

inline std::size_t trainer_threads(const TrainerHandle& t) { return t.thread_safe ? 0 : 1; }

/// Primal average of k members; member l trains with seed derive_seed(seed, {l}).
inline Predictions train_ensemble(const TrainerHandle& trainer, const Dataset& d, std::size_t k,
                                  std::uint64_t seed) {
  std::vector<Predictions> members(k);
  for (std::size_t l = 0; l < k; ++l) members[l] = trainer.train(d, derive_seed(seed, {l}));
  if (k == 1) return members.front();
  Predictions out(members.front().n_examples, members.front().n_classes);
  const std::size_t c = out.n_classes;
  for (std::size_t e = 0; e < out.n_examples; ++e) {
    auto row = out.row(e);
    for (const Predictions& p : members) {
      const auto src = p.row(e);
      for (std::size_t j = 0; j < c; ++j) row[j] += std::exp(src[j]) / static_cast<double>(k);
    }
    for (double& v : row) v = std::log(std::max(v, kProbabilityFloor));
    floor_log_row(row);
  }
  return out;
}

inline void check_common(const TrainerHandle& trainer, const Dataset& T, std::size_t k) {
  if (!trainer.train) throw UsageError("trainer handle is empty");
  if (k == 0) throw UsageError("ensemble size must be at least 1");
  T.validate();
}

// Seed-path tags for the different estimators.
inline constexpr std::uint64_t kLevel1 = 1;
inline constexpr std::uint64_t kLevel2 = 2;
inline constexpr std::uint64_t kConditional = 3;
inline constexpr std::uint64_t kPartition = 4;
inline constexpr std::uint64_t kResample = 5;

}  // namespace detail

struct DoubleBootstrapResult {
  BootstrapEstimate bias;
  BootstrapEstimate variance;
  std::size_t models_trained = 0;
};

/// Double bootstrap: B level-1 resamples T_i of T and, for each, B level-2
/// resamples T_ij of T_i. Every node trains a k-member primal ensemble
/// (B*k + B^2*k models in total). Bias and variance at each level come from
/// the closed-form KL estimator across sibling ensembles; the level-2 values
/// are averaged over i, and b0 = b1^2 / b2 is applied to bias and variance
/// separately. Resample (i) uses seed derive_seed(seed, {resample, 1, i}),
/// resample (i, j) uses derive_seed(seed, {resample, 2, i, j}), and training
/// seeds follow the same paths under a different tag.
inline DoubleBootstrapResult double_bootstrap_estimate(const TrainerHandle& trainer,
                                                       const Dataset& T, std::size_t B,
                                                       std::size_t k,
                                                       std::span<const int> eval_labels,
                                                       std::uint64_t seed) {
  detail::check_common(trainer, T, k);
  if (B < 2) throw UsageError("double bootstrap needs B >= 2");

  std::vector<Dataset> level1(B);
  for (std::size_t i = 0; i < B; ++i) {
    level1[i] = bootstrap_sample(T, derive_seed(seed, {detail::kResample, 1, i}));
  }

  // Node n < B is T_i; node B + i*B + j is T_ij.
  const std::size_t nodes = B + B * B;
  std::vector<Predictions> preds(nodes);
  parallel_for(
      nodes,
      [&](std::size_t n) {
        if (n < B) {
          preds[n] = detail::train_ensemble(trainer, level1[n], k,
                                            derive_seed(seed, {detail::kLevel1, n}));
        } else {
          const std::size_t i = (n - B) / B;
          const std::size_t j = (n - B) % B;
          const Dataset child =
              bootstrap_sample(level1[i], derive_seed(seed, {detail::kResample, 2, i, j}));
          preds[n] = detail::train_ensemble(trainer, child, k,
                                            derive_seed(seed, {detail::kLevel2, i, j}));
        }
      },
      detail::trainer_threads(trainer));

  const BiasVariance l1 = kl_bias_variance(std::span(preds.data(), B), eval_labels);
  Vector b2_bias(B), b2_var(B);
  for (std::size_t i = 0; i < B; ++i) {
    const BiasVariance l2 = kl_bias_variance(std::span(preds.data() + B + i * B, B), eval_labels);
    b2_bias[i] = l2.bias;
    b2_var[i] = l2.variance;
  }

  DoubleBootstrapResult r;
  r.bias = make_bootstrap_estimate(l1.bias, mean(b2_bias));
  r.variance = make_bootstrap_estimate(l1.variance, mean(b2_var));
  r.models_trained = nodes * k;
  return r;
}

/// Train `n_seeds` k-member ensembles on the full T that differ only in their
/// seeds; closed-form estimate across them.
inline BiasVariance conditional_estimate(const TrainerHandle& trainer, const Dataset& T,
                                         std::size_t n_seeds, std::size_t k,
                                         std::span<const int> eval_labels, std::uint64_t seed) {
  detail::check_common(trainer, T, k);
  if (n_seeds < 2) throw UsageError("conditional estimate needs at least 2 seeds");
  std::vector<Predictions> preds(n_seeds);
  parallel_for(
      n_seeds,
      [&](std::size_t s) {
        preds[s] = detail::train_ensemble(trainer, T, k, derive_seed(seed, {detail::kConditional, s}));
      },
      detail::trainer_threads(trainer));
  return kl_bias_variance(preds, eval_labels);
}

/// Shuffle T, split it into P disjoint equal subsets (the |T| mod P leftover
/// points are dropped) and train one k-member ensemble per subset.
inline BiasVariance partition_estimate(const TrainerHandle& trainer, const Dataset& T,
                                       std::size_t P, std::size_t k,
                                       std::span<const int> eval_labels, std::uint64_t seed) {
  detail::check_common(trainer, T, k);
  if (P < 2) throw UsageError("partition estimate needs P >= 2");
  if (P > T.size()) {
    throw UsageError("cannot split " + std::to_string(T.size()) + " points into " +
                     std::to_string(P) + " partitions");
  }
  std::vector<std::size_t> perm(T.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Stream stream(derive_seed(seed, {detail::kPartition}));
  for (std::size_t i = perm.size(); i > 1; --i) {
    std::swap(perm[i - 1], perm[static_cast<std::size_t>(stream.index(i))]);
  }
  const std::size_t part = T.size() / P;
  std::vector<Predictions> preds(P);
  parallel_for(
      P,
      [&](std::size_t p) {
        const Dataset sub = T.select(std::span(perm.data() + p * part, part),
                                     T.id + "/part" + std::to_string(p));
        preds[p] = detail::train_ensemble(trainer, sub, k, derive_seed(seed, {detail::kPartition, p}));
      },
      detail::trainer_threads(trainer));
  return kl_bias_variance(preds, eval_labels);
}

/// Exact comparison of conditional and total quantities on a finite,
/// equiprobable universe of training sets, each trained with `n_seeds` seeds.
/// All values are averaged over evaluation examples.
struct ConditionalAnalysis {
  double true_bias = 0.0;
  double true_variance = 0.0;
  double conditional_bias = 0.0;      // E_T D[y || E(X|T)]
  double conditional_variance = 0.0;  // E_T E_{X|T} D[E(X|T) || X]
  double gap = 0.0;                   // E_T D[EX || E(X|T)]
};

inline ConditionalAnalysis enumerate_conditional(const TrainerHandle& trainer,
                                                 std::span<const Dataset> training_sets,
                                                 std::size_t n_seeds,
                                                 std::span<const int> eval_labels,
                                                 std::uint64_t seed) {
  if (training_sets.empty()) throw UsageError("no training sets to enumerate");
  if (n_seeds == 0) throw UsageError("at least one seed per training set is required");
  const std::size_t n_models = training_sets.size() * n_seeds;
  std::vector<Predictions> preds(n_models);
  parallel_for(
      n_models,
      [&](std::size_t n) {
        preds[n] = trainer.train(training_sets[n / n_seeds],
                                 derive_seed(seed, {detail::kConditional, n % n_seeds}));
      },
      detail::trainer_threads(trainer));

  const std::size_t n_ex = preds.front().n_examples;
  const std::size_t c = preds.front().n_classes;
  if (eval_labels.size() != n_ex) throw UsageError("one label per evaluation example required");
  const NegativeEntropy gen(c);
  Vector tb(n_ex), tv(n_ex), cb(n_ex), cv(n_ex), gap(n_ex);
  for (std::size_t e = 0; e < n_ex; ++e) {
    std::vector<Vector> points;
    std::vector<Provenance> tags;
    for (std::size_t n = 0; n < n_models; ++n) {
      points.push_back(softmax(preds[n].row(e)));
      tags.push_back(Provenance{static_cast<std::int64_t>(n % n_seeds),
                                training_sets[n / n_seeds].id + "#" + std::to_string(n / n_seeds),
                                std::nullopt});
    }
    const PredictionSet law(std::move(points), {}, std::move(tags));
    Vector y(c, 0.0);
    y[static_cast<std::size_t>(eval_labels[e])] = 1.0;
    const ConditionalDecomposition d = conditional_decompose(gen, y, law, GroupKey::train_id);
    tb[e] = d.total_bias;
    tv[e] = d.total_variance;
    cb[e] = d.conditional_bias;
    cv[e] = d.conditional_variance;
    gap[e] = d.gap;
  }
  return {mean(tb), mean(tv), mean(cb), mean(cv), mean(gap)};
}

}  // namespace bvdual
