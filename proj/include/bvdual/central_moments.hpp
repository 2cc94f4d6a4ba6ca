#pragma once

// Central labels, dual means (central predictions) and the generalized laws of
// total expectation and variance. All expectations are exact weighted sums over
// a PredictionSet.

#include <cstddef>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "bvdual/bregman.hpp"
#include "bvdual/numeric.hpp"
#include "bvdual/prediction_set.hpp"

namespace bvdual {

namespace detail {

/// Weighted mean of equally sized vectors, coordinate by coordinate, with
/// pairwise summation.
inline Vector weighted_mean(const std::vector<Vector>& xs, std::span<const double> w) {
  const std::size_t dim = xs.front().size();
  Vector out(dim);
  Vector terms(xs.size());
  for (std::size_t j = 0; j < dim; ++j) {
    for (std::size_t i = 0; i < xs.size(); ++i) terms[i] = w[i] * xs[i][j];
    out[j] = pairwise_sum(terms);
  }
  return out;
}

}  // namespace detail

/// E Y: the weighted arithmetic mean, which minimizes z -> E D[Y || z] for
/// every Bregman divergence.
inline Vector mean_label(const PredictionSet& dist) {
  return detail::weighted_mean(dist.points(), dist.weights());
}

/// Same, revalidated as a point of `gen`'s domain.
template <ConvexGenerator G>
Vector mean_label(const G& gen, const PredictionSet& dist) {
  return gen.canonical(mean_label(dist.canonicalized(gen)));
}

/// The dual mean (E X*)*, i.e. the minimizer of z -> E D[z || X].
/// For KL this is softmax(E log X).
template <ConvexGenerator G>
Vector dual_mean(const G& gen, const PredictionSet& dist) {
  std::vector<Vector> duals;
  duals.reserve(dist.size());
  for (const Vector& p : dist.points()) duals.push_back(gen.gradient(gen.canonical(p)));
  const Vector z = detail::weighted_mean(duals, dist.weights());
  return to_primal(gen, DualPoint{z, std::string(gen.name())});
}

/// A per-group conditional dual mean with the group's marginal weight.
struct GroupMean {
  double weight = 0.0;
  Vector point;
};

/// E(X | Z = g) := (E_{X|Z=g} X*)* for every group g, in sorted key order.
template <ConvexGenerator G>
std::map<std::string, GroupMean> conditional_dual_means(const G& gen, const PredictionSet& dist,
                                                        GroupKey key = GroupKey::group) {
  std::map<std::string, GroupMean> out;
  for (const auto& [label, idx] : group_indices(dist, key)) {
    double w = 0.0;
    for (std::size_t i : idx) w += dist.weight(i);
    out.emplace(label, GroupMean{w, dual_mean(gen, dist.restricted(idx))});
  }
  return out;
}

/// Model variance V X = E D[E X || X], where E X is the dual mean.
template <ConvexGenerator G>
double variance(const G& gen, const PredictionSet& dist) {
  const Vector center = dual_mean(gen, dist);
  Vector terms(dist.size());
  for (std::size_t i = 0; i < dist.size(); ++i) {
    terms[i] = dist.weight(i) * divergence_canonical(gen, center, gen.canonical(dist.point(i)));
  }
  return pairwise_sum(terms);
}

/// V[X] = E[V[X|Z]] + V[E(X|Z)].
struct VarianceSplit {
  double unexplained = 0.0;
  double explained = 0.0;
  double total = 0.0;
};

template <ConvexGenerator G>
VarianceSplit total_variance_split(const G& gen, const PredictionSet& dist,
                                   GroupKey key = GroupKey::group) {
  const auto groups = group_indices(dist, key);
  std::vector<double> unexplained_terms;
  std::vector<Vector> centers;
  std::vector<double> group_weights;
  for (const auto& [label, idx] : groups) {
    double w = 0.0;
    for (std::size_t i : idx) w += dist.weight(i);
    const PredictionSet sub = dist.restricted(idx);
    unexplained_terms.push_back(w * variance(gen, sub));
    centers.push_back(dual_mean(gen, sub));
    group_weights.push_back(w);
  }
  VarianceSplit split;
  split.unexplained = pairwise_sum(unexplained_terms);
  split.explained = variance(gen, PredictionSet(std::move(centers), std::move(group_weights)));
  split.total = variance(gen, dist);
  return split;
}

}  // namespace bvdual
