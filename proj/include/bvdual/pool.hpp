#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "bvdual/error.hpp"
#include "bvdual/prediction_set.hpp"

namespace bvdual {

/// One model's predictions on an evaluation set: a row-major
/// (n_examples x n_classes) matrix of log-probabilities.
struct Predictions {
  std::size_t n_examples = 0;
  std::size_t n_classes = 0;
  std::vector<double> log_probs;

  Predictions() = default;
  Predictions(std::size_t examples, std::size_t classes)
      : n_examples(examples), n_classes(classes), log_probs(examples * classes, 0.0) {}

  std::span<double> row(std::size_t e) { return {log_probs.data() + e * n_classes, n_classes}; }
  std::span<const double> row(std::size_t e) const {
    return {log_probs.data() + e * n_classes, n_classes};
  }

  bool operator==(const Predictions&) const = default;
};

/// Predictions of several models on a shared evaluation set.
struct PredictionPool {
  std::vector<Predictions> models;
  std::vector<Provenance> tags;

  std::size_t n_models() const noexcept { return models.size(); }
  std::size_t n_examples() const noexcept { return models.empty() ? 0 : models.front().n_examples; }
  std::size_t n_classes() const noexcept { return models.empty() ? 0 : models.front().n_classes; }

  void add(Predictions p, Provenance tag) {
    if (!models.empty() &&
        (p.n_examples != n_examples() || p.n_classes != n_classes())) {
      throw UsageError("model predictions do not match the pool's evaluation set shape");
    }
    models.push_back(std::move(p));
    tags.push_back(std::move(tag));
  }

  /// Sub-pool of the given models (tags follow).
  PredictionPool subset(std::span<const std::size_t> indices) const {
    PredictionPool out;
    for (std::size_t i : indices) out.add(models.at(i), tags.at(i));
    return out;
  }

  bool operator==(const PredictionPool&) const = default;
};

inline void check_labels(const PredictionPool& pool, std::span<const int> labels) {
  if (pool.models.empty()) throw UsageError("prediction pool is empty");
  if (labels.size() != pool.n_examples()) {
    throw UsageError("pool has " + std::to_string(pool.n_examples()) + " examples but " +
                     std::to_string(labels.size()) + " labels were given");
  }
  for (std::size_t e = 0; e < labels.size(); ++e) {
    if (labels[e] < 0 || static_cast<std::size_t>(labels[e]) >= pool.n_classes()) {
      throw UsageError("label " + std::to_string(labels[e]) + " of example " + std::to_string(e) +
                       " is not a valid class index");
    }
  }
}

}  // namespace bvdual
