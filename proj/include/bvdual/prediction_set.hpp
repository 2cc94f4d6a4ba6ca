#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "bvdual/bregman.hpp"
#include "bvdual/error.hpp"

namespace bvdual {

/// Where a prediction came from. `group` is the free-form conditioning key.
struct Provenance {
  std::int64_t seed = 0;
  std::string train_id;
  std::optional<std::string> group;

  bool operator==(const Provenance&) const = default;
};

/// Which provenance field a conditional computation groups by.
enum class GroupKey { group, seed, train_id };

inline GroupKey parse_group_key(std::string_view s) {
  if (s == "group") return GroupKey::group;
  if (s == "seed") return GroupKey::seed;
  if (s == "train_id") return GroupKey::train_id;
  throw UsageError("unknown group key '" + std::string(s) + "' (expected seed, train_id or group)");
}

inline std::string_view to_string(GroupKey k) {
  switch (k) {
    case GroupKey::group:
      return "group";
    case GroupKey::seed:
      return "seed";
    case GroupKey::train_id:
      return "train_id";
  }
  return "?";
}

/// Weighted empirical distribution over points of a common dimension.
/// Weights are normalized to sum to 1 at construction (uniform by default).
class PredictionSet {
 public:
  explicit PredictionSet(std::vector<Vector> points, std::vector<double> weights = {},
                         std::vector<Provenance> tags = {})
      : points_(std::move(points)), weights_(std::move(weights)), tags_(std::move(tags)) {
    if (points_.empty()) throw UsageError("prediction set must be non-empty");
    const std::size_t dim = points_.front().size();
    for (std::size_t i = 0; i < points_.size(); ++i) {
      if (points_[i].size() != dim) {
        throw DomainError("point dimension " + std::to_string(points_[i].size()) +
                              " differs from " + std::to_string(dim),
                          i);
      }
    }
    if (weights_.empty()) {
      weights_.assign(points_.size(), 1.0 / static_cast<double>(points_.size()));
    } else {
      if (weights_.size() != points_.size()) throw UsageError("one weight per point required");
      for (std::size_t i = 0; i < weights_.size(); ++i) {
        if (!std::isfinite(weights_[i]) || weights_[i] < 0.0) {
          throw UsageError("weight " + std::to_string(i) + " is negative or non-finite");
        }
      }
      const double s = pairwise_sum(weights_);
      if (!(s > 0.0)) throw UsageError("weights sum to zero");
      for (double& w : weights_) w /= s;
    }
    if (tags_.empty()) {
      tags_.resize(points_.size());
    } else if (tags_.size() != points_.size()) {
      throw UsageError("one provenance tag per point required");
    }
  }

  std::size_t size() const noexcept { return points_.size(); }
  std::size_t dimension() const noexcept { return points_.front().size(); }

  const Vector& point(std::size_t i) const { return points_[i]; }
  double weight(std::size_t i) const { return weights_[i]; }
  const Provenance& tag(std::size_t i) const { return tags_[i]; }

  const std::vector<Vector>& points() const noexcept { return points_; }
  const std::vector<double>& weights() const noexcept { return weights_; }
  const std::vector<Provenance>& tags() const noexcept { return tags_; }

  /// The conditional law on a subset of indices (weights renormalized).
  PredictionSet restricted(std::span<const std::size_t> indices) const {
    std::vector<Vector> pts;
    std::vector<double> ws;
    std::vector<Provenance> tg;
    for (std::size_t i : indices) {
      pts.push_back(points_.at(i));
      ws.push_back(weights_.at(i));
      tg.push_back(tags_.at(i));
    }
    return PredictionSet(std::move(pts), std::move(ws), std::move(tg));
  }

  /// Copy with every point put in the generator's canonical form.
  template <ConvexGenerator G>
  PredictionSet canonicalized(const G& gen) const {
    std::vector<Vector> pts;
    pts.reserve(points_.size());
    for (const Vector& p : points_) pts.push_back(gen.canonical(p));
    PredictionSet out(*this);
    out.points_ = std::move(pts);
    return out;
  }

 private:
  std::vector<Vector> points_;
  std::vector<double> weights_;
  std::vector<Provenance> tags_;
};

inline std::string group_label(const Provenance& tag, GroupKey key) {
  switch (key) {
    case GroupKey::seed:
      return std::to_string(tag.seed);
    case GroupKey::train_id:
      return tag.train_id;
    case GroupKey::group:
      if (!tag.group) throw UsageError("point has no group tag");
      return *tag.group;
  }
  return {};
}

/// Indices of each group, keyed and iterated in sorted key order.
inline std::map<std::string, std::vector<std::size_t>> group_indices(const PredictionSet& dist,
                                                                     GroupKey key) {
  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < dist.size(); ++i) {
    try {
      groups[group_label(dist.tag(i), key)].push_back(i);
    } catch (const UsageError&) {
      throw UsageError("point " + std::to_string(i) + " has no '" + std::string(to_string(key)) +
                       "' tag");
    }
  }
  return groups;
}

}  // namespace bvdual
