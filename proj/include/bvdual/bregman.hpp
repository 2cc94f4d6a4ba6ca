#pragma once

// Convex generators F, their dual maps, and the Bregman divergences they induce:
//
//   D_F[y || x] = F(y) - F(x) - <grad F(x), y - x>
//
// A generator bundles F, grad F (primal -> dual), F* and grad F* (dual -> primal)
// together with domain validation. Everything else in the library (central
// predictions, variances, decompositions, ensembles) is derived from these four
// functions.

#include <cmath>
#include <concepts>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "bvdual/error.hpp"
#include "bvdual/numeric.hpp"

namespace bvdual {

using Vector = std::vector<double>;

enum class Domain { full_space, positive_orthant, open_simplex };

inline std::string_view to_string(Domain d) {
  switch (d) {
    case Domain::full_space:
      return "full space";
    case Domain::positive_orthant:
      return "positive orthant";
    case Domain::open_simplex:
      return "open probability simplex";
  }
  return "?";
}

/// A probability vector with every entry >= kProbabilityFloor and its cached
/// logarithm. Construction floors then renormalizes; one-hot labels become
/// floored vertices.
class SimplexPoint {
 public:
  /// Throws DomainError on negative or non-finite entries, or when the entries
  /// do not sum to 1 within 1e-6.
  explicit SimplexPoint(std::span<const double> probs) : probs_(probs.begin(), probs.end()) {
    if (probs_.empty()) throw DomainError("simplex point must have at least one entry");
    double s = 0.0;
    for (std::size_t i = 0; i < probs_.size(); ++i) {
      if (!std::isfinite(probs_[i])) throw DomainError("non-finite probability", i);
      if (probs_[i] < 0.0) throw DomainError("negative probability", i);
      s += probs_[i];
    }
    if (std::abs(s - 1.0) > 1e-6) {
      throw DomainError("probabilities sum to " + std::to_string(s) + ", expected 1");
    }
    floor_and_normalize(probs_);
    refresh_logs();
  }

  /// From log-probabilities or logits (normalized through softmax).
  static SimplexPoint from_log_probs(std::span<const double> log_probs) {
    if (!all_finite(log_probs)) throw DomainError("non-finite log-probability");
    return SimplexPoint(softmax(log_probs));
  }

  static SimplexPoint vertex(std::size_t dimension, std::size_t k) {
    if (k >= dimension) throw DomainError("class index out of range", k);
    Vector p(dimension, 0.0);
    p[k] = 1.0;
    return SimplexPoint(p);
  }

  std::size_t size() const noexcept { return probs_.size(); }
  std::span<const double> probs() const noexcept { return probs_; }
  std::span<const double> log_probs() const noexcept { return log_probs_; }
  const Vector& vector() const noexcept { return probs_; }

 private:
  void refresh_logs() {
    log_probs_.resize(probs_.size());
    for (std::size_t i = 0; i < probs_.size(); ++i) log_probs_[i] = std::log(probs_[i]);
  }

  Vector probs_;
  Vector log_probs_;
};

/// Image of a primal point under grad F, bound to the generator that made it.
struct DualPoint {
  Vector coords;
  std::string generator_name;
};

template <class G>
concept ConvexGenerator = requires(const G& g, std::span<const double> x) {
  { g.name() } -> std::convertible_to<std::string_view>;
  { g.dimension() } -> std::same_as<std::size_t>;
  { g.domain() } -> std::same_as<Domain>;
  { g.canonical(x) } -> std::same_as<Vector>;
  { g.value(x) } -> std::same_as<double>;
  { g.gradient(x) } -> std::same_as<Vector>;
  { g.conjugate_value(x) } -> std::same_as<double>;
  { g.conjugate_gradient(x) } -> std::same_as<Vector>;
};

namespace detail {

inline void check_dimension(std::size_t expected, std::size_t got) {
  if (expected != got) {
    throw DomainError("dimension mismatch: expected " + std::to_string(expected) + ", got " +
                      std::to_string(got));
  }
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  Vector prod(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) prod[i] = a[i] * b[i];
  return pairwise_sum(prod);
}

class GeneratorBase {
 public:
  explicit GeneratorBase(std::size_t dimension) : dimension_(dimension) {
    if (dimension == 0) throw UsageError("generator dimension must be positive");
  }
  std::size_t dimension() const noexcept { return dimension_; }

 private:
  std::size_t dimension_;
};

}  // namespace detail

/// F(x) = ||x||^2 on R^d. D_F is the squared Euclidean distance.
class SquaredEuclidean : public detail::GeneratorBase {
 public:
  using GeneratorBase::GeneratorBase;

  static constexpr std::string_view kName = "sq_euclidean";
  std::string_view name() const noexcept { return kName; }
  Domain domain() const noexcept { return Domain::full_space; }

  Vector canonical(std::span<const double> x) const {
    detail::check_dimension(dimension(), x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (!std::isfinite(x[i])) throw DomainError("non-finite coordinate", i);
    }
    return Vector(x.begin(), x.end());
  }

  double value(std::span<const double> x) const { return detail::dot(x, x); }

  Vector gradient(std::span<const double> x) const {
    Vector g(x.begin(), x.end());
    for (double& v : g) v *= 2.0;
    return g;
  }

  /// F*(z) = ||z||^2 / 4.
  double conjugate_value(std::span<const double> z) const { return 0.25 * detail::dot(z, z); }

  Vector conjugate_gradient(std::span<const double> z) const {
    Vector x(z.begin(), z.end());
    for (double& v : x) v *= 0.5;
    return x;
  }
};

/// F(x) = sum_i x_i log x_i on the open simplex. D_F is KL(y || x).
///
/// On the simplex grad F is only defined up to an additive constant; the dual
/// map is fixed to log x and the primal map is softmax, which quotients the
/// constant out. F* is then logsumexp.
class NegativeEntropy : public detail::GeneratorBase {
 public:
  using GeneratorBase::GeneratorBase;

  static constexpr std::string_view kName = "neg_entropy";
  std::string_view name() const noexcept { return kName; }
  Domain domain() const noexcept { return Domain::open_simplex; }

  Vector canonical(std::span<const double> x) const {
    detail::check_dimension(dimension(), x.size());
    return SimplexPoint(x).vector();
  }

  double value(std::span<const double> x) const {
    Vector t(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) t[i] = x[i] > 0.0 ? x[i] * std::log(x[i]) : 0.0;
    return pairwise_sum(t);
  }

  Vector gradient(std::span<const double> x) const {
    Vector g(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) g[i] = std::log(x[i]);
    return g;
  }

  double conjugate_value(std::span<const double> z) const { return logsumexp(z); }

  Vector conjugate_gradient(std::span<const double> z) const {
    Vector p = softmax(z);
    floor_and_normalize(p);
    return p;
  }
};

/// F(x) = sum_i x_i log x_i - x_i on the positive orthant (generalized
/// I-divergence). Included to exercise the machinery beyond the two classical
/// cases.
class GeneralizedIDivergence : public detail::GeneratorBase {
 public:
  using GeneratorBase::GeneratorBase;

  static constexpr std::string_view kName = "gen_i_divergence";
  std::string_view name() const noexcept { return kName; }
  Domain domain() const noexcept { return Domain::positive_orthant; }

  Vector canonical(std::span<const double> x) const {
    detail::check_dimension(dimension(), x.size());
    Vector out(x.begin(), x.end());
    for (std::size_t i = 0; i < out.size(); ++i) {
      if (!std::isfinite(out[i])) throw DomainError("non-finite coordinate", i);
      if (out[i] < 0.0) throw DomainError("negative coordinate", i);
      out[i] = std::max(out[i], kProbabilityFloor);
    }
    return out;
  }

  double value(std::span<const double> x) const {
    Vector t(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) t[i] = x[i] * std::log(x[i]) - x[i];
    return pairwise_sum(t);
  }

  Vector gradient(std::span<const double> x) const {
    Vector g(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) g[i] = std::log(x[i]);
    return g;
  }

  /// F*(z) = sum_i exp(z_i).
  double conjugate_value(std::span<const double> z) const {
    Vector t(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) t[i] = std::exp(z[i]);
    return pairwise_sum(t);
  }

  Vector conjugate_gradient(std::span<const double> z) const {
    Vector x(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) x[i] = std::max(std::exp(z[i]), kProbabilityFloor);
    return x;
  }
};

static_assert(ConvexGenerator<SquaredEuclidean>);
static_assert(ConvexGenerator<NegativeEntropy>);
static_assert(ConvexGenerator<GeneralizedIDivergence>);

// ---------------------------------------------------------------------------
// Operations

/// F(x), after validating (and for the simplex, flooring) x.
template <ConvexGenerator G>
double evaluate(const G& gen, std::span<const double> x) {
  return gen.value(gen.canonical(x));
}

template <ConvexGenerator G>
DualPoint to_dual(const G& gen, std::span<const double> x) {
  return DualPoint{gen.gradient(gen.canonical(x)), std::string(gen.name())};
}

template <ConvexGenerator G>
Vector to_primal(const G& gen, const DualPoint& z) {
  if (z.generator_name != gen.name()) {
    throw UsageError("dual point bound to generator '" + z.generator_name + "', not '" +
                     std::string(gen.name()) + "'");
  }
  if (z.coords.size() != gen.dimension()) {
    throw UsageError("dual point has dimension " + std::to_string(z.coords.size()) +
                     ", generator expects " + std::to_string(gen.dimension()));
  }
  if (!all_finite(z.coords)) throw NumericalError("to_primal", "non-finite dual coordinate");
  return gen.conjugate_gradient(z.coords);
}

namespace detail {

/// Bregman divergence of a generic convex function given its value and
/// gradient, on points that are already canonical.
template <class Value, class Gradient>
double bregman(Value&& value, Gradient&& gradient, std::span<const double> y,
               std::span<const double> x, const char* stage) {
  const double fy = value(y);
  const double fx = value(x);
  const Vector gx = gradient(x);
  Vector diff(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) diff[i] = y[i] - x[i];
  const double linear = dot(gx, diff);
  if (!std::isfinite(fy) || !std::isfinite(fx) || !std::isfinite(linear)) {
    throw NumericalError(stage, "non-finite term in F(y) - F(x) - <grad F(x), y - x>");
  }
  return (fy - fx) - linear;
}

}  // namespace detail

/// D_F[y || x] on points already in canonical form (no validation).
template <ConvexGenerator G>
double divergence_canonical(const G& gen, std::span<const double> y, std::span<const double> x) {
  return detail::bregman([&](std::span<const double> v) { return gen.value(v); },
                         [&](std::span<const double> v) { return gen.gradient(v); }, y, x,
                         "divergence");
}

/// D_F[y || x] = F(y) - F(x) - <grad F(x), y - x>.
template <ConvexGenerator G>
double divergence(const G& gen, std::span<const double> y, std::span<const double> x) {
  const Vector yc = gen.canonical(y);
  const Vector xc = gen.canonical(x);
  return divergence_canonical(gen, yc, xc);
}

/// D_{F*}[a || b] for dual coordinates a, b, through the same formula applied to F*.
template <ConvexGenerator G>
double conjugate_divergence(const G& gen, std::span<const double> a, std::span<const double> b) {
  detail::check_dimension(gen.dimension(), a.size());
  detail::check_dimension(gen.dimension(), b.size());
  return detail::bregman([&](std::span<const double> v) { return gen.conjugate_value(v); },
                         [&](std::span<const double> v) { return gen.conjugate_gradient(v); }, a,
                         b, "conjugate divergence");
}

// ---------------------------------------------------------------------------
// Runtime selection

using AnyGenerator = std::variant<SquaredEuclidean, NegativeEntropy, GeneralizedIDivergence>;

/// Accepts the canonical names plus the short aliases "mse", "kl" and "gkl".
inline AnyGenerator make_generator(std::string_view name, std::size_t dimension) {
  if (name == "mse" || name == SquaredEuclidean::kName) return SquaredEuclidean(dimension);
  if (name == "kl" || name == NegativeEntropy::kName) return NegativeEntropy(dimension);
  if (name == "gkl" || name == GeneralizedIDivergence::kName) return GeneralizedIDivergence(dimension);
  throw UsageError("unknown generator '" + std::string(name) + "' (expected mse, kl or gkl)");
}

template <class Fn>
decltype(auto) with_generator(const AnyGenerator& gen, Fn&& fn) {
  return std::visit(std::forward<Fn>(fn), gen);
}

}  // namespace bvdual
