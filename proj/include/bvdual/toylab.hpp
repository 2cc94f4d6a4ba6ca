#pragma once

// Desk-scale stand-in for the deep-learning experiments: Gaussian-mixture
// worlds and small softmax classifiers (multinomial logistic regression and
// ReLU MLPs) trained by full-batch gradient descent.

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "bvdual/decomposition.hpp"
#include "bvdual/error.hpp"
#include "bvdual/estimators.hpp"
#include "bvdual/numeric.hpp"
#include "bvdual/parallel.hpp"
#include "bvdual/pool.hpp"
#include "bvdual/rng.hpp"

namespace bvdual {

struct ToyWorld {
  std::size_t n_classes = 3;
  std::size_t dim = 2;
  /// One mean per class; when empty, means are spread evenly on a circle of
  /// radius `separation` in the first two coordinates.
  std::vector<Vector> class_means;
  double separation = 2.0;
  double noise_scale = 1.0;
  std::size_t train_size = 512;
  std::size_t eval_size = 2048;
  std::uint64_t master_seed = 0;

  void validate() const {
    if (n_classes < 2) throw ValidationError("world.n_classes", "must be at least 2");
    if (dim < 1) throw ValidationError("world.dim", "must be at least 1");
    if (!(noise_scale >= 0.0)) throw ValidationError("world.noise_scale", "must be non-negative");
    if (train_size < 1) throw ValidationError("world.train_size", "must be at least 1");
    if (eval_size < 1) throw ValidationError("world.eval_size", "must be at least 1");
    if (!class_means.empty()) {
      if (class_means.size() != n_classes) {
        throw ValidationError("world.class_means", "need one mean per class");
      }
      for (std::size_t k = 0; k < n_classes; ++k) {
        if (class_means[k].size() != dim) {
          throw ValidationError("world.class_means[" + std::to_string(k) + "]",
                                "dimension must equal world.dim");
        }
        for (std::size_t l = 0; l < k; ++l) {
          if (class_means[k] == class_means[l]) {
            throw ValidationError("world.class_means[" + std::to_string(k) + "]",
                                  "duplicates class_means[" + std::to_string(l) + "]");
          }
        }
      }
    } else if (dim < 2 && n_classes > 2) {
      throw ValidationError("world.dim", "default means need dim >= 2 for more than 2 classes");
    } else if (!(separation > 0.0)) {
      throw ValidationError("world.separation", "must be positive");
    }
  }

  Vector mean_of(std::size_t k) const {
    if (!class_means.empty()) return class_means[k];
    Vector m(dim, 0.0);
    const double angle = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n_classes);
    m[0] = separation * std::cos(angle);
    if (dim > 1) m[1] = separation * std::sin(angle);
    return m;
  }
};

/// n i.i.d. samples: class uniform over n_classes, x ~ N(mean_class, noise^2 I).
inline Dataset draw_dataset(const ToyWorld& world, std::size_t n, std::uint64_t seed, std::string id) {
  world.validate();
  Stream stream(seed);
  Dataset d;
  d.dim = world.dim;
  d.id = std::move(id);
  d.inputs.reserve(n * world.dim);
  d.targets.reserve(n);
  std::vector<Vector> means(world.n_classes);
  for (std::size_t k = 0; k < world.n_classes; ++k) means[k] = world.mean_of(k);
  for (std::size_t i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(stream.index(world.n_classes));
    d.targets.push_back(static_cast<int>(k));
    for (std::size_t j = 0; j < world.dim; ++j) {
      d.inputs.push_back(means[k][j] + world.noise_scale * stream.normal());
    }
  }
  return d;
}

struct WorldData {
  Dataset train;
  Dataset eval;
  std::vector<int> eval_labels;
};

/// The fixed training and evaluation sets of a world.
inline WorldData make_world(const ToyWorld& world) {
  WorldData w;
  w.train = draw_dataset(world, world.train_size, derive_seed(world.master_seed, {1}), "train");
  w.eval = draw_dataset(world, world.eval_size, derive_seed(world.master_seed, {2}), "eval");
  w.eval_labels = w.eval.targets;
  return w;
}

/// Fresh training set number `index`, independent of the fixed one.
inline Dataset fresh_training_set(const ToyWorld& world, std::size_t index) {
  return draw_dataset(world, world.train_size, derive_seed(world.master_seed, {3, index}),
                      "fresh" + std::to_string(index));
}

// ---------------------------------------------------------------------------
// Models

enum class ModelKind { logistic, mlp };

inline std::string_view to_string(ModelKind k) { return k == ModelKind::logistic ? "logistic" : "mlp"; }

inline ModelKind parse_model_kind(std::string_view s) {
  if (s == "logistic") return ModelKind::logistic;
  if (s == "mlp") return ModelKind::mlp;
  throw ValidationError("kind", "unknown model kind '" + std::string(s) + "'");
}

struct ToyModelConfig {
  ModelKind kind = ModelKind::mlp;
  std::size_t hidden_width = 16;
  std::size_t depth = 1;  // hidden layers (mlp only)
  double l2 = 1e-3;
  double label_smoothing = 0.0;
  std::size_t steps = 300;
  double step_size = 0.5;

  void validate(const std::string& path = "model") const {
    if (kind == ModelKind::mlp) {
      if (hidden_width < 1) throw ValidationError(path + ".hidden_width", "must be at least 1");
      if (depth < 1) throw ValidationError(path + ".depth", "must be at least 1");
    }
    if (!(l2 >= 0.0)) throw ValidationError(path + ".l2", "must be non-negative");
    if (!(label_smoothing >= 0.0 && label_smoothing < 1.0)) {
      throw ValidationError(path + ".label_smoothing", "must lie in [0, 1)");
    }
    if (steps < 1) throw ValidationError(path + ".steps", "must be at least 1");
    if (!(step_size > 0.0)) throw ValidationError(path + ".step_size", "must be positive");
  }
};

/// Softmax classifier with flat parameter vector. The logistic kind has no
/// hidden layer and starts from zero; the MLP uses ReLU hidden layers with
/// He-normal weights drawn from the seed.
class ToyNetwork {
 public:
  using Matrix = Eigen::MatrixXd;
  using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  ToyNetwork(ToyModelConfig cfg, std::size_t input_dim, std::size_t n_classes)
      : cfg_(std::move(cfg)), n_classes_(n_classes) {
    cfg_.validate();
    sizes_.push_back(input_dim);
    if (cfg_.kind == ModelKind::mlp) {
      for (std::size_t l = 0; l < cfg_.depth; ++l) sizes_.push_back(cfg_.hidden_width);
    }
    sizes_.push_back(n_classes);
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
      offsets_.push_back(n_params_);
      n_params_ += sizes_[l + 1] * sizes_[l] + sizes_[l + 1];
    }
  }

  const ToyModelConfig& config() const noexcept { return cfg_; }
  std::size_t parameter_count() const noexcept { return n_params_; }
  std::size_t layer_count() const noexcept { return sizes_.size() - 1; }

  Eigen::VectorXd initial_parameters(std::uint64_t seed) const {
    Eigen::VectorXd p = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_params_));
    if (cfg_.kind == ModelKind::logistic) return p;
    Stream stream(seed);
    for (std::size_t l = 0; l < layer_count(); ++l) {
      const double scale = std::sqrt(2.0 / static_cast<double>(sizes_[l]));
      const std::size_t nw = sizes_[l + 1] * sizes_[l];
      for (std::size_t i = 0; i < nw; ++i) {
        p[static_cast<Eigen::Index>(offsets_[l] + i)] = scale * stream.normal();
      }
    }
    return p;
  }

  /// Mean cross-entropy against label-smoothed targets plus (l2 / 2) * ||W||^2
  /// over weight matrices (biases are not penalized), with its gradient.
  std::pair<double, Eigen::VectorXd> loss_and_gradient(const Eigen::VectorXd& params,
                                                       const Dataset& d) const {
    const auto n = static_cast<Eigen::Index>(d.size());
    std::vector<Matrix> acts;  // acts[l] is the input of layer l
    std::vector<Matrix> pre;   // pre-activations
    acts.push_back(input_matrix(d));
    for (std::size_t l = 0; l < layer_count(); ++l) {
      Matrix z = acts.back() * weights(params, l).transpose();
      z.rowwise() += bias(params, l).transpose();
      pre.push_back(z);
      if (l + 1 < layer_count()) acts.push_back(z.cwiseMax(0.0));
    }
    Matrix logp = pre.back();
    log_softmax_rows(logp);
    const Matrix targets = smoothed_targets(d);

    double loss = -(targets.cwiseProduct(logp)).sum() / static_cast<double>(n);
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(params.size());
    Matrix delta = (logp.array().exp().matrix() - targets) / static_cast<double>(n);
    for (std::size_t l = layer_count(); l-- > 0;) {
      const auto W = weights(params, l);
      loss += 0.5 * cfg_.l2 * W.squaredNorm();
      Matrix gW = delta.transpose() * acts[l] + cfg_.l2 * W;
      Eigen::VectorXd gb = delta.colwise().sum().transpose();
      weights_of(grad, l) = gW;
      bias_of(grad, l) = gb;
      if (l > 0) {
        Matrix back = delta * W;
        delta = back.cwiseProduct((pre[l - 1].array() > 0.0).cast<double>().matrix());
      }
    }
    return {loss, grad};
  }

  double loss(const Eigen::VectorXd& params, const Dataset& d) const {
    return loss_and_gradient(params, d).first;
  }

  /// Floored log-probabilities on every row of `d`.
  Predictions predict(const Eigen::VectorXd& params, const Dataset& d) const {
    Matrix a = input_matrix(d);
    for (std::size_t l = 0; l < layer_count(); ++l) {
      Matrix z = a * weights(params, l).transpose();
      z.rowwise() += bias(params, l).transpose();
      a = (l + 1 < layer_count()) ? Matrix(z.cwiseMax(0.0)) : z;
    }
    Predictions out(d.size(), n_classes_);
    for (std::size_t i = 0; i < d.size(); ++i) {
      auto row = out.row(i);
      for (std::size_t j = 0; j < n_classes_; ++j) {
        row[j] = a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      }
      floor_log_row(row);
    }
    return out;
  }

 private:
  Matrix input_matrix(const Dataset& d) const {
    if (d.dim != sizes_.front()) throw UsageError("dataset dimension does not match the model");
    return Eigen::Map<const RowMatrix>(d.inputs.data(), static_cast<Eigen::Index>(d.size()),
                                       static_cast<Eigen::Index>(d.dim));
  }

  Matrix smoothed_targets(const Dataset& d) const {
    const double s = cfg_.label_smoothing;
    const double off = s / static_cast<double>(n_classes_);
    Matrix t = Matrix::Constant(static_cast<Eigen::Index>(d.size()),
                                static_cast<Eigen::Index>(n_classes_), off);
    for (std::size_t i = 0; i < d.size(); ++i) {
      const int y = d.targets[i];
      if (y < 0 || static_cast<std::size_t>(y) >= n_classes_) {
        throw UsageError("target " + std::to_string(y) + " out of range");
      }
      t(static_cast<Eigen::Index>(i), y) = 1.0 - s + off;
    }
    return t;
  }

  static void log_softmax_rows(Matrix& z) {
    const Eigen::VectorXd m = z.rowwise().maxCoeff();
    z.colwise() -= m;
    const Eigen::VectorXd lse = z.array().exp().rowwise().sum().log().matrix();
    z.colwise() -= lse;
  }

  Eigen::Map<const Matrix> weights(const Eigen::VectorXd& p, std::size_t l) const {
    return {p.data() + offsets_[l], static_cast<Eigen::Index>(sizes_[l + 1]),
            static_cast<Eigen::Index>(sizes_[l])};
  }
  Eigen::Map<const Eigen::VectorXd> bias(const Eigen::VectorXd& p, std::size_t l) const {
    return {p.data() + offsets_[l] + sizes_[l + 1] * sizes_[l],
            static_cast<Eigen::Index>(sizes_[l + 1])};
  }
  Eigen::Map<Matrix> weights_of(Eigen::VectorXd& p, std::size_t l) const {
    return {p.data() + offsets_[l], static_cast<Eigen::Index>(sizes_[l + 1]),
            static_cast<Eigen::Index>(sizes_[l])};
  }
  Eigen::Map<Eigen::VectorXd> bias_of(Eigen::VectorXd& p, std::size_t l) const {
    return {p.data() + offsets_[l] + sizes_[l + 1] * sizes_[l],
            static_cast<Eigen::Index>(sizes_[l + 1])};
  }

  ToyModelConfig cfg_;
  std::size_t n_classes_;
  std::vector<std::size_t> sizes_;
  std::vector<std::size_t> offsets_;
  std::size_t n_params_ = 0;
};

struct FittedModel {
  Eigen::VectorXd params;
  double final_loss = 0.0;
};

/// Full-batch gradient descent from the seed's initialization.
inline FittedModel fit_toy(const ToyNetwork& net, const Dataset& d, std::uint64_t seed) {
  d.validate();
  FittedModel fit{net.initial_parameters(seed), 0.0};
  const double lr = net.config().step_size;
  for (std::size_t step = 0; step < net.config().steps; ++step) {
    auto [loss, grad] = net.loss_and_gradient(fit.params, d);
    if (!std::isfinite(loss) || !grad.allFinite()) throw TrainingDivergence(step);
    fit.params -= lr * grad;
  }
  fit.final_loss = net.loss(fit.params, d);
  if (!std::isfinite(fit.final_loss)) throw TrainingDivergence(net.config().steps);
  return fit;
}

/// Train on `d` with `seed` and predict on `eval`.
inline Predictions train_toy(const ToyModelConfig& cfg, const Dataset& d, std::uint64_t seed,
                             const Dataset& eval, std::size_t n_classes) {
  const ToyNetwork net(cfg, d.dim, n_classes);
  return net.predict(fit_toy(net, d, seed).params, eval);
}

/// TrainerHandle bound to a model configuration and evaluation set.
inline TrainerHandle make_toy_trainer(ToyModelConfig cfg, Dataset eval, std::size_t n_classes) {
  cfg.validate();
  return TrainerHandle{[cfg = std::move(cfg), eval = std::move(eval), n_classes](
                           const Dataset& d, std::uint64_t seed) {
                         return train_toy(cfg, d, seed, eval, n_classes);
                       },
                       true};
}

/// Ground truth by fresh training sets: k-member ensembles trained on
/// `n_sets` independent draws of the world's training distribution (set t
/// trains with seed derive_seed(seed, {t})).
inline BiasVariance fresh_set_truth(const ToyWorld& world, const TrainerHandle& trainer,
                                    std::size_t n_sets, std::size_t k,
                                    std::span<const int> eval_labels, std::uint64_t seed) {
  if (n_sets < 2) throw UsageError("ground truth needs at least 2 fresh training sets");
  std::vector<Predictions> preds(n_sets);
  parallel_for(
      n_sets,
      [&](std::size_t t) {
        preds[t] = detail::train_ensemble(trainer, fresh_training_set(world, t), k,
                                          derive_seed(seed, {t}));
      },
      detail::trainer_threads(trainer));
  return kl_bias_variance(preds, eval_labels);
}

}  // namespace bvdual
