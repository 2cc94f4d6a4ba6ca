#include <gtest/gtest.h>

#include <atomic>
#include <random>
#include <set>

#include "bvdual/estimators.hpp"
#include "bvdual/toylab.hpp"
#include "oracles.hpp"

using namespace bvdual;

namespace {

/// Cheap deterministic trainer: logits follow the dataset's class frequencies
/// plus seed noise, so predictions depend on both data and seed.
TrainerHandle synthetic_trainer(std::size_t n_eval, std::size_t c, double noise,
                                std::atomic<int>* calls = nullptr) {
  return TrainerHandle{[=](const Dataset& d, std::uint64_t seed) {
                         if (calls) ++*calls;
                         Vector freq(c, 0.0);
                         for (int y : d.targets) freq[static_cast<std::size_t>(y)] += 1.0 / static_cast<double>(d.size());
                         double mean_x = 0.0;
                         for (double x : d.inputs) mean_x += x / static_cast<double>(d.inputs.size());
                         Stream stream(seed);
                         Predictions p(n_eval, c);
                         for (std::size_t e = 0; e < n_eval; ++e) {
                           Vector z(c);
                           for (std::size_t j = 0; j < c; ++j) {
                             z[j] = 3.0 * freq[j] + mean_x * static_cast<double>(j) +
                                    0.1 * static_cast<double>((e + j) % 3) + noise * stream.normal();
                           }
                           const Vector l = log_softmax(z);
                           std::copy(l.begin(), l.end(), p.row(e).begin());
                         }
                         return p;
                       },
                       true};
}

Dataset small_dataset(std::size_t n, std::uint64_t seed) {
  ToyWorld w;
  return draw_dataset(w, n, seed, "T");
}

std::vector<int> labels_for(std::size_t n, std::size_t c) {
  std::vector<int> y(n);
  for (std::size_t e = 0; e < n; ++e) y[e] = static_cast<int>(e % c);
  return y;
}

}  // namespace

TEST(BootstrapEstimate, Formula) {
  const auto same = make_bootstrap_estimate(0.3, 0.3);
  EXPECT_DOUBLE_EQ(same.t, 1.0);
  EXPECT_DOUBLE_EQ(same.b0, 0.3);
  const auto e = make_bootstrap_estimate(2.0, 4.0);
  EXPECT_DOUBLE_EQ(e.t, 0.5);
  EXPECT_DOUBLE_EQ(e.b0, 1.0);
  EXPECT_FALSE(e.degenerate);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(1e-3, 5.0);
  for (int i = 0; i < 1000; ++i) {
    const double b1 = u(rng), b2 = u(rng);
    const auto r = make_bootstrap_estimate(b1, b2);
    EXPECT_NEAR(r.b0, b1 * b1 / b2, 1e-12 * std::max(1.0, r.b0));
    EXPECT_NEAR(r.t, b1 / b2, 1e-12 * std::max(1.0, r.t));
    EXPECT_TRUE(std::isfinite(r.b0));
  }
}

TEST(BootstrapEstimate, DegenerateWhenLevelTwoIsNotPositive) {
  for (double b2 : {0.0, -1e-3}) {
    const auto r = make_bootstrap_estimate(0.5, b2);
    EXPECT_TRUE(r.degenerate);
    EXPECT_EQ(r.t, 1.0);
    EXPECT_EQ(r.b0, 0.5);
  }
}

TEST(BootstrapSample, SizeDeterminismAndId) {
  const Dataset d = small_dataset(50, 3);
  const Dataset a = bootstrap_sample(d, 11);
  EXPECT_EQ(a.size(), d.size());
  EXPECT_EQ(a, bootstrap_sample(d, 11));
  EXPECT_NE(a, bootstrap_sample(d, 12));
  EXPECT_EQ(a.id, "T+11");
}

TEST(BootstrapSample, UniqueFractionApproachesOneMinusInverseE) {
  Dataset d;
  d.dim = 1;
  for (int i = 0; i < 10000; ++i) {
    d.inputs.push_back(i);
    d.targets.push_back(0);
  }
  const Dataset s = bootstrap_sample(d, 5);
  const std::set<double> unique(s.inputs.begin(), s.inputs.end());
  const double frac = static_cast<double>(unique.size()) / 10000.0;
  EXPECT_NEAR(frac, 1.0 - std::exp(-1.0), 0.02);
}

TEST(DoubleBootstrap, TrainsTheFullTreeAndIsDeterministic) {
  std::atomic<int> calls{0};
  const auto trainer = synthetic_trainer(8, 3, 0.3, &calls);
  const Dataset T = small_dataset(40, 1);
  const auto y = labels_for(8, 3);
  const auto r = double_bootstrap_estimate(trainer, T, 4, 2, y, 9);
  EXPECT_EQ(r.models_trained, (4u + 16u) * 2u);
  EXPECT_EQ(calls.load(), 40);
  const auto again = double_bootstrap_estimate(trainer, T, 4, 2, y, 9);
  EXPECT_EQ(r.bias.b0, again.bias.b0);
  EXPECT_EQ(r.variance.b2, again.variance.b2);
  EXPECT_NEAR(r.bias.b0, r.bias.b1 * r.bias.b1 / r.bias.b2, 1e-12);
  EXPECT_THROW(double_bootstrap_estimate(trainer, T, 1, 1, y, 9), UsageError);
  EXPECT_THROW(double_bootstrap_estimate(trainer, T, 2, 0, y, 9), UsageError);
}

TEST(DoubleBootstrap, SerialTrainerGivesSameAnswer) {
  auto trainer = synthetic_trainer(6, 2, 0.5);
  const Dataset T = small_dataset(30, 2);
  const auto y = labels_for(6, 2);
  const auto a = double_bootstrap_estimate(trainer, T, 3, 1, y, 4);
  trainer.thread_safe = false;
  const auto b = double_bootstrap_estimate(trainer, T, 3, 1, y, 4);
  EXPECT_EQ(a.bias.b1, b.bias.b1);
  EXPECT_EQ(a.variance.b0, b.variance.b0);
}

TEST(DoubleBootstrap, IdenticalTrainerFlagsDegenerateVariance) {
  const auto trainer = TrainerHandle{[](const Dataset&, std::uint64_t) {
                                       Predictions p(3, 2);
                                       for (double& v : p.log_probs) v = std::log(0.5);
                                       return p;
                                     },
                                     true};
  const auto r = double_bootstrap_estimate(trainer, small_dataset(10, 1), 3, 1, labels_for(3, 2), 0);
  EXPECT_EQ(r.variance.b1, 0.0);
  EXPECT_TRUE(r.variance.degenerate);
}

TEST(Conditional, SeedBlindTrainerHasNoVariance) {
  const auto base = synthetic_trainer(10, 3, 0.0);
  const auto r = conditional_estimate(base, small_dataset(30, 1), 5, 1, labels_for(10, 3), 2);
  EXPECT_LE(std::abs(r.variance), 1e-12);
}

TEST(Conditional, TwoSeedsAreAdditive) {
  const auto trainer = synthetic_trainer(10, 3, 0.7);
  const auto y = labels_for(10, 3);
  const Dataset T = small_dataset(30, 1);
  const auto r = conditional_estimate(trainer, T, 2, 1, y, 2);
  // bias + variance equals the mean NLL of the two models
  double nll = 0.0;
  for (std::uint64_t s = 0; s < 2; ++s) {
    const Predictions p = trainer.train(T, derive_seed(derive_seed(2, {3, s}), {0}));
    for (std::size_t e = 0; e < 10; ++e) nll -= p.row(e)[static_cast<std::size_t>(y[e])] / 20.0;
  }
  EXPECT_NEAR(r.bias + r.variance, nll, 1e-9);
  EXPECT_THROW(conditional_estimate(trainer, T, 1, 1, y, 2), UsageError);
}

TEST(Partition, DeterminismErrorsAndSmoke) {
  const auto trainer = synthetic_trainer(5, 3, 0.2);
  const auto y = labels_for(5, 3);
  const Dataset T = small_dataset(20, 1);
  const auto a = partition_estimate(trainer, T, 4, 1, y, 3);
  const auto b = partition_estimate(trainer, T, 4, 1, y, 3);
  EXPECT_EQ(a.bias, b.bias);
  EXPECT_EQ(a.variance, b.variance);
  EXPECT_THROW(partition_estimate(trainer, T, 21, 1, y, 3), UsageError);
  EXPECT_THROW(partition_estimate(trainer, T, 1, 1, y, 3), UsageError);
  const auto singletons = partition_estimate(trainer, T, 20, 1, y, 3);
  EXPECT_TRUE(std::isfinite(singletons.variance));
  EXPECT_GT(singletons.variance, a.variance);
}

TEST(EnumerateConditional, GapIdentities) {
  const auto trainer = synthetic_trainer(12, 3, 0.4);
  std::vector<Dataset> sets;
  for (std::uint64_t t = 0; t < 4; ++t) {
    Dataset d = small_dataset(25, 100 + t);
    d.id = "set";
    sets.push_back(d);
  }
  const auto r = enumerate_conditional(trainer, sets, 3, labels_for(12, 3), 8);
  EXPECT_NEAR(r.conditional_bias - r.true_bias, r.gap, 1e-9);
  EXPECT_NEAR(r.true_variance - r.conditional_variance, r.gap, 1e-9);
  EXPECT_GT(r.gap, 0.0);
}

// Toy-world direction: smaller subsets give more spread between models.
TEST(Partition, VarianceFallsAsSubsetsGrow) {
  ToyWorld w;
  w.train_size = 512;
  w.eval_size = 256;
  const WorldData data = make_world(w);
  ToyModelConfig cfg;
  cfg.kind = ModelKind::logistic;
  cfg.steps = 150;
  const auto trainer = make_toy_trainer(cfg, data.eval, w.n_classes);
  const auto p16 = partition_estimate(trainer, data.train, 16, 1, data.eval_labels, 1);
  const auto p4 = partition_estimate(trainer, data.train, 4, 1, data.eval_labels, 1);
  EXPECT_LT(p4.variance, p16.variance);
}

// Conditional estimates overstate the bias and understate the variance
// relative to fresh-training-set truth.
TEST(Conditional, DirectionAgainstFreshSetTruth) {
  ToyWorld w;
  w.train_size = 64;
  w.eval_size = 256;
  const WorldData data = make_world(w);
  ToyModelConfig cfg;
  cfg.steps = 150;
  const auto trainer = make_toy_trainer(cfg, data.eval, w.n_classes);
  const auto truth = fresh_set_truth(w, trainer, 60, 1, data.eval_labels, 4);
  const auto cond = conditional_estimate(trainer, data.train, 8, 1, data.eval_labels, 5);
  EXPECT_LT(cond.variance, truth.variance);
}
