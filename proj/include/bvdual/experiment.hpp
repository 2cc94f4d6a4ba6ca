#pragma once

// Sweep harness: train a grid of toy models over {seed | training set} x
// {architecture / hyperparameters}, then run the requested analyses.
//
// Spec file (JSON), all fields optional except "models":
//   {
//     "world":  {"n_classes": 3, "dim": 2, "separation": 2.0, "noise_scale": 1.0,
//                "train_size": 512, "eval_size": 2048, "master_seed": 0,
//                "class_means": [[...], ...]},
//     "models": [{"name": "d1", "kind": "mlp", "depth": 1, "hidden_width": 16,
//                 "l2": 1e-3, "label_smoothing": 0, "steps": 300, "step_size": 0.5,
//                 "count": 16}, ...],
//     "randomness": "seed" | "train_set",
//     "analyses": ["decompose", "curve", "bootstrap", "conditional", "partition", "greedy"],
//     "pools": [{"name": "mixed", "groups": ["d1", "d3"]}, ...],
//     "modes": ["primal", "dual"], "ks": [1, 2, 4, 8], "draws": 20,
//     "with_replacement": true,
//     "bootstrap": {"B": 4, "k": 1, "n_seeds": 8, "truth_sets": 0},
//     "partitions": [4, 16], "greedy": {"budget": 8, "validation_size": 512},
//     "seed": 0
//   }

#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "bvdual/decomposition.hpp"
#include "bvdual/ensembling.hpp"
#include "bvdual/error.hpp"
#include "bvdual/estimators.hpp"
#include "bvdual/parallel.hpp"
#include "bvdual/pool.hpp"
#include "bvdual/prediction_log.hpp"
#include "bvdual/report.hpp"
#include "bvdual/rng.hpp"
#include "bvdual/toylab.hpp"

namespace bvdual {

struct ModelSpec {
  std::string name;
  ToyModelConfig config;
  std::size_t count = 8;
};

struct PoolSpec {
  std::string name;
  std::vector<std::string> groups;
};

enum class Randomness { seed, train_set };

struct ExperimentSpec {
  ToyWorld world;
  std::vector<ModelSpec> models;
  Randomness randomness = Randomness::seed;
  std::vector<std::string> analyses{"decompose"};
  std::vector<PoolSpec> pools;
  std::vector<EnsembleMode> modes{EnsembleMode::primal, EnsembleMode::dual};
  std::vector<std::size_t> ks{1, 2, 4, 8};
  std::size_t draws = 20;
  bool with_replacement = true;
  std::size_t bootstrap_B = 4;
  std::size_t bootstrap_k = 1;
  std::size_t n_seeds = 8;
  std::size_t truth_sets = 0;
  std::vector<std::size_t> partitions{4};
  std::size_t greedy_budget = 8;
  std::size_t validation_size = 512;
  std::uint64_t seed = 0;

  bool wants(const std::string& analysis) const {
    for (const auto& a : analyses) {
      if (a == analysis) return true;
    }
    return false;
  }

  /// Every pool to analyze; an implicit "all" pool when none are declared.
  std::vector<PoolSpec> resolved_pools() const {
    if (!pools.empty()) return pools;
    PoolSpec all{"all", {}};
    for (const auto& m : models) all.groups.push_back(m.name);
    return {all};
  }

  void validate() const {
    world.validate();
    if (models.empty()) throw ValidationError("models", "must list at least one model");
    std::set<std::string> names;
    for (std::size_t i = 0; i < models.size(); ++i) {
      const std::string path = "models[" + std::to_string(i) + "]";
      if (models[i].name.empty()) throw ValidationError(path + ".name", "must be non-empty");
      if (models[i].name.find_first_of("\t\n\r") != std::string::npos) {
        throw ValidationError(path + ".name", "may not contain tabs or newlines");
      }
      if (!names.insert(models[i].name).second) {
        throw ValidationError(path + ".name", "duplicate model name '" + models[i].name + "'");
      }
      if (models[i].count < 1) throw ValidationError(path + ".count", "must be at least 1");
      models[i].config.validate(path);
    }
    static const std::set<std::string> known{"decompose", "curve",     "bootstrap",
                                             "conditional", "partition", "greedy"};
    for (std::size_t i = 0; i < analyses.size(); ++i) {
      if (!known.contains(analyses[i])) {
        throw ValidationError("analyses[" + std::to_string(i) + "]", "unknown analysis '" + analyses[i] + "'");
      }
    }
    for (std::size_t i = 0; i < pools.size(); ++i) {
      const std::string path = "pools[" + std::to_string(i) + "]";
      if (pools[i].groups.empty()) throw ValidationError(path + ".groups", "must be non-empty");
      for (std::size_t j = 0; j < pools[i].groups.size(); ++j) {
        if (!names.contains(pools[i].groups[j])) {
          throw ValidationError(path + ".groups[" + std::to_string(j) + "]",
                                "no model named '" + pools[i].groups[j] + "'");
        }
      }
    }
    if (modes.empty()) throw ValidationError("modes", "must be non-empty");
    if (ks.empty()) throw ValidationError("ks", "must be non-empty");
    for (std::size_t i = 0; i < ks.size(); ++i) {
      if (ks[i] < 1) throw ValidationError("ks[" + std::to_string(i) + "]", "must be at least 1");
    }
    if (draws < 1) throw ValidationError("draws", "must be at least 1");
    if (bootstrap_B < 2) throw ValidationError("bootstrap.B", "must be at least 2");
    if (bootstrap_k < 1) throw ValidationError("bootstrap.k", "must be at least 1");
    if (n_seeds < 2) throw ValidationError("bootstrap.n_seeds", "must be at least 2");
    if (truth_sets == 1) throw ValidationError("bootstrap.truth_sets", "must be 0 or at least 2");
    for (std::size_t i = 0; i < partitions.size(); ++i) {
      if (partitions[i] < 2 || partitions[i] > world.train_size) {
        throw ValidationError("partitions[" + std::to_string(i) + "]",
                              "must lie in [2, world.train_size]");
      }
    }
    if (validation_size < 1) throw ValidationError("greedy.validation_size", "must be at least 1");
  }

  static ExperimentSpec from_json(const nlohmann::json& j);
  nlohmann::ordered_json to_json() const;
};

namespace detail {

template <class T>
T json_get(const nlohmann::json& obj, const char* key, const std::string& path, T fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ValidationError(path.empty() ? key : path + "." + key, "has the wrong type");
  }
}

inline void require_object(const nlohmann::json& j, const std::string& path) {
  if (!j.is_object()) throw ValidationError(path, "must be an object");
}

inline void reject_unknown(const nlohmann::json& j, const std::string& path,
                           std::initializer_list<const char*> allowed) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* a : allowed) ok |= it.key() == a;
    if (!ok) throw ValidationError(path.empty() ? it.key() : path + "." + it.key(), "unknown field");
  }
}

}  // namespace detail

inline ExperimentSpec ExperimentSpec::from_json(const nlohmann::json& j) {
  using detail::json_get;
  detail::require_object(j, "spec");
  detail::reject_unknown(j, "", {"world", "models", "randomness", "analyses", "pools", "modes", "ks",
                                 "draws", "with_replacement", "bootstrap", "partitions", "greedy", "seed"});
  ExperimentSpec s;
  if (j.contains("world")) {
    const auto& w = j["world"];
    detail::require_object(w, "world");
    detail::reject_unknown(w, "world", {"n_classes", "dim", "class_means", "separation", "noise_scale",
                                        "train_size", "eval_size", "master_seed"});
    s.world.n_classes = json_get<std::size_t>(w, "n_classes", "world", s.world.n_classes);
    s.world.dim = json_get<std::size_t>(w, "dim", "world", s.world.dim);
    s.world.class_means = json_get<std::vector<Vector>>(w, "class_means", "world", {});
    s.world.separation = json_get<double>(w, "separation", "world", s.world.separation);
    s.world.noise_scale = json_get<double>(w, "noise_scale", "world", s.world.noise_scale);
    s.world.train_size = json_get<std::size_t>(w, "train_size", "world", s.world.train_size);
    s.world.eval_size = json_get<std::size_t>(w, "eval_size", "world", s.world.eval_size);
    s.world.master_seed = json_get<std::uint64_t>(w, "master_seed", "world", s.world.master_seed);
  }
  if (!j.contains("models") || !j["models"].is_array()) {
    throw ValidationError("models", "must be an array of model entries");
  }
  for (std::size_t i = 0; i < j["models"].size(); ++i) {
    const auto& m = j["models"][i];
    const std::string path = "models[" + std::to_string(i) + "]";
    detail::require_object(m, path);
    detail::reject_unknown(m, path, {"name", "kind", "depth", "hidden_width", "l2", "label_smoothing",
                                     "steps", "step_size", "count"});
    ModelSpec ms;
    ms.name = json_get<std::string>(m, "name", path, "model" + std::to_string(i));
    try {
      ms.config.kind = parse_model_kind(json_get<std::string>(m, "kind", path, "mlp"));
    } catch (const ValidationError&) {
      throw ValidationError(path + ".kind", "must be \"logistic\" or \"mlp\"");
    }
    ms.config.depth = json_get<std::size_t>(m, "depth", path, ms.config.depth);
    ms.config.hidden_width = json_get<std::size_t>(m, "hidden_width", path, ms.config.hidden_width);
    ms.config.l2 = json_get<double>(m, "l2", path, ms.config.l2);
    ms.config.label_smoothing = json_get<double>(m, "label_smoothing", path, ms.config.label_smoothing);
    ms.config.steps = json_get<std::size_t>(m, "steps", path, ms.config.steps);
    ms.config.step_size = json_get<double>(m, "step_size", path, ms.config.step_size);
    ms.count = json_get<std::size_t>(m, "count", path, ms.count);
    s.models.push_back(std::move(ms));
  }
  const std::string randomness = json_get<std::string>(j, "randomness", "", "seed");
  if (randomness == "seed") {
    s.randomness = Randomness::seed;
  } else if (randomness == "train_set") {
    s.randomness = Randomness::train_set;
  } else {
    throw ValidationError("randomness", "must be \"seed\" or \"train_set\"");
  }
  s.analyses = json_get<std::vector<std::string>>(j, "analyses", "", s.analyses);
  if (j.contains("pools")) {
    if (!j["pools"].is_array()) throw ValidationError("pools", "must be an array");
    for (std::size_t i = 0; i < j["pools"].size(); ++i) {
      const auto& p = j["pools"][i];
      const std::string path = "pools[" + std::to_string(i) + "]";
      detail::require_object(p, path);
      detail::reject_unknown(p, path, {"name", "groups"});
      s.pools.push_back(PoolSpec{json_get<std::string>(p, "name", path, "pool" + std::to_string(i)),
                                 json_get<std::vector<std::string>>(p, "groups", path, {})});
    }
  }
  if (j.contains("modes")) {
    s.modes.clear();
    const auto names = json_get<std::vector<std::string>>(j, "modes", "", {});
    for (std::size_t i = 0; i < names.size(); ++i) {
      try {
        s.modes.push_back(parse_ensemble_mode(names[i]));
      } catch (const UsageError& e) {
        throw ValidationError("modes[" + std::to_string(i) + "]", e.what());
      }
    }
  }
  s.ks = json_get<std::vector<std::size_t>>(j, "ks", "", s.ks);
  s.draws = json_get<std::size_t>(j, "draws", "", s.draws);
  s.with_replacement = json_get<bool>(j, "with_replacement", "", s.with_replacement);
  if (j.contains("bootstrap")) {
    const auto& b = j["bootstrap"];
    detail::require_object(b, "bootstrap");
    detail::reject_unknown(b, "bootstrap", {"B", "k", "n_seeds", "truth_sets"});
    s.bootstrap_B = json_get<std::size_t>(b, "B", "bootstrap", s.bootstrap_B);
    s.bootstrap_k = json_get<std::size_t>(b, "k", "bootstrap", s.bootstrap_k);
    s.n_seeds = json_get<std::size_t>(b, "n_seeds", "bootstrap", s.n_seeds);
    s.truth_sets = json_get<std::size_t>(b, "truth_sets", "bootstrap", s.truth_sets);
  }
  s.partitions = json_get<std::vector<std::size_t>>(j, "partitions", "", s.partitions);
  if (j.contains("greedy")) {
    const auto& g = j["greedy"];
    detail::require_object(g, "greedy");
    detail::reject_unknown(g, "greedy", {"budget", "validation_size"});
    s.greedy_budget = json_get<std::size_t>(g, "budget", "greedy", s.greedy_budget);
    s.validation_size = json_get<std::size_t>(g, "validation_size", "greedy", s.validation_size);
  }
  s.seed = json_get<std::uint64_t>(j, "seed", "", s.seed);
  s.validate();
  return s;
}

inline nlohmann::ordered_json ExperimentSpec::to_json() const {
  nlohmann::ordered_json j;
  auto& w = j["world"];
  w["n_classes"] = world.n_classes;
  w["dim"] = world.dim;
  if (!world.class_means.empty()) w["class_means"] = world.class_means;
  w["separation"] = world.separation;
  w["noise_scale"] = world.noise_scale;
  w["train_size"] = world.train_size;
  w["eval_size"] = world.eval_size;
  w["master_seed"] = world.master_seed;
  j["models"] = nlohmann::ordered_json::array();
  for (const auto& m : models) {
    nlohmann::ordered_json e;
    e["name"] = m.name;
    e["kind"] = to_string(m.config.kind);
    e["depth"] = m.config.depth;
    e["hidden_width"] = m.config.hidden_width;
    e["l2"] = m.config.l2;
    e["label_smoothing"] = m.config.label_smoothing;
    e["steps"] = m.config.steps;
    e["step_size"] = m.config.step_size;
    e["count"] = m.count;
    j["models"].push_back(e);
  }
  j["randomness"] = randomness == Randomness::seed ? "seed" : "train_set";
  j["analyses"] = analyses;
  j["pools"] = nlohmann::ordered_json::array();
  for (const auto& p : pools) j["pools"].push_back({{"name", p.name}, {"groups", p.groups}});
  j["modes"] = nlohmann::ordered_json::array();
  for (auto m : modes) j["modes"].push_back(to_string(m));
  j["ks"] = ks;
  j["draws"] = draws;
  j["with_replacement"] = with_replacement;
  j["bootstrap"] = {{"B", bootstrap_B}, {"k", bootstrap_k}, {"n_seeds", n_seeds}, {"truth_sets", truth_sets}};
  j["partitions"] = partitions;
  j["greedy"] = {{"budget", greedy_budget}, {"validation_size", validation_size}};
  j["seed"] = seed;
  return j;
}

/// Trained grid: predictions on the evaluation set (and on a validation set
/// when greedy selection is requested), tagged seed / train_id / group.
struct TrainedGrid {
  WorldData world;
  PredictionPool eval;
  PredictionPool validation;
  std::vector<int> validation_labels;
};

/// Model entry i, replicate s trains with seed derive_seed(spec.seed, {i, s}),
/// on the fixed training set (randomness = seed) or on fresh training set s
/// (randomness = train_set).
inline TrainedGrid train_grid(const ExperimentSpec& spec, bool with_validation = false) {
  spec.validate();
  TrainedGrid grid;
  grid.world = make_world(spec.world);
  Dataset validation;
  if (with_validation) {
    validation = draw_dataset(spec.world, spec.validation_size, derive_seed(spec.world.master_seed, {4}),
                              "validation");
    grid.validation_labels = validation.targets;
  }

  struct Job {
    std::size_t entry, replicate;
  };
  std::vector<Job> jobs;
  for (std::size_t i = 0; i < spec.models.size(); ++i) {
    for (std::size_t s = 0; s < spec.models[i].count; ++s) jobs.push_back({i, s});
  }
  std::vector<Predictions> eval_preds(jobs.size()), val_preds(jobs.size());
  std::vector<Provenance> tags(jobs.size());
  parallel_for(jobs.size(), [&](std::size_t n) {
    const auto [i, s] = jobs[n];
    const ModelSpec& ms = spec.models[i];
    const bool fresh = spec.randomness == Randomness::train_set;
    const Dataset train = fresh ? fresh_training_set(spec.world, s) : grid.world.train;
    const ToyNetwork net(ms.config, spec.world.dim, spec.world.n_classes);
    const FittedModel fit = fit_toy(net, train, derive_seed(spec.seed, {i, s}));
    eval_preds[n] = net.predict(fit.params, grid.world.eval);
    if (with_validation) val_preds[n] = net.predict(fit.params, validation);
    tags[n] = Provenance{static_cast<std::int64_t>(s), train.id, ms.name};
  });
  for (std::size_t n = 0; n < jobs.size(); ++n) {
    grid.eval.add(std::move(eval_preds[n]), tags[n]);
    if (with_validation) grid.validation.add(std::move(val_preds[n]), tags[n]);
  }
  return grid;
}

/// Models of `pool` whose group tag is one of `groups`, in pool order.
inline std::vector<std::size_t> pool_members(const PredictionPool& pool, const std::vector<std::string>& groups) {
  std::vector<std::size_t> idx;
  for (std::size_t m = 0; m < pool.n_models(); ++m) {
    for (const auto& g : groups) {
      if (pool.tags[m].group && *pool.tags[m].group == g) {
        idx.push_back(m);
        break;
      }
    }
  }
  return idx;
}

struct ExperimentResult {
  PredictionLog log;
  std::vector<int> labels;
  std::vector<Table> tables;
};

inline ExperimentResult run_experiment(const ExperimentSpec& spec) {
  spec.validate();
  const TrainedGrid grid = train_grid(spec, spec.wants("greedy"));
  ExperimentResult result;
  result.log.generator = "kl";
  result.log.pool = grid.eval;
  result.labels = grid.world.eval_labels;
  const auto& labels = result.labels;

  if (spec.wants("decompose")) {
    Table t{"decompose", {"pool", "n_models", "bias", "variance", "nll", "cond_bias", "cond_variance", "gap"}, {}};
    for (const auto& p : spec.resolved_pools()) {
      const PredictionPool sub = grid.eval.subset(pool_members(grid.eval, p.groups));
      const BiasVariance total = kl_bias_variance(sub.models, labels);
      // Conditioning on the group tag: per-group closed forms, weighted by group size.
      double cb = 0.0, cv = 0.0;
      for (const auto& g : p.groups) {
        const PredictionPool gp = grid.eval.subset(pool_members(grid.eval, {g}));
        const double w = static_cast<double>(gp.n_models()) / static_cast<double>(sub.n_models());
        const BiasVariance bv = kl_bias_variance(gp.models, labels);
        cb += w * bv.bias;
        cv += w * bv.variance;
      }
      t.rows.push_back({p.name, static_cast<std::int64_t>(sub.n_models()), total.bias, total.variance,
                        total.nll(), cb, cv, cb - total.bias});
    }
    result.tables.push_back(std::move(t));
  }

  if (spec.wants("curve")) {
    Table t{"curve", {"pool", "mode", "k", "bias", "bias_se", "variance", "variance_se", "nll", "nll_se"}, {}};
    const Sampling sampling = spec.with_replacement ? Sampling::with_replacement : Sampling::without_replacement;
    for (std::size_t pi = 0; pi < spec.resolved_pools().size(); ++pi) {
      const auto p = spec.resolved_pools()[pi];
      const PredictionPool sub = grid.eval.subset(pool_members(grid.eval, p.groups));
      for (EnsembleMode mode : spec.modes) {
        const EnsembleCurve c = ensemble_curve(sub, labels, mode, spec.ks, spec.draws,
                                               derive_seed(spec.seed, {100, pi}), sampling);
        for (std::size_t i = 0; i < c.ks.size(); ++i) {
          t.rows.push_back({p.name, std::string(to_string(mode)), static_cast<std::int64_t>(c.ks[i]), c.bias[i],
                            c.bias_stderr[i], c.variance[i], c.variance_stderr[i], c.nll[i], c.nll_stderr[i]});
        }
      }
    }
    result.tables.push_back(std::move(t));
  }

  const bool estimator = spec.wants("bootstrap") || spec.wants("conditional") || spec.wants("partition");
  if (estimator) {
    const ModelSpec& ms = spec.models.front();
    const TrainerHandle trainer = make_toy_trainer(ms.config, grid.world.eval, spec.world.n_classes);
    const Dataset& T = grid.world.train;
    std::optional<BiasVariance> truth;
    if (spec.truth_sets >= 2) {
      truth = fresh_set_truth(spec.world, trainer, spec.truth_sets, spec.bootstrap_k, labels,
                              derive_seed(spec.seed, {200}));
    }
    const double nan = std::numeric_limits<double>::quiet_NaN();
    if (spec.wants("conditional") || spec.wants("bootstrap")) {
      const BiasVariance cond = conditional_estimate(trainer, T, spec.n_seeds, spec.bootstrap_k, labels,
                                                     derive_seed(spec.seed, {201}));
      Table t{"conditional", {"quantity", "conditional", "truth"}, {}};
      t.rows.push_back({std::string("bias"), cond.bias, truth ? truth->bias : nan});
      t.rows.push_back({std::string("variance"), cond.variance, truth ? truth->variance : nan});
      result.tables.push_back(std::move(t));
    }
    if (spec.wants("bootstrap")) {
      const DoubleBootstrapResult b = double_bootstrap_estimate(trainer, T, spec.bootstrap_B, spec.bootstrap_k,
                                                                labels, derive_seed(spec.seed, {202}));
      Table t{"bootstrap", {"quantity", "b1", "b2", "t", "b0", "degenerate", "truth"}, {}};
      t.rows.push_back({std::string("bias"), b.bias.b1, b.bias.b2, b.bias.t, b.bias.b0,
                        static_cast<std::int64_t>(b.bias.degenerate), truth ? truth->bias : nan});
      t.rows.push_back({std::string("variance"), b.variance.b1, b.variance.b2, b.variance.t, b.variance.b0,
                        static_cast<std::int64_t>(b.variance.degenerate), truth ? truth->variance : nan});
      result.tables.push_back(std::move(t));
    }
    if (spec.wants("partition")) {
      Table t{"partition", {"partitions", "subset_size", "bias", "variance"}, {}};
      for (std::size_t P : spec.partitions) {
        const BiasVariance bv =
            partition_estimate(trainer, T, P, spec.bootstrap_k, labels, derive_seed(spec.seed, {203, P}));
        t.rows.push_back({static_cast<std::int64_t>(P), static_cast<std::int64_t>(T.size() / P), bv.bias,
                          bv.variance});
      }
      result.tables.push_back(std::move(t));
    }
  }

  if (spec.wants("greedy")) {
    const GreedySelection sel = greedy_select_trace(grid.validation, grid.validation_labels, spec.greedy_budget);
    Table t{"greedy", {"step", "model", "group", "val_nll"}, {}};
    for (std::size_t i = 0; i < sel.members.size(); ++i) {
      t.rows.push_back({static_cast<std::int64_t>(i + 1), static_cast<std::int64_t>(sel.members[i]),
                        grid.eval.tags[sel.members[i]].group.value_or(""), sel.nll[i]});
    }
    result.tables.push_back(std::move(t));
    if (!sel.members.empty()) {
      const PredictionPool chosen = grid.eval.subset(sel.members);
      const BiasVariance bv = kl_bias_variance(chosen.models, labels);
      result.tables.push_back(Table{"greedy_members", {"n_selected", "member_bias", "member_variance", "member_nll"},
                                    {{static_cast<std::int64_t>(sel.members.size()), bv.bias, bv.variance, bv.nll()}}});
    }
  }
  return result;
}

}  // namespace bvdual
