// bvdual: command-line front end.
//
// Exit codes: 0 success, 1 counterexample FAIL, 2 usage / parse / schema /
// validation / domain error, 3 numerical error or training divergence.

#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "bvdual/bvdual.hpp"

namespace {

using namespace bvdual;
using ojson = nlohmann::ordered_json;

/// Quote an argument for a POSIX shell only when needed.
std::string shell_quote(const std::string& s) {
  if (s.empty()) return "''";
  bool plain = true;
  for (char c : s) {
    const bool ok = std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.' ||
                    c == '/' || c == ',' || c == ':' || c == '=' || c == '+';
    plain &= ok;
  }
  if (plain) return s;
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') {
      out += "'\\''";
    } else {
      out += c;
    }
  }
  return out + "'";
}

/// Accumulates the replay line: every resolved flag, in a fixed order.
class Replay {
 public:
  explicit Replay(std::string sub) : line_("bvdual " + std::move(sub)) {}

  template <class T>
  Replay& flag(const std::string& name, const T& value) {
    line_ += " --" + name + " ";
    if constexpr (std::is_same_v<T, double>) {
      line_ += shell_quote(format_number(value, 0));
    } else if constexpr (std::is_convertible_v<T, std::string>) {
      line_ += shell_quote(std::string(value));
    } else {
      line_ += std::to_string(value);
    }
    return *this;
  }
  Replay& toggle(const std::string& name, bool on) {
    if (on) line_ += " --" + name;
    return *this;
  }
  const std::string& str() const { return line_; }

 private:
  std::string line_;
};

struct Common {
  int precision = 6;
  std::string out;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--precision", c.precision, "Significant digits in tables (0 = shortest round-trip)")
      ->check(CLI::Range(0, 17));
  sub->add_option("--out", c.out, "Write the report here instead of stdout");
}

void finish_common(Replay& r, const Common& c) {
  r.flag("precision", c.precision);
  if (!c.out.empty()) r.flag("out", c.out);
}

void emit(const Report& report, const Common& c, const std::string& trailer = "") {
  const std::string text = report.render(c.precision) + trailer;
  if (c.out.empty()) {
    std::cout << text << std::flush;
  } else {
    write_file(c.out, text);
  }
}

ojson base_provenance(std::uint64_t seed) {
  ojson p;
  p["seed"] = seed;
  p["version"] = kVersion;
  p["inputs"] = ojson::object();
  return p;
}

std::string digest_of(const std::string& contents) { return "fnv1a64:" + fnv1a64_hex(contents); }

/// Load a JSON spec file; syntax errors become ParseError with a line number.
nlohmann::json load_spec_json(const std::string& path, const std::string& text) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    std::size_t line = 1;
    for (std::size_t i = 0; i < std::min<std::size_t>(e.byte, text.size()); ++i) line += text[i] == '\n';
    throw ParseError(path, line, e.what());
  }
}

// ---------------------------------------------------------------------------
// decompose

struct DecomposeArgs {
  std::string log_path, labels_path, loss = "kl", group_by = "none";
  Common common;
};

Vector point_of(const PredictionLog& log, std::size_t m, std::size_t e) {
  const auto row = log.pool.models[m].row(e);
  Vector p(row.begin(), row.end());
  if (log.generator == "kl") {
    for (double& v : p) v = std::exp(v);
  }
  return p;
}

int run_decompose(const DecomposeArgs& a) {
  const std::string log_text = read_file(a.log_path);
  const std::string labels_text = read_file(a.labels_path);
  const PredictionLog log = read_prediction_log(log_text, a.log_path);
  const std::vector<int> labels = read_labels(labels_text, a.labels_path);
  check_labels(log.pool, labels);
  const bool grouped = a.group_by != "none";
  const GroupKey key = grouped ? parse_group_key(a.group_by) : GroupKey::group;
  const std::size_t c = log.pool.n_classes();
  const AnyGenerator gen = make_generator(a.loss, c);

  std::vector<std::string> cols{"example", "bayes", "bias", "variance", "total"};
  if (grouped) {
    for (const char* s : {"cond_bias", "cond_variance", "gap"}) cols.emplace_back(s);
  }
  Table per{"per_example", cols, {}};
  const std::size_t n_ex = log.pool.n_examples();
  std::vector<Vector> columns(cols.size() - 1, Vector(n_ex));
  for (std::size_t e = 0; e < n_ex; ++e) {
    std::vector<Vector> pts;
    for (std::size_t m = 0; m < log.pool.n_models(); ++m) pts.push_back(point_of(log, m, e));
    const PredictionSet preds(std::move(pts), {}, log.pool.tags);
    Vector y(c, 0.0);
    y[static_cast<std::size_t>(labels[e])] = 1.0;
    const PredictionSet ys({y});
    with_generator(gen, [&](const auto& g) {
      const Decomposition d = decompose(g, ys, preds);
      columns[0][e] = d.bayes_error;
      columns[1][e] = d.bias;
      columns[2][e] = d.variance;
      columns[3][e] = d.total;
      if (grouped) {
        const ConditionalDecomposition cd = conditional_decompose(g, y, preds, key);
        columns[4][e] = cd.conditional_bias;
        columns[5][e] = cd.conditional_variance;
        columns[6][e] = cd.gap;
      }
    });
    std::vector<Cell> row{static_cast<std::int64_t>(e)};
    for (const auto& col : columns) row.emplace_back(col[e]);
    per.rows.push_back(std::move(row));
  }
  Table agg{"aggregate", {"n_examples"}, {}};
  std::vector<Cell> row{static_cast<std::int64_t>(n_ex)};
  for (std::size_t i = 1; i < cols.size(); ++i) {
    agg.columns.push_back(cols[i]);
    row.emplace_back(mean(columns[i - 1]));
  }
  agg.rows.push_back(std::move(row));

  Replay r("decompose");
  r.flag("log", a.log_path).flag("labels", a.labels_path).flag("loss", a.loss).flag("group-by", a.group_by);
  finish_common(r, a.common);
  Report report;
  report.command = r.str();
  report.config = {{"loss", a.loss}, {"group_by", a.group_by}, {"log_generator", log.generator},
                   {"n_models", log.pool.n_models()}, {"n_examples", n_ex}, {"n_classes", c}};
  report.provenance = base_provenance(0);
  report.provenance["inputs"][a.log_path] = digest_of(log_text);
  report.provenance["inputs"][a.labels_path] = digest_of(labels_text);
  report.tables = {std::move(agg), std::move(per)};
  emit(report, a.common);
  return 0;
}

// ---------------------------------------------------------------------------
// ensemble-curve

struct CurveArgs {
  std::string log_path, labels_path, mode = "both", plot_data;
  std::size_t k_max = 8, draws = 20;
  std::uint64_t seed = 0;
  bool with_replacement = false;
  Common common;
};

int run_curve(const CurveArgs& a) {
  const std::string log_text = read_file(a.log_path);
  const std::string labels_text = read_file(a.labels_path);
  const PredictionLog log = read_prediction_log(log_text, a.log_path);
  if (log.generator != "kl") throw UsageError("ensemble-curve needs a kl prediction log");
  const std::vector<int> labels = read_labels(labels_text, a.labels_path);
  if (a.k_max < 1) throw UsageError("--k-max must be at least 1");
  if (!a.with_replacement && a.k_max > log.pool.n_models()) {
    throw UsageError("--k-max " + std::to_string(a.k_max) + " exceeds the pool size " +
                     std::to_string(log.pool.n_models()) + "; pass --with-replacement");
  }
  std::vector<EnsembleMode> modes;
  if (a.mode == "both") {
    modes = {EnsembleMode::primal, EnsembleMode::dual};
  } else {
    modes = {parse_ensemble_mode(a.mode)};
  }
  std::vector<std::size_t> ks(a.k_max);
  for (std::size_t k = 1; k <= a.k_max; ++k) ks[k - 1] = k;
  const Sampling sampling = a.with_replacement ? Sampling::with_replacement : Sampling::without_replacement;

  // bias_flat: dual bias within 3 standard errors of the k = 1 value.
  Table t{"curve",
          {"mode", "k", "bias", "bias_se", "variance", "variance_se", "nll", "nll_se", "bias_flat"},
          {}};
  for (EnsembleMode mode : modes) {
    const EnsembleCurve c = ensemble_curve(log.pool, labels, mode, ks, a.draws, a.seed, sampling);
    for (std::size_t i = 0; i < ks.size(); ++i) {
      std::string flat = "-";
      if (mode == EnsembleMode::dual) {
        const double se = c.bias_stderr[i];
        if (std::isnan(se)) {
          flat = "na";
        } else {
          flat = std::abs(c.bias[i] - c.bias[0]) <= 3.0 * se + 1e-9 ? "yes" : "no";
        }
      }
      t.rows.push_back({std::string(to_string(mode)), static_cast<std::int64_t>(ks[i]), c.bias[i],
                        c.bias_stderr[i], c.variance[i], c.variance_stderr[i], c.nll[i], c.nll_stderr[i],
                        flat});
    }
  }

  Replay r("ensemble-curve");
  r.flag("log", a.log_path).flag("labels", a.labels_path).flag("mode", a.mode).flag("k-max", a.k_max);
  r.flag("draws", a.draws).flag("seed", a.seed).toggle("with-replacement", a.with_replacement);
  if (!a.plot_data.empty()) r.flag("plot-data", a.plot_data);
  finish_common(r, a.common);
  Report report;
  report.command = r.str();
  report.config = {{"mode", a.mode},
                   {"k_max", a.k_max},
                   {"draws", a.draws},
                   {"sampling", a.with_replacement ? "with_replacement" : "without_replacement"},
                   {"n_models", log.pool.n_models()},
                   {"n_examples", log.pool.n_examples()}};
  report.provenance = base_provenance(a.seed);
  report.provenance["inputs"][a.log_path] = digest_of(log_text);
  report.provenance["inputs"][a.labels_path] = digest_of(labels_text);
  if (!a.plot_data.empty()) write_file(a.plot_data, t.to_tsv(a.common.precision));
  report.tables.push_back(std::move(t));
  emit(report, a.common);
  return 0;
}

// ---------------------------------------------------------------------------
// World / model flags shared by bootstrap

struct WorldArgs {
  std::string spec_path;
  ToyWorld world;
  ToyModelConfig model;
  std::string kind = "mlp";
};

void add_world_flags(CLI::App* sub, WorldArgs& w) {
  sub->add_option("--spec", w.spec_path, "Experiment spec; supplies world and first model (flags override)");
  sub->add_option("--n-classes", w.world.n_classes);
  sub->add_option("--dim", w.world.dim);
  sub->add_option("--separation", w.world.separation);
  sub->add_option("--noise-scale", w.world.noise_scale);
  sub->add_option("--train-size", w.world.train_size);
  sub->add_option("--eval-size", w.world.eval_size);
  sub->add_option("--world-seed", w.world.master_seed);
  sub->add_option("--kind", w.kind)->check(CLI::IsMember({"logistic", "mlp"}));
  sub->add_option("--depth", w.model.depth);
  sub->add_option("--width", w.model.hidden_width);
  sub->add_option("--l2", w.model.l2);
  sub->add_option("--label-smoothing", w.model.label_smoothing);
  sub->add_option("--steps", w.model.steps);
  sub->add_option("--step-size", w.model.step_size);
}

/// Resolve: defaults, then spec file values, then explicitly given flags.
void resolve_world(CLI::App* sub, WorldArgs& w, ojson& inputs) {
  if (!w.spec_path.empty()) {
    const std::string text = read_file(w.spec_path);
    inputs[w.spec_path] = digest_of(text);
    const ExperimentSpec spec = ExperimentSpec::from_json(load_spec_json(w.spec_path, text));
    const WorldArgs flags = w;
    w.world = spec.world;
    w.model = spec.models.front().config;
    w.kind = std::string(to_string(w.model.kind));
    auto given = [&](const char* name) { return sub->count(name) > 0; };
    if (given("--n-classes")) w.world.n_classes = flags.world.n_classes;
    if (given("--dim")) w.world.dim = flags.world.dim;
    if (given("--separation")) w.world.separation = flags.world.separation;
    if (given("--noise-scale")) w.world.noise_scale = flags.world.noise_scale;
    if (given("--train-size")) w.world.train_size = flags.world.train_size;
    if (given("--eval-size")) w.world.eval_size = flags.world.eval_size;
    if (given("--world-seed")) w.world.master_seed = flags.world.master_seed;
    if (given("--kind")) w.kind = flags.kind;
    if (given("--depth")) w.model.depth = flags.model.depth;
    if (given("--width")) w.model.hidden_width = flags.model.hidden_width;
    if (given("--l2")) w.model.l2 = flags.model.l2;
    if (given("--label-smoothing")) w.model.label_smoothing = flags.model.label_smoothing;
    if (given("--steps")) w.model.steps = flags.model.steps;
    if (given("--step-size")) w.model.step_size = flags.model.step_size;
    if (!w.world.class_means.empty() && (given("--n-classes") || given("--dim"))) {
      throw UsageError("--n-classes/--dim cannot override a spec with explicit class_means");
    }
  }
  w.model.kind = parse_model_kind(w.kind);
  w.world.validate();
  w.model.validate("model");
}

/// Replay echoes the resolved world rather than the spec path, so the line is
/// self-contained. Explicit class means cannot be expressed as flags and keep
/// the spec reference.
void echo_world(Replay& r, const WorldArgs& w) {
  if (!w.world.class_means.empty()) r.flag("spec", w.spec_path);
  r.flag("n-classes", w.world.n_classes).flag("dim", w.world.dim).flag("separation", w.world.separation);
  r.flag("noise-scale", w.world.noise_scale).flag("train-size", w.world.train_size);
  r.flag("eval-size", w.world.eval_size).flag("world-seed", w.world.master_seed);
  r.flag("kind", w.kind).flag("depth", w.model.depth).flag("width", w.model.hidden_width);
  r.flag("l2", w.model.l2).flag("label-smoothing", w.model.label_smoothing).flag("steps", w.model.steps);
  r.flag("step-size", w.model.step_size);
}

ojson world_json(const WorldArgs& w) {
  ojson j;
  j["n_classes"] = w.world.n_classes;
  j["dim"] = w.world.dim;
  if (!w.world.class_means.empty()) j["class_means"] = w.world.class_means;
  j["separation"] = w.world.separation;
  j["noise_scale"] = w.world.noise_scale;
  j["train_size"] = w.world.train_size;
  j["eval_size"] = w.world.eval_size;
  j["master_seed"] = w.world.master_seed;
  j["model"] = {{"kind", w.kind},
                {"depth", w.model.depth},
                {"hidden_width", w.model.hidden_width},
                {"l2", w.model.l2},
                {"label_smoothing", w.model.label_smoothing},
                {"steps", w.model.steps},
                {"step_size", w.model.step_size}};
  return j;
}

// ---------------------------------------------------------------------------
// bootstrap

struct BootstrapArgs {
  WorldArgs world;
  std::string trainer = "toy";
  std::size_t B = 10, k = 1, n_seeds = 8, truth_sets = 0;
  std::uint64_t seed = 0;
  Common common;
};

/// Ignores data and seed: uniform predictions on every evaluation example.
TrainerHandle constant_trainer(std::size_t n_examples, std::size_t n_classes) {
  return TrainerHandle{[n_examples, n_classes](const Dataset&, std::uint64_t) {
                         Predictions p(n_examples, n_classes);
                         std::fill(p.log_probs.begin(), p.log_probs.end(),
                                   -std::log(static_cast<double>(n_classes)));
                         return p;
                       },
                       true};
}

int run_bootstrap(CLI::App* sub, BootstrapArgs& a) {
  Report report;
  report.provenance = base_provenance(a.seed);
  resolve_world(sub, a.world, report.provenance["inputs"]);
  const WorldData data = make_world(a.world.world);
  const std::size_t c = a.world.world.n_classes;
  const TrainerHandle trainer = a.trainer == "constant"
                                    ? constant_trainer(data.eval.size(), c)
                                    : make_toy_trainer(a.world.model, data.eval, c);
  const auto& labels = data.eval_labels;

  const DoubleBootstrapResult b =
      double_bootstrap_estimate(trainer, data.train, a.B, a.k, labels, derive_seed(a.seed, {1}));
  const BiasVariance cond =
      conditional_estimate(trainer, data.train, a.n_seeds, a.k, labels, derive_seed(a.seed, {2}));
  std::optional<BiasVariance> truth;
  if (a.truth_sets > 0) {
    truth = fresh_set_truth(a.world.world, trainer, a.truth_sets, a.k, labels, derive_seed(a.seed, {3}));
  }

  const double nan = std::numeric_limits<double>::quiet_NaN();
  Table t{"bootstrap", {"quantity", "b1", "b2", "t", "b0", "degenerate", "warning", "conditional", "truth"}, {}};
  auto add = [&](const char* name, const BootstrapEstimate& e, double conditional, double tr) {
    t.rows.push_back({std::string(name), e.b1, e.b2, e.t, e.b0, static_cast<std::int64_t>(e.degenerate),
                      std::string(e.degenerate ? "degenerate:b2<=0,b0=b1" : "ok"), conditional, tr});
  };
  add("bias", b.bias, cond.bias, truth ? truth->bias : nan);
  add("variance", b.variance, cond.variance, truth ? truth->variance : nan);
  if (b.bias.degenerate || b.variance.degenerate) {
    report.notes.push_back("warning: level-2 estimate is not positive; correction skipped (t = 1)");
  }

  Replay r("bootstrap");
  r.flag("trainer", a.trainer);
  echo_world(r, a.world);
  r.flag("B", a.B).flag("k", a.k).flag("n-seeds", a.n_seeds).flag("truth-sets", a.truth_sets).flag("seed", a.seed);
  finish_common(r, a.common);
  report.command = r.str();
  report.config = {{"trainer", a.trainer}, {"world", world_json(a.world)}, {"B", a.B},
                   {"k", a.k},           {"n_seeds", a.n_seeds},        {"truth_sets", a.truth_sets},
                   {"models_trained", b.models_trained}};
  report.tables.push_back(std::move(t));
  emit(report, a.common);
  return 0;
}

// ---------------------------------------------------------------------------
// counterexample

int run_counterexample(const Common& common) {
  const CounterexampleReport cr = counterexample_report();
  Report report;
  Replay r("counterexample");
  finish_common(r, common);
  report.command = r.str();
  report.config = {{"pool", {{0.8, 0.2}, {0.6, 0.4}}}, {"ensemble_size", 2}, {"mode", "primal"}};
  report.provenance = base_provenance(0);

  Table means{"dual_means", {"law", "p0", "p1"}, {}};
  means.rows.push_back({std::string("single"), format_fixed(cr.dual_mean_single[0], 5),
                        format_fixed(cr.dual_mean_single[1], 5)});
  means.rows.push_back({std::string("ensemble_k2"), format_fixed(cr.dual_mean_ensemble[0], 5),
                        format_fixed(cr.dual_mean_ensemble[1], 5)});
  Table bias{"bias", {"class", "single", "ensemble_k2", "direction"}, {}};
  bias.rows.push_back({std::int64_t{0}, cr.bias_class0_single, cr.bias_class0_ensemble,
                       std::string(cr.class0_bias_increases() ? "increase" : "no_increase")});
  bias.rows.push_back({std::int64_t{1}, cr.bias_class1_single, cr.bias_class1_ensemble,
                       std::string(cr.class1_bias_decreases() ? "decrease" : "no_decrease")});
  Table checks{"checks", {"check", "result"}, {}};
  checks.rows.push_back({std::string("central_predictions_differ"),
                         std::string(cr.central_predictions_differ() ? "PASS" : "FAIL")});
  checks.rows.push_back(
      {std::string("opposite_bias_directions"), std::string(cr.opposite_directions() ? "PASS" : "FAIL")});
  report.tables = {std::move(means), std::move(bias), std::move(checks)};
  emit(report, common, std::string("counterexample: ") + (cr.passed() ? "PASS" : "FAIL") + "\n");
  return cr.passed() ? 0 : 1;
}

// ---------------------------------------------------------------------------
// train-toy and run

struct SpecArgs {
  std::string spec_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  Common common;
};

ExperimentSpec default_spec() {
  ExperimentSpec s;
  s.models.push_back(ModelSpec{"mlp", ToyModelConfig{}, 8});
  return s;
}

ExperimentSpec load_spec(const SpecArgs& a, ojson& inputs) {
  ExperimentSpec spec = default_spec();
  if (!a.spec_path.empty()) {
    const std::string text = read_file(a.spec_path);
    inputs[a.spec_path] = digest_of(text);
    spec = ExperimentSpec::from_json(load_spec_json(a.spec_path, text));
  }
  if (a.seed) spec.seed = *a.seed;
  return spec;
}

Table write_outputs(const std::string& out_dir, const PredictionLog& log, const std::vector<int>& labels) {
  std::filesystem::create_directories(out_dir);
  const std::string log_text = write_prediction_log(log);
  const std::string labels_text = write_labels(labels);
  const std::string log_path = (std::filesystem::path(out_dir) / "predictions.log").string();
  const std::string labels_path = (std::filesystem::path(out_dir) / "labels.txt").string();
  write_file(log_path, log_text);
  write_file(labels_path, labels_text);
  Table t{"files", {"file", "rows", "digest"}, {}};
  t.rows.push_back({log_path, static_cast<std::int64_t>(log.pool.n_models() * log.pool.n_examples()),
                    digest_of(log_text)});
  t.rows.push_back({labels_path, static_cast<std::int64_t>(labels.size()), digest_of(labels_text)});
  return t;
}

void echo_spec(Replay& r, const SpecArgs& a, const ExperimentSpec& spec) {
  if (!a.spec_path.empty()) r.flag("spec", a.spec_path);
  r.flag("seed", spec.seed);
  if (!a.out_dir.empty()) r.flag("out-dir", a.out_dir);
  finish_common(r, a.common);
}

int run_train_toy(const SpecArgs& a) {
  Report report;
  report.provenance = base_provenance(0);
  const ExperimentSpec spec = load_spec(a, report.provenance["inputs"]);
  report.provenance["seed"] = spec.seed;
  const TrainedGrid grid = train_grid(spec);
  const PredictionLog log{"kl", grid.eval};

  Table grid_table{"grid", {"group", "models", "n_examples", "n_classes"}, {}};
  for (const auto& m : spec.models) {
    grid_table.rows.push_back({m.name, static_cast<std::int64_t>(m.count),
                              static_cast<std::int64_t>(log.pool.n_examples()),
                              static_cast<std::int64_t>(log.pool.n_classes())});
  }
  Replay r("train-toy");
  echo_spec(r, a, spec);
  report.command = r.str();
  report.config = spec.to_json();
  report.tables.push_back(std::move(grid_table));
  report.tables.push_back(write_outputs(a.out_dir.empty() ? "." : a.out_dir, log, grid.world.eval_labels));
  emit(report, a.common);
  return 0;
}

int run_run(const SpecArgs& a) {
  if (a.spec_path.empty()) throw UsageError("run needs --spec");
  Report report;
  report.provenance = base_provenance(0);
  const ExperimentSpec spec = load_spec(a, report.provenance["inputs"]);
  report.provenance["seed"] = spec.seed;
  ExperimentResult result = run_experiment(spec);
  Replay r("run");
  echo_spec(r, a, spec);
  report.command = r.str();
  report.config = spec.to_json();
  report.tables = std::move(result.tables);
  if (!a.out_dir.empty()) report.tables.push_back(write_outputs(a.out_dir, result.log, result.labels));
  emit(report, a.common);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bias-variance decompositions for Bregman divergences and ensembles"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  DecomposeArgs dec;
  auto* c_dec = app.add_subcommand("decompose", "Bias-variance decomposition of a prediction log");
  c_dec->add_option("--log", dec.log_path, "Prediction log")->required();
  c_dec->add_option("--labels", dec.labels_path, "Label file, one class index per line")->required();
  c_dec->add_option("--loss", dec.loss)->check(CLI::IsMember({"kl", "mse"}));
  c_dec->add_option("--group-by", dec.group_by)->check(CLI::IsMember({"none", "seed", "train_id", "group"}));
  add_common(c_dec, dec.common);

  CurveArgs cur;
  auto* c_cur = app.add_subcommand("ensemble-curve", "Bias, variance and NLL against ensemble size");
  c_cur->add_option("--log", cur.log_path)->required();
  c_cur->add_option("--labels", cur.labels_path)->required();
  c_cur->add_option("--mode", cur.mode)->check(CLI::IsMember({"primal", "dual", "both"}));
  c_cur->add_option("--k-max", cur.k_max);
  c_cur->add_option("--draws", cur.draws);
  c_cur->add_option("--seed", cur.seed);
  c_cur->add_flag("--with-replacement", cur.with_replacement);
  c_cur->add_option("--plot-data", cur.plot_data, "Also write the curve table to this file");
  add_common(c_cur, cur.common);

  BootstrapArgs boot;
  auto* c_boot = app.add_subcommand("bootstrap", "Double-bootstrap and conditional estimates on a toy world");
  add_world_flags(c_boot, boot.world);
  c_boot->add_option("--trainer", boot.trainer)->check(CLI::IsMember({"toy", "constant"}));
  c_boot->add_option("--B", boot.B);
  c_boot->add_option("--k", boot.k);
  c_boot->add_option("--n-seeds", boot.n_seeds);
  c_boot->add_option("--truth-sets", boot.truth_sets, "Fresh training sets for ground truth (0 = skip)");
  c_boot->add_option("--seed", boot.seed);
  add_common(c_boot, boot.common);

  Common cex;
  auto* c_cex = app.add_subcommand("counterexample", "Two-point case where primal ensembling moves the bias");
  add_common(c_cex, cex);

  SpecArgs tt;
  std::uint64_t tt_seed = 0;
  auto* c_tt = app.add_subcommand("train-toy", "Train a toy model grid and write prediction logs");
  c_tt->add_option("--spec", tt.spec_path);
  auto* tt_seed_opt = c_tt->add_option("--seed", tt_seed, "Override the spec seed");
  c_tt->add_option("--out-dir", tt.out_dir);
  add_common(c_tt, tt.common);

  SpecArgs rn;
  std::uint64_t rn_seed = 0;
  auto* c_rn = app.add_subcommand("run", "Run an experiment spec end to end");
  c_rn->add_option("--spec", rn.spec_path)->required();
  auto* rn_seed_opt = c_rn->add_option("--seed", rn_seed, "Override the spec seed");
  c_rn->add_option("--out-dir", rn.out_dir);
  add_common(c_rn, rn.common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*c_dec) return run_decompose(dec);
    if (*c_cur) return run_curve(cur);
    if (*c_boot) return run_bootstrap(c_boot, boot);
    if (*c_cex) return run_counterexample(cex);
    if (*c_tt) {
      if (*tt_seed_opt) tt.seed = tt_seed;
      return run_train_toy(tt);
    }
    if (*c_rn) {
      if (*rn_seed_opt) rn.seed = rn_seed;
      return run_run(rn);
    }
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  } catch (const TrainingDivergence& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return 2;
  } catch (const SchemaError& e) {
    std::cerr << "schema error: " << e.what() << "\n";
    return 2;
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 2;
  } catch (const DomainError& e) {
    std::cerr << "domain error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
