// Acceptance run: one PASS/FAIL line per criterion, with measured runtime
// against its budget. Exit status is 0 only when every criterion passes.

#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>

#include "bvdual/bvdual.hpp"
#include "oracles.hpp"

using namespace bvdual;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

bool run_criterion(int id, const char* name, double budget_s, const std::function<Outcome()>& fn) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = fn();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const bool in_time = secs < budget_s;
  const bool pass = o.pass && in_time;
  std::printf("%s criterion %d (%s): %s [%.3f s, budget %g s%s]\n", pass ? "PASS" : "FAIL", id, name,
              o.detail.c_str(), secs, budget_s, in_time ? "" : ", over budget");
  std::fflush(stdout);
  return pass;
}

std::vector<double> random_point(std::mt19937_64& rng, std::string_view gen, std::size_t d) {
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  std::vector<double> x(d);
  if (gen == "kl") return oracle::random_simplex(rng, d);
  for (double& v : x) v = gen == "gkl" ? std::exp(u(rng)) : u(rng);
  return x;
}

// ---------------------------------------------------------------------------

Outcome conjugate_identity() {
  double worst = 0.0;
  for (const char* g : {"mse", "kl", "gkl"}) {
    std::mt19937_64 rng(101);
    with_generator(make_generator(g, 4), [&](const auto& gen) {
      for (int t = 0; t < 1000; ++t) {
        const auto x = gen.canonical(random_point(rng, g, 4));
        const auto y = gen.canonical(random_point(rng, g, 4));
        const double primal = divergence(gen, x, y);
        const double dual = conjugate_divergence(gen, to_dual(gen, y).coords, to_dual(gen, x).coords);
        worst = std::max(worst, std::abs(primal - dual) / std::max(1.0, std::abs(primal)));
      }
    });
  }
  return {worst <= 1e-9, fmt("3000 pairs, worst |D_F - D_F*| %.2e (tol 1e-9)", worst)};
}

Outcome dual_mean_argmin() {
  std::mt19937_64 rng(102);
  std::uniform_int_distribution<int> n(1, 6), c(2, 5);
  double worst = 0.0;
  for (int t = 0; t < 200; ++t) {
    const auto k = static_cast<std::size_t>(c(rng));
    std::vector<Vector> xs;
    for (int i = n(rng); i > 0; --i) xs.push_back(oracle::random_simplex(rng, k));
    const Vector w = oracle::random_weights(rng, xs.size());
    const Vector m = dual_mean(NegativeEntropy(k), PredictionSet(xs, w));
    const Vector ref = oracle::kl_argmin(xs, w);
    for (std::size_t j = 0; j < k; ++j) worst = std::max(worst, std::abs(m[j] - ref[j]));
  }
  return {worst <= 1e-6, fmt("200 KL instances, worst sup-norm gap to numerical argmin %.2e (tol 1e-6)", worst)};
}

Outcome additivity() {
  std::mt19937_64 rng(103);
  std::uniform_int_distribution<int> n(1, 5);
  std::normal_distribution<double> normal(0.0, 1.0);
  double worst = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const bool kl = t % 2 == 0;
    std::vector<Vector> ys, xs;
    for (int i = n(rng); i > 0; --i) {
      if (kl) {
        ys.push_back(oracle::random_simplex(rng, 3));
      } else {
        ys.push_back({normal(rng), normal(rng), normal(rng)});
      }
    }
    for (int i = n(rng); i > 0; --i) {
      if (kl) {
        xs.push_back(oracle::random_simplex(rng, 3));
      } else {
        xs.push_back({normal(rng), normal(rng), normal(rng)});
      }
    }
    const Vector wy = oracle::random_weights(rng, ys.size());
    const Vector wx = oracle::random_weights(rng, xs.size());
    const PredictionSet labels(ys, wy), preds(xs, wx);
    // Independent total: the double sum over label and prediction atoms.
    double total = 0.0;
    for (std::size_t i = 0; i < ys.size(); ++i) {
      for (std::size_t j = 0; j < xs.size(); ++j) {
        total += wy[i] * wx[j] * (kl ? oracle::kl(ys[i], xs[j]) : oracle::sq_dist(ys[i], xs[j]));
      }
    }
    const Decomposition d = kl ? decompose(NegativeEntropy(3), labels, preds) : decompose(SquaredEuclidean(3), labels, preds);
    worst = std::max(worst, std::abs(total - (d.bayes_error + d.bias + d.variance)));
  }
  return {worst <= 1e-9, fmt("1000 instances (KL and squared Euclidean), worst |total - parts| %.2e (tol 1e-9)", worst)};
}

Outcome total_laws() {
  std::mt19937_64 rng(104);
  std::uniform_int_distribution<int> groups(1, 4), size(1, 5);
  std::normal_distribution<double> normal(0.0, 1.5);
  double worst_mean = 0.0, worst_var = 0.0;
  for (int t = 0; t < 500; ++t) {
    const bool kl = t % 2 == 0;
    std::vector<Vector> pts;
    std::vector<Provenance> tags;
    for (int g = groups(rng); g > 0; --g) {
      for (int i = size(rng); i > 0; --i) {
        pts.push_back(kl ? oracle::random_simplex(rng, 3) : Vector{normal(rng), normal(rng), normal(rng)});
        tags.push_back(Provenance{0, "train", "g" + std::to_string(g)});
      }
    }
    const PredictionSet s(pts, oracle::random_weights(rng, pts.size()), tags);
    auto check = [&](const auto& gen) {
      std::vector<Vector> centers;
      Vector weights;
      for (const auto& [name, gm] : conditional_dual_means(gen, s)) {
        centers.push_back(gm.point);
        weights.push_back(gm.weight);
      }
      const Vector outer = dual_mean(gen, PredictionSet(centers, weights));
      const Vector direct = dual_mean(gen, s);
      for (int j = 0; j < 3; ++j) worst_mean = std::max(worst_mean, std::abs(outer[j] - direct[j]));
      const auto split = total_variance_split(gen, s);
      worst_var = std::max(worst_var, std::abs(split.unexplained + split.explained - split.total));
    };
    if (kl) {
      check(NegativeEntropy(3));
    } else {
      check(SquaredEuclidean(3));
    }
  }
  return {worst_mean <= 1e-9 && worst_var <= 1e-9,
          fmt("500 grouped instances, worst expectation gap %.2e, variance gap %.2e (tol 1e-9)", worst_mean, worst_var)};
}

Outcome conditional_gap() {
  double worst = 0.0, min_gap = 1e300;
  for (std::uint64_t world_seed = 0; world_seed < 3; ++world_seed) {
    ToyWorld w;
    w.train_size = 32;
    w.eval_size = 128;
    w.master_seed = world_seed;
    const WorldData data = make_world(w);
    ToyModelConfig cfg;
    cfg.hidden_width = 8;
    cfg.steps = 60;
    const TrainerHandle trainer = make_toy_trainer(cfg, data.eval, w.n_classes);
    // The universe: four equiprobable training sets, three seeds each.
    std::vector<Dataset> universe;
    for (std::size_t i = 0; i < 4; ++i) universe.push_back(fresh_training_set(w, i));
    const auto r = enumerate_conditional(trainer, universe, 3, data.eval_labels, derive_seed(world_seed, {5}));
    worst = std::max({worst, std::abs(r.conditional_bias - r.true_bias - r.gap),
                      std::abs(r.true_variance - r.conditional_variance - r.gap)});
    min_gap = std::min(min_gap, r.gap);
  }
  return {worst <= 1e-9 && min_gap >= 0.0,
          fmt("3 enumerable worlds (4 sets x 3 seeds), worst identity error %.2e (tol 1e-9), min gap %.4g", worst,
              min_gap)};
}

Outcome closed_form_variance() {
  std::mt19937_64 rng(106);
  std::uniform_int_distribution<int> n(1, 6), c(2, 6);
  double worst = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const auto k = static_cast<std::size_t>(c(rng));
    std::vector<Vector> xs, logs;
    for (int i = n(rng); i > 0; --i) {
      xs.push_back(oracle::random_simplex(rng, k));
      Vector l(k);
      for (std::size_t j = 0; j < k; ++j) l[j] = std::log(xs.back()[j]);
      logs.push_back(l);
    }
    const double closed = kl_bias_variance_closed_form(logs, 0).variance;
    const double direct = oracle::kl_variance_direct(xs, oracle::uniform_weights(xs.size()));
    worst = std::max(worst, std::abs(closed - direct));
  }
  const std::vector<Vector> worked{{std::log(0.8), std::log(0.2)}, {std::log(0.6), std::log(0.4)}};
  const double v = kl_bias_variance_closed_form(worked, 0).variance;
  const bool identity = worst <= 1e-9;
  const bool literal = std::abs(v - 0.024645) <= 1e-6;
  return {identity && literal,
          fmt("1000 instances, worst |closed - definitional| %.2e (tol 1e-9) %s; worked instance variance %.9f vs "
              "stated 0.024645 +- 1e-6 %s",
              worst, identity ? "ok" : "FAILED", v, literal ? "ok" : "MISMATCH")};
}

struct ProcResult {
  int code = -1;
  std::string out;
};

ProcResult shell(const std::string& cmd) {
  ProcResult r;
  FILE* pipe = popen((cmd + " 2>&1").c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string cli_path() { return std::string("'") + BVDUAL_CLI_PATH + "'"; }

Outcome counterexample() {
  const CounterexampleReport r = counterexample_report();
  const bool single = std::abs(r.dual_mean_single[0] - 0.71010) <= 5e-6 && std::abs(r.dual_mean_single[1] - 0.28990) <= 5e-6;
  const bool ensemble =
      std::abs(r.dual_mean_ensemble[0] - 0.70505) <= 5e-6 && std::abs(r.dual_mean_ensemble[1] - 0.29495) <= 5e-6;
  const bool directions = r.class0_bias_increases() && r.class1_bias_decreases();
  const ProcResult cmd = shell(cli_path() + " counterexample");
  const bool cmd_pass = cmd.code == 0 && cmd.out.find("counterexample: PASS") != std::string::npos;
  return {single && ensemble && directions && cmd_pass,
          fmt("command %s; single center (%.6f, %.6f) %s; ensemble center (%.6f, %.6f) vs stated (0.70505, 0.29495) "
              "%s; class-0 bias %.6f -> %.6f, class-1 bias %.6f -> %.6f %s",
              cmd_pass ? "PASS" : "FAIL", r.dual_mean_single[0], r.dual_mean_single[1], single ? "ok" : "MISMATCH",
              r.dual_mean_ensemble[0], r.dual_mean_ensemble[1], ensemble ? "ok" : "MISMATCH", r.bias_class0_single,
              r.bias_class0_ensemble, r.bias_class1_single, r.bias_class1_ensemble, directions ? "ok" : "WRONG")};
}

Outcome exhaustive_ensembles() {
  std::mt19937_64 rng(108);
  const NegativeEntropy kl(3);
  double worst_reduction = 0.0, worst_center = 0.0, worst_bias = 0.0, worst_law = 0.0;
  int cases = 0;
  for (std::size_t m = 1; m <= 4; ++m) {
    for (int t = 0; t < 25; ++t) {
      std::vector<Vector> pts;
      for (std::size_t i = 0; i < m; ++i) pts.push_back(oracle::random_simplex(rng, 3));
      const Vector w = oracle::random_weights(rng, m);
      const PredictionSet pool(pts, w);
      const double v1 = variance(kl, pool);
      const Vector c1 = dual_mean(kl, pool);
      for (std::size_t k = 1; k <= 3; ++k, ++cases) {
        const PredictionSet primal = ensemble_law(kl, pool, k, EnsembleMode::primal);
        const PredictionSet dual = ensemble_law(kl, pool, k, EnsembleMode::dual);
        worst_reduction = std::max(worst_reduction, variance(kl, primal) - v1);
        const Vector ck = dual_mean(kl, dual);
        for (std::size_t y = 0; y < 3; ++y) {
          worst_center = std::max(worst_center, std::abs(ck[y] - c1[y]));
          worst_bias = std::max(worst_bias, std::abs(std::log(ck[y]) - std::log(c1[y])));
        }
        // Library laws against the independent enumeration.
        for (bool geometric : {false, true}) {
          const auto ref = oracle::enumerate_law(pts, w, k, geometric);
          const PredictionSet& lib = geometric ? dual : primal;
          const double lv = variance(kl, lib);
          const double rv = oracle::kl_variance_direct(ref.points, ref.weights);
          worst_law = std::max(worst_law, std::abs(lv - rv));
        }
      }
    }
  }
  const bool pass = worst_reduction <= 1e-10 && worst_center <= 1e-10 && worst_bias <= 1e-10 && worst_law <= 1e-10;
  return {pass, fmt("%d pool/k cases (m <= 4, k <= 3): max primal variance increase %.2e, dual center drift %.2e, "
                    "dual bias drift %.2e, law mismatch %.2e (tol 1e-10)",
                    cases, worst_reduction, worst_center, worst_bias, worst_law)};
}

Outcome bootstrap_vs_conditional() {
  // The default toy world and model; repetitions vary the estimator seeds.
  const ToyWorld w;
  const WorldData data = make_world(w);
  const TrainerHandle trainer = make_toy_trainer(ToyModelConfig{}, data.eval, w.n_classes);
  const BiasVariance truth = fresh_set_truth(w, trainer, 50, 1, data.eval_labels, derive_seed(9, {0}));
  int wins = 0;
  std::string detail = fmt("truth bias %.4f;", truth.bias);
  for (std::uint64_t rep = 0; rep < 3; ++rep) {
    const auto cond = conditional_estimate(trainer, data.train, 8, 1, data.eval_labels, derive_seed(9, {1, rep}));
    const auto boot = double_bootstrap_estimate(trainer, data.train, 10, 1, data.eval_labels, derive_seed(9, {2, rep}));
    const bool win = std::abs(boot.bias.b0 - truth.bias) < std::abs(cond.bias - truth.bias);
    wins += win;
    detail += fmt(" rep %d: b0 %.4f vs conditional %.4f%s;", static_cast<int>(rep), boot.bias.b0, cond.bias,
                  win ? " (bootstrap closer)" : "");
  }
  detail += fmt(" bootstrap closer in %d/3 (need >= 2)", wins);
  return {wins >= 2, detail};
}

/// Over-fit regime for the ensemble-direction criteria: small training set,
/// long training, almost no weight decay.
ToyModelConfig overfit_config(std::size_t depth) {
  ToyModelConfig c;
  c.hidden_width = 32;
  c.depth = depth;
  c.l2 = 1e-4;
  c.steps = 1000;
  c.step_size = 0.2;
  return c;
}

ToyWorld overfit_world(std::uint64_t seed) {
  ToyWorld w;
  w.train_size = 128;
  w.master_seed = seed;
  return w;
}

Outcome ensemble_modes() {
  bool pass = true;
  std::string detail;
  const std::vector<std::size_t> ks{1, 2, 4, 8};
  for (std::uint64_t rep = 0; rep < 3; ++rep) {
    ExperimentSpec s;
    s.world = overfit_world(rep);
    s.seed = rep;
    s.models = {ModelSpec{"mlp", overfit_config(1), 16}};
    const TrainedGrid g = train_grid(s);
    const auto& y = g.world.eval_labels;
    const std::uint64_t seed = derive_seed(10, {rep});
    const EnsembleCurve p = ensemble_curve(g.eval, y, EnsembleMode::primal, ks, 20, seed);
    const EnsembleCurve d = ensemble_curve(g.eval, y, EnsembleMode::dual, ks, 20, seed);
    double worst_z = 0.0;
    bool flat = true;
    for (std::size_t i = 1; i < ks.size(); ++i) {
      const double delta = std::abs(d.bias[i] - d.bias[0]);
      flat &= delta <= 3.0 * d.bias_stderr[i] + 1e-9;
      worst_z = std::max(worst_z, delta / d.bias_stderr[i]);
    }
    const bool order = p.nll.back() <= d.nll.back();
    pass &= flat && order;
    detail += fmt(" rep %d: dual bias %.4f -> %.4f (worst |dz| %.2f) %s, nll@8 primal %.5f dual %.5f %s;",
                  static_cast<int>(rep), d.bias.front(), d.bias.back(), worst_z, flat ? "flat" : "NOT FLAT",
                  p.nll.back(), d.nll.back(), order ? "ok" : "WRONG ORDER");
  }
  detail.pop_back();
  return {pass, detail.substr(1)};
}

struct PerExample {
  Vector bias, variance;
};

PerExample per_example(const PredictionPool& pool, std::span<const int> y) {
  PerExample r;
  for (std::size_t e = 0; e < pool.n_examples(); ++e) {
    std::vector<Vector> logs;
    for (const auto& m : pool.models) logs.emplace_back(m.row(e).begin(), m.row(e).end());
    const BiasVariance bv = kl_bias_variance_closed_form(logs, static_cast<std::size_t>(y[e]));
    r.bias.push_back(bv.bias);
    r.variance.push_back(bv.variance);
  }
  return r;
}

/// Mean of a - b and its standard error over examples.
std::pair<double, double> paired(const Vector& a, const Vector& b) {
  const double n = static_cast<double>(a.size());
  double m = 0.0, s2 = 0.0;
  for (std::size_t e = 0; e < a.size(); ++e) m += (a[e] - b[e]) / n;
  for (std::size_t e = 0; e < a.size(); ++e) s2 += (a[e] - b[e] - m) * (a[e] - b[e] - m) / (n - 1.0);
  return {m, std::sqrt(s2 / n)};
}

Outcome mixed_architectures() {
  const std::vector<std::size_t> depths{1, 2, 3};
  const std::size_t per_depth = 4;
  bool tolerance_ok = true;
  int strict = 0;
  double sum_db = 0.0, sum_dv = 0.0;
  std::string detail;
  for (std::uint64_t rep = 0; rep < 3; ++rep) {
    ExperimentSpec s;
    s.world = overfit_world(rep);
    s.seed = rep;
    // Fixed pools hold as many members as the mixed pool; every member has its own seed.
    for (auto d : depths) s.models.push_back({"fixed" + std::to_string(d), overfit_config(d), depths.size() * per_depth});
    for (auto d : depths) s.models.push_back({"mixed" + std::to_string(d), overfit_config(d), per_depth});
    const TrainedGrid g = train_grid(s);
    const auto& y = g.world.eval_labels;
    const std::size_t n = y.size();
    const PerExample mixed = per_example(g.eval.subset(pool_members(g.eval, {"mixed1", "mixed2", "mixed3"})), y);
    Vector fixed_b(n, 0.0), fixed_v(n, 0.0);
    for (auto d : depths) {
      const PerExample f = per_example(g.eval.subset(pool_members(g.eval, {"fixed" + std::to_string(d)})), y);
      for (std::size_t e = 0; e < n; ++e) {
        fixed_b[e] += f.bias[e] / static_cast<double>(depths.size());
        fixed_v[e] += f.variance[e] / static_cast<double>(depths.size());
      }
    }
    const auto [db, sb] = paired(mixed.bias, fixed_b);
    const auto [dv, sv] = paired(mixed.variance, fixed_v);
    tolerance_ok &= db < 3.0 * sb && dv > -3.0 * sv;
    strict += db < 0.0 && dv > 0.0;
    sum_db += db;
    sum_dv += dv;
    detail += fmt(" rep %d: bias diff %+.5f (z %+.1f), variance diff %+.5f (z %+.1f);", static_cast<int>(rep), db,
                  db / sb, dv, dv / sv);
  }
  const bool pooled = sum_db < 0.0 && sum_dv > 0.0;
  detail += fmt(" every rep within 3 sigma of the direction: %s; mean bias diff %+.5f, mean variance diff %+.5f: %s; "
                "strict direction in %d/3",
                tolerance_ok ? "yes" : "NO", sum_db / 3, sum_dv / 3, pooled ? "lower bias, higher variance" : "WRONG",
                strict);
  return {tolerance_ok && pooled, detail.substr(1)};
}

// ---------------------------------------------------------------------------
// Determinism of every CLI command under BV_THREADS and replay.

std::string slurp(const fs::path& p) { return fs::exists(p) ? read_file(p.string()) : std::string("<missing>"); }

std::string replay_of(const std::string& report) {
  const std::string key = "# replay: bvdual ";
  const auto p = report.find(key);
  if (p == std::string::npos) return "";
  const auto e = report.find('\n', p);
  return report.substr(p + key.size(), e - p - key.size());
}

Outcome cli_determinism() {
  const fs::path dir = fs::temp_directory_path() / "bvdual_acceptance_cli";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const auto q = [&](const std::string& name) { return "'" + (dir / name).string() + "'"; };
  write_file((dir / "small.json").string(), R"({
  "world": {"train_size": 48, "eval_size": 40},
  "models": [{"name": "shallow", "kind": "mlp", "hidden_width": 6, "steps": 40, "count": 3},
             {"name": "linear", "kind": "logistic", "steps": 40, "count": 2}],
  "analyses": ["decompose", "curve", "bootstrap", "conditional", "partition", "greedy"],
  "ks": [1, 2], "draws": 4,
  "bootstrap": {"B": 2, "n_seeds": 2, "truth_sets": 2},
  "partitions": [2, 4],
  "greedy": {"budget": 3, "validation_size": 30}
})");

  struct Case {
    std::string name, args;
    std::vector<std::string> files;  // extra outputs to compare
  };
  const std::vector<Case> cases{
      {"train-toy", "train-toy --spec " + q("small.json") + " --out-dir " + q("grid") + " --out " + q("r_tt.txt"),
       {"grid/predictions.log", "grid/labels.txt"}},
      {"decompose",
       "decompose --log " + q("grid/predictions.log") + " --labels " + q("grid/labels.txt") +
           " --group-by group --out " + q("r_dec.txt"),
       {}},
      {"ensemble-curve",
       "ensemble-curve --log " + q("grid/predictions.log") + " --labels " + q("grid/labels.txt") +
           " --k-max 4 --draws 5 --plot-data " + q("curve.tsv") + " --out " + q("r_cur.txt"),
       {"curve.tsv"}},
      {"bootstrap",
       "bootstrap --B 3 --train-size 48 --eval-size 40 --steps 40 --width 6 --n-seeds 2 --truth-sets 2 --out " +
           q("r_boot.txt"),
       {}},
      {"counterexample", "counterexample --out " + q("r_cex.txt"), {}},
      {"run", "run --spec " + q("small.json") + " --out-dir " + q("run") + " --out " + q("r_run.txt"),
       {"run/predictions.log", "run/labels.txt"}},
  };
  const auto report_of = [&](const Case& c) {
    const auto at = c.args.rfind("--out ");
    const std::string quoted = c.args.substr(at + 6);
    return fs::path(quoted.substr(1, quoted.size() - 2));
  };
  const auto snapshot = [&](const Case& c) {
    std::string s = slurp(report_of(c));
    for (const auto& f : c.files) s += "\n--" + f + "--\n" + slurp(dir / f);
    return s;
  };

  std::string detail;
  bool pass = true;
  for (const auto& c : cases) {
    const ProcResult first = shell("BV_THREADS=1 " + cli_path() + " " + c.args);
    const int expected = 0;
    const std::string base = snapshot(c);
    const ProcResult second = shell("BV_THREADS=4 " + cli_path() + " " + c.args);
    const bool threads_same = first.code == expected && second.code == expected && snapshot(c) == base;
    const std::string replay = replay_of(slurp(report_of(c)));
    fs::remove(report_of(c));
    const ProcResult third = shell("BV_THREADS=3 " + cli_path() + " " + replay);
    const bool replay_same = !replay.empty() && third.code == expected && snapshot(c) == base;
    pass &= threads_same && replay_same;
    detail += " " + c.name + ":" + (threads_same ? "threads-ok" : "THREADS-DIFFER(exit " + std::to_string(first.code) +
                                                                      "/" + std::to_string(second.code) + ")") +
              "," + (replay_same ? "replay-ok" : "REPLAY-DIFFERS") + ";";
  }
  fs::remove_all(dir);
  detail.pop_back();
  return {pass, "BV_THREADS 1 vs 4 and replay under 3:" + detail};
}

}  // namespace

int main() {
  std::printf("bvdual acceptance (%s)\n", std::string(kVersion).c_str());
  int passed = 0, total = 0;
  const auto tally = [&](bool ok) {
    ++total;
    passed += ok;
  };
  tally(run_criterion(1, "conjugate identity", 1, conjugate_identity));
  tally(run_criterion(2, "dual mean is the argmin", 30, dual_mean_argmin));
  tally(run_criterion(3, "decomposition additivity", 5, additivity));
  tally(run_criterion(4, "laws of total expectation and variance", 5, total_laws));
  tally(run_criterion(5, "conditional gap", 10, conditional_gap));
  tally(run_criterion(6, "closed-form KL variance", 2, closed_form_variance));
  tally(run_criterion(7, "counterexample", 0.1, counterexample));
  tally(run_criterion(8, "primal variance reduction and dual bias conservation", 10, exhaustive_ensembles));
  tally(run_criterion(9, "bootstrap closer to truth than conditional", 300, bootstrap_vs_conditional));
  tally(run_criterion(10, "ensemble-mode direction", 180, ensemble_modes));
  tally(run_criterion(11, "mixed-architecture direction", 300, mixed_architectures));
  tally(run_criterion(12, "CLI determinism", 60, cli_determinism));
  std::printf("acceptance: %d/%d criteria passed\n", passed, total);
  return passed == total ? 0 : 1;
}
