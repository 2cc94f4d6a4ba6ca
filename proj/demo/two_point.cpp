// Two-point walkthrough: dual mean, decomposition and what primal vs dual
// ensembling does to the central prediction.

#include <cstdio>

#include "bvdual/bvdual.hpp"

int main() {
  using namespace bvdual;
  const NegativeEntropy kl(2);
  const PredictionSet pool({{0.8, 0.2}, {0.6, 0.4}});
  const PredictionSet label({{1.0, 0.0}});

  const Vector center = dual_mean(kl, pool);
  std::printf("dual mean          (%.6f, %.6f)\n", center[0], center[1]);
  std::printf("arithmetic mean    (%.6f, %.6f)\n", mean_label(pool)[0], mean_label(pool)[1]);

  const Decomposition d = decompose(kl, label, pool);
  std::printf("bayes %.6f  bias %.6f  variance %.6f  total %.6f\n", d.bayes_error, d.bias, d.variance,
              d.total);

  for (EnsembleMode mode : {EnsembleMode::primal, EnsembleMode::dual}) {
    const PredictionSet law = ensemble_law(kl, pool, 2, mode);
    const Decomposition e = decompose(kl, label, law);
    const Vector c = dual_mean(kl, law);
    std::printf("k=2 %-6s center (%.6f, %.6f)  bias %.6f  variance %.6f\n",
                std::string(to_string(mode)).c_str(), c[0], c[1], e.bias, e.variance);
  }
  return 0;
}
