// Walkthrough: simulate a mixed-type dataset with planted variable groups,
// cluster the variables, pick the cluster count by an out-of-bag sweep,
// select the informative clusters, and score the final model on fresh rows.
//
// Build with the project, then run ./cluster_demo from anywhere.

#include <iostream>
#include <string>
#include <vector>

#include "covsurf/covsurf.hpp"

int main() {
  using namespace covsurf;

  // --- 1. Data: 300 rows, 120 variables (80 numeric, 40 binary) in ten
  //        correlated blocks, six of which carry signal.
  SimConfig train_config;
  train_config.n = 300;
  train_config.seed = 42;
  const SimulatedData train = generate(train_config);

  SimConfig test_config = train_config;
  test_config.n = 200;
  test_config.seed = 43;
  const SimulatedData test = generate(test_config);

  std::cout << "training rows: " << train.frame.n_rows()
            << ", variables: " << train.frame.n_cols() << "\n\n";

  // --- 2. Fit the whole pipeline. Small forests keep the demo quick; the
  //        defaults (500 trees, full sweep) are for real analyses.
  PipelineParams params;
  params.kmax = 16;
  params.sweep_trees = 60;
  params.final_trees = 120;
  params.vsurf.nfor = 10;
  params.vsurf.trees = 120;
  params.vsurf.nested_reps = 4;

  const CovsurfModel model = fit(train.frame, train.labels, params, 7);

  std::cout << "out-of-bag error by cluster count:\n";
  for (std::size_t i = 0; i < model.curve.k.size(); ++i) {
    std::cout << "  K = " << model.curve.k[i] << "  oob = "
              << format_double(model.curve.oob[i])
              << (model.curve.k[i] == model.k_star ? "   <- K*" : "") << "\n";
  }

  // --- 3. Inspect the K* clusters: members and homogeneity (the share of
  //        cluster variance its one synthetic score retains).
  std::cout << "\nclusters at K* = " << model.k_star << ":\n";
  for (std::size_t c = 0; c < model.partition.clusters.size(); ++c) {
    const SyntheticVariable& cluster = model.partition.clusters[c];
    std::cout << "  cluster " << (c + 1) << " (top eigenvalue "
              << format_double(cluster.lambda1) << "):";
    for (const int col : cluster.columns) {
      std::cout << ' ' << train.frame.name(col);
    }
    std::cout << "\n";
  }

  std::cout << "\nclusters kept by the selection steps:";
  for (const int c : model.selected) std::cout << ' ' << (c + 1);
  std::cout << "\n";
  for (const auto& warning : model.warnings) {
    std::cout << "warning: " << warning << "\n";
  }

  // --- 4. Score fresh rows.
  std::cout << "\ntest error on " << test.frame.n_rows()
            << " fresh rows: " << format_double(evaluate(model, test.frame, test.labels))
            << "\n";

  // The dendrogram (merge order and heights) can be exported for plotting.
  write_dendrogram(model.hierarchy, "dendrogram.json");
  std::cout << "wrote dendrogram.json\n";
  return 0;
}
