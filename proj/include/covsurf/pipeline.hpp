#pragma once

// End-to-end classification pipeline on mixed variables:
//
//  1. cluster the variables hierarchically by homogeneity;
//  2. sweep the cut size K, scoring each partition's synthetic variables
//     with a small random forest, and keep the K with minimal OOB error;
//  3. run the thresholding and interpretation selection steps on the K*
//     synthetic variables;
//  4. train the final forest on the selected synthetic variables.
//
// Prediction routes new rows through the stored synthetic-variable
// coefficients and the final forest. The same coefficient path is used for
// the training frames, so fit and predict see identical features.
//
// Also provided: leave-one-out cross-validation with a full refit per fold,
// and a four-arm comparison harness (selected synthetic variables, all K*
// synthetic variables, selection on the original variables, all original
// variables) over replicated forests.

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "covsurf/clustering.hpp"
#include "covsurf/forest.hpp"
#include "covsurf/mixed_data.hpp"
#include "covsurf/rng.hpp"
#include "covsurf/vsurf.hpp"

namespace covsurf {

struct PipelineParams {
  int kmin = 2;
  int kmax = 0;  // 0: use the derived bound min(p, n-1, 2000)
  int sweep_trees = 100;
  int final_trees = 500;
  VsurfParams vsurf;  // selection steps on the synthetic variables

  void validate() const {
    if (kmin < 1) throw std::invalid_argument("kmin must be positive");
    if (kmax != 0 && kmax < kmin) {
      throw std::invalid_argument("kmax must be 0 or at least kmin");
    }
    if (sweep_trees < 1) {
      throw std::invalid_argument("sweep_trees must be positive");
    }
    if (final_trees < 1) {
      throw std::invalid_argument("final_trees must be positive");
    }
    vsurf.validate();
  }
};

struct KSweepCurve {
  std::vector<int> k;       // ascending
  std::vector<double> oob;  // aligned with k
  int k_star = 0;
};

// One numeric column per requested cluster, named by the cluster's position
// in the full partition so training and prediction frames always agree.
inline MixedDataFrame synthetic_frame(const PartitionModel& partition,
                                      const MixedDataFrame& rows,
                                      const std::vector<int>& clusters) {
  const Eigen::MatrixXd all = partition.scores(rows);
  Schema schema;
  std::vector<ColumnValues> columns;
  for (int c : clusters) {
    if (c < 0 || c >= static_cast<int>(partition.size())) {
      throw std::invalid_argument("cluster index out of range");
    }
    SchemaColumn spec;
    spec.name = "synth" + std::to_string(c + 1);
    spec.kind = ColumnKind::kNumeric;
    schema.columns.push_back(std::move(spec));
    columns.emplace_back(
        NumericColumn(all.col(c).data(), all.col(c).data() + all.rows()));
  }
  return MixedDataFrame(std::move(schema), std::move(columns));
}

namespace detail {

// K values to score: every K in [lo, hi] when the range is small, otherwise
// a geometric grid (ratio 1.25) that is later refined around the best point.
inline std::vector<int> sweep_grid(int lo, int hi) {
  std::vector<int> grid;
  if (hi - lo < 200) {
    for (int k = lo; k <= hi; ++k) grid.push_back(k);
    return grid;
  }
  double value = lo;
  while (static_cast<int>(value) < hi) {
    const int k = static_cast<int>(value);
    if (grid.empty() || grid.back() != k) grid.push_back(k);
    value = std::max(value * 1.25, value + 1.0);
  }
  grid.push_back(hi);
  return grid;
}

inline double sweep_oob(const MixedDataFrame& df, const LabelVector& y,
                        PartitionBuilder& builder, int k, int trees,
                        std::uint64_t seed) {
  const PartitionModel partition = builder.partition(k);
  std::vector<int> all(k);
  std::iota(all.begin(), all.end(), 0);
  const MixedDataFrame synth = synthetic_frame(partition, df, all);
  const Forest forest =
      train_forest(synth, y, trees, default_mtry(k),
                   derive_seed(seed, stream::kSweep, k));
  return oob_error(forest, synth, y);
}

}  // namespace detail

// Argmin of the error curve; exact ties go to the smaller K.
inline int select_k(const std::vector<int>& k, const std::vector<double>& oob) {
  if (k.empty() || k.size() != oob.size()) {
    throw std::invalid_argument("length mismatch");
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < k.size(); ++i) {
    if (oob[i] < oob[best] || (oob[i] == oob[best] && k[i] < k[best])) {
      best = i;
    }
  }
  return k[best];
}

// OOB error of a sweep forest for each candidate K; k_star is the argmin,
// ties resolved toward the smaller K.
inline KSweepCurve k_sweep(const MixedDataFrame& df, const LabelVector& y,
                           PartitionBuilder& builder,
                           const PipelineParams& params, std::uint64_t seed) {
  params.validate();
  const int p = static_cast<int>(df.n_cols());
  int hi = std::min({p, static_cast<int>(df.n_rows()) - 1, 2000});
  if (params.kmax > 0) hi = std::min(hi, params.kmax);
  if (hi < 1) throw std::invalid_argument("cluster count out of range");
  const int lo = std::min(params.kmin, hi);

  KSweepCurve curve;
  std::vector<int> grid = detail::sweep_grid(lo, hi);
  std::vector<std::pair<int, double>> scored;
  for (int k : grid) {
    scored.emplace_back(
        k, detail::sweep_oob(df, y, builder, k, params.sweep_trees, seed));
  }
  if (grid.size() < static_cast<std::size_t>(hi - lo + 1)) {
    // Geometric pass: refine around the coarse minimum.
    int coarse_best = scored.front().first;
    double best_oob = scored.front().second;
    for (const auto& [k, err] : scored) {
      if (err < best_oob || (err == best_oob && k < coarse_best)) {
        coarse_best = k;
        best_oob = err;
      }
    }
    for (int k = std::max(lo, coarse_best - 3);
         k <= std::min(hi, coarse_best + 3); ++k) {
      if (std::find(grid.begin(), grid.end(), k) != grid.end()) continue;
      scored.emplace_back(
          k, detail::sweep_oob(df, y, builder, k, params.sweep_trees, seed));
    }
    std::sort(scored.begin(), scored.end());
  }

  for (const auto& [k, err] : scored) {
    curve.k.push_back(k);
    curve.oob.push_back(err);
  }
  curve.k_star = select_k(curve.k, curve.oob);
  return curve;
}

struct CovsurfModel {
  Schema schema;  // original variables
  std::vector<std::string> classes;
  Hierarchy hierarchy;
  int k_star = 0;
  PartitionModel partition;   // the K* clusters with their coefficients
  std::vector<int> selected;  // cluster indices kept for the final forest
  Forest final_forest;
  PipelineParams params;
  std::uint64_t seed = 0;
  KSweepCurve curve;
  VIStats synth_vi;                   // importance stats on the K* scores
  std::vector<int> thresholded;       // selection diagnostics, ranked
  std::vector<double> nested_oob;
  std::vector<std::string> warnings;  // e.g. selection fallback
};

inline CovsurfModel fit(const MixedDataFrame& df, const LabelVector& y,
                        const PipelineParams& params, std::uint64_t seed) {
  params.validate();
  if (y.size() != df.n_rows()) {
    throw std::invalid_argument("label/row count mismatch");
  }
  if (y.distinct_present() < 2) {
    throw std::invalid_argument("degenerate labels");
  }

  CovsurfModel model;
  model.schema = df.schema();
  model.classes = y.classes();
  model.params = params;
  model.seed = seed;

  model.hierarchy = build_hierarchy(df);
  PartitionBuilder builder(df, model.hierarchy);
  model.curve = k_sweep(df, y, builder, params, seed);
  model.k_star = model.curve.k_star;
  model.partition = builder.partition(model.k_star);

  std::vector<int> all(model.k_star);
  std::iota(all.begin(), all.end(), 0);
  const MixedDataFrame synth = synthetic_frame(model.partition, df, all);

  // Thresholding + interpretation on the synthetic variables. When nothing
  // survives (pure-noise data), fall back to every cluster.
  try {
    model.synth_vi = vi_statistics(synth, y, params.vsurf,
                                   derive_seed(seed, stream::kVsurf, 1));
    ThresholdResult thr = threshold_step(model.synth_vi);
    model.thresholded = std::move(thr.selected);
    InterpretationResult interp =
        interpretation_step(synth, y, model.thresholded, params.vsurf,
                            derive_seed(seed, stream::kVsurf, 2));
    model.nested_oob = std::move(interp.nested_oob);
    model.selected = std::move(interp.selected);
    std::sort(model.selected.begin(), model.selected.end());
  } catch (const std::runtime_error& e) {
    if (std::string(e.what()) != "nothing survives thresholding") throw;
    model.selected = all;
    model.warnings.push_back(
        "nothing survives thresholding; keeping all clusters");
  }

  const MixedDataFrame final_frame =
      synthetic_frame(model.partition, df, model.selected);
  model.final_forest = train_forest(
      final_frame, y, params.final_trees,
      detail::default_mtry(static_cast<int>(model.selected.size())),
      derive_seed(seed, stream::kFinalForest));
  return model;
}

inline LabelVector predict(const CovsurfModel& model,
                           const MixedDataFrame& rows) {
  const MixedDataFrame synth =
      synthetic_frame(model.partition, rows, model.selected);
  return predict(model.final_forest, synth);
}

inline double evaluate(const CovsurfModel& model, const MixedDataFrame& df,
                       const LabelVector& y) {
  return misclassification(predict(model, df), y);
}

struct LoocvResult {
  double error = 0.0;        // misclassification over completed folds
  std::size_t folds = 0;
  std::vector<int> failed;   // fold indices whose refit threw
  std::vector<std::string> failure_reasons;  // aligned with `failed`
  std::vector<std::string> predicted;        // per fold; empty when failed
};

// Leave-one-out: the whole pipeline (clustering included) is refit on each
// n-1 subset, so no information from the held-out row leaks into the model.
inline LoocvResult loocv(const MixedDataFrame& df, const LabelVector& y,
                         const PipelineParams& params, std::uint64_t seed) {
  params.validate();
  if (y.size() != df.n_rows()) {
    throw std::invalid_argument("label/row count mismatch");
  }
  const std::size_t n = df.n_rows();
  LoocvResult result;
  result.folds = n;
  result.predicted.resize(n);
  long wrong = 0, completed = 0;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<int> rows;
    rows.reserve(n - 1);
    for (std::size_t r = 0; r < n; ++r) {
      if (r != i) rows.push_back(static_cast<int>(r));
    }
    try {
      const CovsurfModel model =
          fit(select_rows(df, rows), select_rows(y, rows), params,
              derive_seed(seed, stream::kLoocvFold, i));
      const LabelVector pred =
          predict(model, select_rows(df, {static_cast<int>(i)}));
      result.predicted[i] = pred.class_name(pred.id(0));
      ++completed;
      if (result.predicted[i] != y.class_name(y.id(i))) ++wrong;
    } catch (const std::exception& e) {
      result.failed.push_back(static_cast<int>(i));
      result.failure_reasons.push_back(e.what());
    }
  }
  if (completed == 0) throw std::runtime_error("all folds failed");
  result.error = static_cast<double>(wrong) / static_cast<double>(completed);
  return result;
}

struct CompareResult {
  std::vector<std::string> arms;  // cov_vsurf, cov_rf, vsurf, rf
  std::vector<std::vector<double>> errors;  // [arm][rep] test errors
  int k_star = 0;
  std::vector<int> selected_clusters;  // pipeline selection
  std::vector<int> vsurf_variables;    // interpretation set on the originals
};

// Four methods on a shared train/test split. Clustering and both selection
// passes run once; each arm then trains `reps` independently seeded forests
// and is scored on the fixed test set.
inline CompareResult compare_methods(const MixedDataFrame& train_df,
                                     const LabelVector& train_y,
                                     const MixedDataFrame& test_df,
                                     const LabelVector& test_y,
                                     const PipelineParams& params, int reps,
                                     std::uint64_t seed) {
  params.validate();
  if (reps < 1) throw std::invalid_argument("reps must be positive");
  check_schema_compatible(train_df.schema(), test_df.schema());

  CompareResult result;
  result.arms = {"cov_vsurf", "cov_rf", "vsurf", "rf"};
  result.errors.assign(4, std::vector<double>(reps, 0.0));

  // Shared structure: one pipeline fit covers the hierarchy, K* and the
  // synthetic-variable selection.
  const CovsurfModel model = fit(train_df, train_y, params, seed);
  result.k_star = model.k_star;
  result.selected_clusters = model.selected;

  std::vector<int> all_clusters(model.k_star);
  std::iota(all_clusters.begin(), all_clusters.end(), 0);

  // Selection on the original variables (thresholding + interpretation),
  // falling back to all of them when nothing survives.
  try {
    const VIStats stats =
        vi_statistics(train_df, train_y, params.vsurf,
                      derive_seed(seed, stream::kCompareArm, 4, 0));
    const ThresholdResult thr = threshold_step(stats);
    const InterpretationResult interp =
        interpretation_step(train_df, train_y, thr.selected, params.vsurf,
                            derive_seed(seed, stream::kCompareArm, 4, 1));
    result.vsurf_variables = interp.selected;
    std::sort(result.vsurf_variables.begin(), result.vsurf_variables.end());
  } catch (const std::runtime_error& e) {
    if (std::string(e.what()) != "nothing survives thresholding") throw;
    result.vsurf_variables.resize(train_df.n_cols());
    std::iota(result.vsurf_variables.begin(), result.vsurf_variables.end(),
              0);
  }

  struct Arm {
    MixedDataFrame train;
    MixedDataFrame test;
  };
  const std::vector<Arm> data = {
      {synthetic_frame(model.partition, train_df, model.selected),
       synthetic_frame(model.partition, test_df, model.selected)},
      {synthetic_frame(model.partition, train_df, all_clusters),
       synthetic_frame(model.partition, test_df, all_clusters)},
      {select_columns(train_df, result.vsurf_variables),
       select_columns(test_df, result.vsurf_variables)},
      {train_df, test_df},
  };

  for (int arm = 0; arm < 4; ++arm) {
    const int mtry = detail::default_mtry(
        static_cast<int>(data[arm].train.n_cols()));
    for (int rep = 0; rep < reps; ++rep) {
      const Forest forest =
          train_forest(data[arm].train, train_y, params.final_trees, mtry,
                       derive_seed(seed, stream::kCompareArm, arm, rep));
      result.errors[arm][rep] =
          misclassification(predict(forest, data[arm].test), test_y);
    }
  }
  return result;
}

}  // namespace covsurf
