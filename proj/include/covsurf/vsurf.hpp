#pragma once

// Three-step variable selection on top of random-forest permutation
// importance:
//
//  1. thresholding — importances are averaged over `nfor` independent
//     forests; a 1D regression tree is fit to the importance standard
//     deviations against rank, and variables whose mean importance reaches
//     the minimum predicted value are kept (redundant copies of informative
//     variables all survive this step);
//  2. interpretation — nested models over prefixes of the kept variables
//     (in decreasing mean-importance order) are scored by OOB error averaged
//     over `nested_reps` forests, and the smallest prefix attaining the
//     minimum is kept;
//  3. prediction — variables of the interpretation set are added greedily,
//     each kept only when it lowers the OOB error by more than the mean
//     absolute successive difference of the nested errors beyond the
//     interpretation prefix.
//
// The selected index vectors are ordered by decreasing mean importance, so
// step 2's result is a prefix of step 1's and step 3's a subsequence of
// step 2's.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

#include "covsurf/forest.hpp"
#include "covsurf/mixed_data.hpp"
#include "covsurf/rng.hpp"

namespace covsurf {

struct VsurfParams {
  int nfor = 25;         // importance replications in the thresholding step
  int trees = 500;       // trees per forest
  int mtry = 0;          // 0 means floor(sqrt(p)) of each model's frame
  int nested_reps = 10;  // OOB averaging replicates in the interpretation step
  int vi_repeats = 1;    // permutations per (tree, variable)

  void validate() const {
    if (nfor < 1) throw std::invalid_argument("nfor must be positive");
    if (trees < 1) throw std::invalid_argument("trees must be positive");
    if (mtry < 0) throw std::invalid_argument("mtry must be non-negative");
    if (nested_reps < 1) {
      throw std::invalid_argument("nested_reps must be positive");
    }
    if (vi_repeats < 1) {
      throw std::invalid_argument("vi_repeats must be positive");
    }
  }
};

struct VIStats {
  std::vector<double> mean_vi;  // per variable, over the nfor replications
  std::vector<double> sd_vi;
  std::vector<int> order;  // variables by decreasing mean, ties by index
};

namespace detail {

inline int default_mtry(int p) {
  return std::max(1, static_cast<int>(std::floor(std::sqrt(
                         static_cast<double>(p)))));
}

inline int model_mtry(const VsurfParams& params, int p) {
  return params.mtry > 0 ? std::min(params.mtry, p) : default_mtry(p);
}

// 1D regression tree over values in rank order: recursive binary splits,
// attempted only on nodes of at least `minsplit` values, children at least
// `minbucket` values, accepted when the squared-error decrease is at least
// `cp` times the root node's squared error. Returns the smallest leaf mean,
// which serves as the importance threshold.
inline double cart_min_prediction(const std::vector<double>& values,
                                  int minsplit = 20, int minbucket = 7,
                                  double cp = 0.01) {
  const int n = static_cast<int>(values.size());
  if (n == 0) throw std::invalid_argument("empty node");
  std::vector<double> sum(n + 1, 0.0), sum2(n + 1, 0.0);
  for (int i = 0; i < n; ++i) {
    sum[i + 1] = sum[i] + values[i];
    sum2[i + 1] = sum2[i] + values[i] * values[i];
  }
  const auto mean = [&](int lo, int hi) {
    return (sum[hi] - sum[lo]) / (hi - lo);
  };
  const auto sse = [&](int lo, int hi) {
    const double s = sum[hi] - sum[lo];
    return std::max(0.0, sum2[hi] - sum2[lo] - s * s / (hi - lo));
  };

  const double sse_root = sse(0, n);
  double min_leaf = std::numeric_limits<double>::infinity();
  std::vector<std::pair<int, int>> stack{{0, n}};
  while (!stack.empty()) {
    const auto [lo, hi] = stack.back();
    stack.pop_back();
    bool is_leaf = true;
    if (hi - lo >= minsplit && sse(lo, hi) > 0.0) {
      int best_cut = -1;
      double best_gain = -1.0;
      for (int cut = lo + minbucket; cut <= hi - minbucket; ++cut) {
        const double gain = sse(lo, hi) - sse(lo, cut) - sse(cut, hi);
        if (gain > best_gain) {  // ties keep the earliest cut
          best_gain = gain;
          best_cut = cut;
        }
      }
      if (best_cut >= 0 && best_gain >= cp * sse_root) {
        stack.emplace_back(lo, best_cut);
        stack.emplace_back(best_cut, hi);
        is_leaf = false;
      }
    }
    if (is_leaf) min_leaf = std::min(min_leaf, mean(lo, hi));
  }
  return min_leaf;
}

// Trains a forest on the given columns (ascending index order) and returns
// its OOB error.
inline double subset_oob(const MixedDataFrame& df, const LabelVector& y,
                         std::vector<int> cols, const VsurfParams& params,
                         std::uint64_t seed) {
  std::sort(cols.begin(), cols.end());
  const MixedDataFrame sub = select_columns(df, cols);
  const Forest forest =
      train_forest(sub, y, params.trees,
                   model_mtry(params, static_cast<int>(cols.size())), seed);
  return oob_error(forest, sub, y);
}

}  // namespace detail

// Mean and standard deviation of permutation importance over `nfor`
// independently seeded forests.
inline VIStats vi_statistics(const MixedDataFrame& df, const LabelVector& y,
                             const VsurfParams& params, std::uint64_t seed) {
  params.validate();
  const int p = static_cast<int>(df.n_cols());
  std::vector<double> sum(p, 0.0), sum2(p, 0.0);
  for (int f = 0; f < params.nfor; ++f) {
    const Forest forest =
        train_forest(df, y, params.trees, detail::model_mtry(params, p),
                     derive_seed(seed, stream::kViForestTrain, f));
    const VIReport report = variable_importance(
        forest, df, y, derive_seed(seed, stream::kViForestImportance, f),
        params.vi_repeats);
    for (int j = 0; j < p; ++j) {
      sum[j] += report.importance[j];
      sum2[j] += report.importance[j] * report.importance[j];
    }
  }

  VIStats stats;
  stats.mean_vi.resize(p);
  stats.sd_vi.assign(p, 0.0);
  for (int j = 0; j < p; ++j) {
    stats.mean_vi[j] = sum[j] / params.nfor;
    if (params.nfor > 1) {
      const double ss = sum2[j] - params.nfor * stats.mean_vi[j] *
                                      stats.mean_vi[j];
      stats.sd_vi[j] = std::sqrt(std::max(0.0, ss / (params.nfor - 1)));
    }
  }
  stats.order.resize(p);
  for (int j = 0; j < p; ++j) stats.order[j] = j;
  std::sort(stats.order.begin(), stats.order.end(), [&](int a, int b) {
    if (stats.mean_vi[a] != stats.mean_vi[b]) {
      return stats.mean_vi[a] > stats.mean_vi[b];
    }
    return a < b;
  });
  return stats;
}

struct ThresholdResult {
  std::vector<int> selected;  // by decreasing mean importance
  double threshold = 0.0;
};

// Step 1. Because means are scanned in decreasing order, the survivors form
// a prefix of stats.order.
inline ThresholdResult threshold_step(const VIStats& stats) {
  std::vector<double> sd_ranked;
  sd_ranked.reserve(stats.order.size());
  for (int j : stats.order) sd_ranked.push_back(stats.sd_vi[j]);
  ThresholdResult result;
  result.threshold = detail::cart_min_prediction(sd_ranked);
  for (int j : stats.order) {
    if (stats.mean_vi[j] >= result.threshold) {
      result.selected.push_back(j);
    }
  }
  if (result.selected.empty()) {
    throw std::runtime_error("nothing survives thresholding");
  }
  return result;
}

struct InterpretationResult {
  std::vector<int> selected;      // prefix of the thresholded variables
  std::vector<double> nested_oob;  // averaged OOB per prefix size 1..K
};

// Step 2: smallest prefix attaining the minimum averaged OOB error.
inline InterpretationResult interpretation_step(
    const MixedDataFrame& df, const LabelVector& y,
    const std::vector<int>& thresholded, const VsurfParams& params,
    std::uint64_t seed) {
  params.validate();
  if (thresholded.empty()) {
    throw std::invalid_argument("no thresholded variables");
  }
  const int k_max = static_cast<int>(thresholded.size());
  InterpretationResult result;
  result.nested_oob.resize(k_max);
  for (int k = 1; k <= k_max; ++k) {
    const std::vector<int> cols(thresholded.begin(),
                                thresholded.begin() + k);
    double total = 0.0;
    for (int rep = 0; rep < params.nested_reps; ++rep) {
      total += detail::subset_oob(
          df, y, cols, params, derive_seed(seed, stream::kNestedModel, k, rep));
    }
    result.nested_oob[k - 1] = total / params.nested_reps;
  }
  int best_k = 1;
  for (int k = 2; k <= k_max; ++k) {
    if (result.nested_oob[k - 1] < result.nested_oob[best_k - 1]) {
      best_k = k;  // strict improvement only: ties keep the smaller prefix
    }
  }
  result.selected.assign(thresholded.begin(), thresholded.begin() + best_k);
  return result;
}

// Mean absolute successive difference of the nested OOB errors beyond the
// interpretation prefix; 0 when the prefix already spans all nested models.
inline double prediction_threshold(const std::vector<double>& nested_oob,
                                   std::size_t interpretation_size) {
  if (interpretation_size < 1 || interpretation_size > nested_oob.size()) {
    throw std::invalid_argument("interpretation size out of range");
  }
  const std::size_t terms = nested_oob.size() - interpretation_size;
  if (terms == 0) return 0.0;
  double total = 0.0;
  for (std::size_t i = interpretation_size - 1; i + 1 < nested_oob.size();
       ++i) {
    total += std::abs(nested_oob[i + 1] - nested_oob[i]);
  }
  return total / static_cast<double>(terms);
}

struct PredictionResult {
  std::vector<int> selected;  // subsequence of the interpretation variables
};

// Step 3: greedy forward pass over the interpretation variables, starting
// from the top-ranked one; a variable stays only when it lowers the OOB
// error by more than `threshold`.
inline PredictionResult prediction_step(const MixedDataFrame& df,
                                        const LabelVector& y,
                                        const std::vector<int>& interpretation,
                                        double threshold,
                                        const VsurfParams& params,
                                        std::uint64_t seed) {
  params.validate();
  if (interpretation.empty()) {
    throw std::invalid_argument("no interpretation variables");
  }
  PredictionResult result;
  result.selected.push_back(interpretation[0]);
  double err = detail::subset_oob(df, y, result.selected, params,
                                  derive_seed(seed, stream::kPredictionStep,
                                              0));
  for (std::size_t i = 1; i < interpretation.size(); ++i) {
    std::vector<int> candidate = result.selected;
    candidate.push_back(interpretation[i]);
    const double err_new = detail::subset_oob(
        df, y, candidate, params,
        derive_seed(seed, stream::kPredictionStep, i));
    if (err - err_new > threshold) {
      result.selected = std::move(candidate);
      err = err_new;
    }
  }
  return result;
}

struct VsurfResult {
  VIStats stats;
  std::vector<int> thresholded;     // step 1, by decreasing mean importance
  std::vector<int> interpretation;  // step 2, prefix of thresholded
  std::vector<int> prediction;      // step 3, subsequence of interpretation
  std::vector<double> nested_oob;   // step 2 errors, prefix sizes 1..K
  double vi_threshold = 0.0;
  double step3_threshold = 0.0;
};

inline VsurfResult vsurf(const MixedDataFrame& df, const LabelVector& y,
                         const VsurfParams& params, std::uint64_t seed) {
  VsurfResult out;
  out.stats =
      vi_statistics(df, y, params, derive_seed(seed, stream::kVsurf, 1));
  ThresholdResult thr = threshold_step(out.stats);
  out.thresholded = std::move(thr.selected);
  out.vi_threshold = thr.threshold;
  InterpretationResult interp =
      interpretation_step(df, y, out.thresholded, params,
                          derive_seed(seed, stream::kVsurf, 2));
  out.interpretation = std::move(interp.selected);
  out.nested_oob = std::move(interp.nested_oob);
  out.step3_threshold =
      prediction_threshold(out.nested_oob, out.interpretation.size());
  PredictionResult pred =
      prediction_step(df, y, out.interpretation, out.step3_threshold, params,
                      derive_seed(seed, stream::kVsurf, 3));
  out.prediction = std::move(pred.selected);
  return out;
}

}  // namespace covsurf
