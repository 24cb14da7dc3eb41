#pragma once

// CART-based random forest classifier. Trees are grown fully (no pruning) on
// bootstrap samples; at each impure node `mtry` candidate variables are drawn
// without replacement and the split minimizing the children's count-weighted
// Gini sum is taken. Numeric splits test {x <= v} at midpoints of consecutive
// distinct values; categorical splits test level subsets exhaustively (at
// most 10 levels). Ties are broken deterministically: smallest variable
// index, then smallest threshold or lexicographically smallest level subset.
//
// All randomness is derived per tree from (seed, tree index) and per
// permutation from (seed, tree index, variable index), so results are
// independent of the parallel schedule.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "covsurf/mixed_data.hpp"
#include "covsurf/parallel.hpp"
#include "covsurf/rng.hpp"

namespace covsurf {

inline constexpr int kMaxSplitLevels = 10;

inline double gini(const std::vector<int>& class_counts) {
  long total = 0;
  for (int c : class_counts) total += c;
  if (total <= 0) throw std::invalid_argument("empty node");
  double sum_sq = 0.0;
  for (int c : class_counts) {
    const double p = static_cast<double>(c) / static_cast<double>(total);
    sum_sq += p * p;
  }
  return 1.0 - sum_sq;
}

struct SplitCandidate {
  int variable = -1;             // -1 means no admissible split
  bool categorical = false;
  double threshold = 0.0;        // numeric: x <= threshold goes left
  std::uint32_t level_mask = 0;  // categorical: set bits go left
  double impurity = std::numeric_limits<double>::infinity();

  bool valid() const { return variable >= 0; }
};

struct TreeNode {
  int variable = -1;  // -1 for leaves
  bool categorical = false;
  double threshold = 0.0;
  std::uint32_t level_mask = 0;
  int left = -1;
  int right = -1;
  int label = 0;  // majority class of the node's training rows
};

struct Tree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root
  std::vector<int> bootstrap;   // drawn row indices, size n
  std::vector<int> oob;         // rows never drawn, ascending
  std::vector<int> used_vars;   // variables appearing in splits, ascending
};

struct Forest {
  std::vector<Tree> trees;
  int mtry = 1;
  std::uint64_t seed = 0;
  Schema schema;
  std::vector<std::string> classes;
  std::size_t n_train = 0;

  std::size_t size() const { return trees.size(); }
};

namespace detail {

// Raw column pointers, resolved once per frame to keep node loops tight.
struct FrameView {
  std::vector<const double*> nums;
  std::vector<const int*> cats;

  explicit FrameView(const MixedDataFrame& df)
      : nums(df.n_cols(), nullptr), cats(df.n_cols(), nullptr) {
    for (std::size_t j = 0; j < df.n_cols(); ++j) {
      if (df.kind(j) == ColumnKind::kNumeric) {
        nums[j] = df.numeric_column(j).data();
      } else {
        cats[j] = df.categorical_column(j).data();
      }
    }
  }
};

// Walks a tree for one row; the value of variable `ov_var` (if >= 0) is read
// from the override column instead of the frame.
inline int traverse(const std::vector<TreeNode>& nodes, const FrameView& view,
                    int row, int ov_var = -1, const double* ov_num = nullptr,
                    const int* ov_cat = nullptr) {
  int idx = 0;
  while (nodes[idx].variable >= 0) {
    const TreeNode& node = nodes[idx];
    bool go_left;
    if (node.categorical) {
      const int level = node.variable == ov_var && ov_cat
                            ? ov_cat[row]
                            : view.cats[node.variable][row];
      go_left = (node.level_mask >> level) & 1u;
    } else {
      const double v = node.variable == ov_var && ov_num
                           ? ov_num[row]
                           : view.nums[node.variable][row];
      go_left = v <= node.threshold;
    }
    idx = go_left ? node.left : node.right;
  }
  return nodes[idx].label;
}

// True if the sorted level subset of `a` precedes that of `b`
// lexicographically (used only to break exact impurity ties).
inline bool subset_lex_less(std::uint32_t a, std::uint32_t b) {
  while (a != 0 && b != 0) {
    const int la = std::countr_zero(a);
    const int lb = std::countr_zero(b);
    if (la != lb) return la < lb;
    a &= a - 1;
    b &= b - 1;
  }
  return a == 0 && b != 0;  // proper prefix is smaller
}

inline SplitCandidate best_split_view(
    const FrameView& view, const MixedDataFrame& df,
    const std::vector<int>& y_ids, int n_classes,
    const std::vector<int>& rows, const std::vector<int>& candidates,
    std::vector<std::pair<double, int>>& scratch) {
  SplitCandidate best;
  const double n_node = static_cast<double>(rows.size());

  for (int j : candidates) {
    if (df.kind(j) == ColumnKind::kNumeric) {
      scratch.clear();
      const double* col = view.nums[j];
      for (int r : rows) scratch.emplace_back(col[r], y_ids[r]);
      std::sort(scratch.begin(), scratch.end(),
                [](const auto& a, const auto& b) { return a.first < b.first; });

      std::vector<long> left(n_classes, 0), right(n_classes, 0);
      for (const auto& [v, c] : scratch) ++right[c];
      double sum_l2 = 0.0, sum_r2 = 0.0;
      for (long c : right) sum_r2 += static_cast<double>(c) * c;
      long nl = 0;
      const long total = static_cast<long>(scratch.size());
      for (std::size_t i = 0; i + 1 < scratch.size(); ++i) {
        const int c = scratch[i].second;
        sum_l2 += 2.0 * left[c] + 1.0;
        sum_r2 -= 2.0 * right[c] - 1.0;
        ++left[c];
        --right[c];
        ++nl;
        if (scratch[i].first == scratch[i + 1].first) continue;
        const double impurity =
            1.0 - (sum_l2 / nl + sum_r2 / (total - nl)) / n_node;
        if (impurity < best.impurity) {
          best.variable = j;
          best.categorical = false;
          best.threshold = (scratch[i].first + scratch[i + 1].first) / 2.0;
          best.level_mask = 0;
          best.impurity = impurity;
        }
        // Equal impurity at a later variable or larger threshold never
        // replaces the incumbent: candidates are visited in ascending
        // variable order and thresholds in ascending value order.
      }
    } else {
      const int m = static_cast<int>(df.level_count(j));
      if (m > kMaxSplitLevels) {
        throw std::invalid_argument("too many levels: column '" + df.name(j) +
                                    "' has " + std::to_string(m));
      }
      const int* col = view.cats[j];
      std::vector<long> level_class(static_cast<std::size_t>(m) * n_classes,
                                    0);
      std::vector<long> level_total(m, 0);
      std::vector<long> node_class(n_classes, 0);
      for (int r : rows) {
        ++level_class[static_cast<std::size_t>(col[r]) * n_classes +
                      y_ids[r]];
        ++level_total[col[r]];
        ++node_class[y_ids[r]];
      }
      const long total = static_cast<long>(rows.size());
      // Each unordered two-block partition appears once: the top level is
      // fixed to the right side and the remaining levels range over all
      // non-empty proper subsets.
      const std::uint32_t mask_end = 1u << (m - 1);
      for (std::uint32_t mask = 1; mask < mask_end; ++mask) {
        long nl = 0;
        double sum_l2 = 0.0, sum_r2 = 0.0;
        for (int c = 0; c < n_classes; ++c) {
          long cl = 0;
          for (int s = 0; s < m; ++s) {
            if ((mask >> s) & 1u) {
              cl += level_class[static_cast<std::size_t>(s) * n_classes + c];
            }
          }
          const long cr = node_class[c] - cl;
          sum_l2 += static_cast<double>(cl) * cl;
          sum_r2 += static_cast<double>(cr) * cr;
          nl += cl;
        }
        if (nl == 0 || nl == total) continue;  // empty child
        const double impurity =
            1.0 - (sum_l2 / nl + sum_r2 / (total - nl)) / n_node;
        if (impurity < best.impurity ||
            (impurity == best.impurity && best.variable == j &&
             best.categorical && subset_lex_less(mask, best.level_mask))) {
          best.variable = j;
          best.categorical = true;
          best.threshold = 0.0;
          best.level_mask = mask;
          best.impurity = impurity;
        }
      }
    }
  }
  return best;
}

inline int majority_label(const std::vector<long>& counts) {
  int label = 0;
  long best = -1;
  for (std::size_t c = 0; c < counts.size(); ++c) {
    if (counts[c] > best) {
      best = counts[c];
      label = static_cast<int>(c);
    }
  }
  return label;
}

inline Tree grow_tree(const MixedDataFrame& df, const FrameView& view,
                      const std::vector<int>& y_ids, int n_classes, int mtry,
                      Rng& rng) {
  const int n = static_cast<int>(df.n_rows());
  const int p = static_cast<int>(df.n_cols());
  Tree tree;
  tree.bootstrap.reserve(n);
  std::vector<bool> drawn(n, false);
  for (int i = 0; i < n; ++i) {
    const int r = static_cast<int>(rng.below(n));
    tree.bootstrap.push_back(r);
    drawn[r] = true;
  }
  for (int i = 0; i < n; ++i) {
    if (!drawn[i]) tree.oob.push_back(i);
  }

  std::vector<int> pool(p);
  for (int j = 0; j < p; ++j) pool[j] = j;
  std::vector<int> candidates;
  std::vector<std::pair<double, int>> scratch;
  std::vector<bool> used(p, false);

  struct Job {
    int node;
    std::vector<int> rows;
  };
  std::deque<Job> queue;
  tree.nodes.emplace_back();
  queue.push_back({0, tree.bootstrap});

  while (!queue.empty()) {
    Job job = std::move(queue.front());
    queue.pop_front();

    std::vector<long> counts(n_classes, 0);
    for (int r : job.rows) ++counts[y_ids[r]];
    tree.nodes[job.node].label = majority_label(counts);

    long present = 0;
    for (long c : counts) present += c > 0 ? 1 : 0;
    if (present <= 1 || job.rows.size() < 2) continue;  // pure or single row

    sample_indices(pool, mtry, rng, candidates);
    const SplitCandidate split = best_split_view(
        view, df, y_ids, n_classes, job.rows, candidates, scratch);
    if (!split.valid()) continue;  // all candidates constant on this node

    std::vector<int> left_rows, right_rows;
    if (split.categorical) {
      const int* col = view.cats[split.variable];
      for (int r : job.rows) {
        ((split.level_mask >> col[r]) & 1u ? left_rows : right_rows)
            .push_back(r);
      }
    } else {
      const double* col = view.nums[split.variable];
      for (int r : job.rows) {
        (col[r] <= split.threshold ? left_rows : right_rows).push_back(r);
      }
    }

    const int left = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    tree.nodes.emplace_back();
    TreeNode& node = tree.nodes[job.node];
    node.variable = split.variable;
    node.categorical = split.categorical;
    node.threshold = split.threshold;
    node.level_mask = split.level_mask;
    node.left = left;
    node.right = left + 1;
    used[split.variable] = true;
    queue.push_back({left, std::move(left_rows)});
    queue.push_back({left + 1, std::move(right_rows)});
  }

  for (int j = 0; j < p; ++j) {
    if (used[j]) tree.used_vars.push_back(j);
  }
  return tree;
}

}  // namespace detail

// Best split of the given rows among the candidate variables; an invalid
// candidate means no admissible split exists (all candidates constant).
inline SplitCandidate best_split(const MixedDataFrame& df,
                                 const LabelVector& y,
                                 const std::vector<int>& rows,
                                 const std::vector<int>& candidates) {
  if (rows.empty()) throw std::invalid_argument("empty node");
  if (candidates.empty()) throw std::invalid_argument("no candidate variables");
  const detail::FrameView view(df);
  std::vector<std::pair<double, int>> scratch;
  return detail::best_split_view(view, df, y.ids(),
                                 static_cast<int>(y.n_classes()), rows,
                                 candidates, scratch);
}

inline Forest train_forest(const MixedDataFrame& df, const LabelVector& y,
                           int q, int mtry, std::uint64_t seed) {
  if (df.n_rows() < 2) throw std::invalid_argument("need at least 2 rows");
  if (y.size() != df.n_rows()) {
    throw std::invalid_argument("label/row count mismatch");
  }
  if (y.distinct_present() < 2) {
    throw std::invalid_argument("degenerate labels");
  }
  if (q < 1) throw std::invalid_argument("need at least one tree");
  if (mtry < 1 || mtry > static_cast<int>(df.n_cols())) {
    throw std::invalid_argument("mtry out of range");
  }
  for (std::size_t j = 0; j < df.n_cols(); ++j) {
    if (df.kind(j) == ColumnKind::kCategorical &&
        df.level_count(j) > kMaxSplitLevels) {
      throw std::invalid_argument("too many levels: column '" + df.name(j) +
                                  "' has " + std::to_string(df.level_count(j)));
    }
  }

  Forest forest;
  forest.mtry = mtry;
  forest.seed = seed;
  forest.schema = df.schema();
  forest.classes = y.classes();
  forest.n_train = df.n_rows();
  forest.trees.resize(q);

  const detail::FrameView view(df);
  const int n_classes = static_cast<int>(y.n_classes());
  parallel_for(q, [&](std::size_t l) {
    Rng rng(derive_seed(seed, stream::kTree, l));
    forest.trees[l] =
        detail::grow_tree(df, view, y.ids(), n_classes, mtry, rng);
  });
  return forest;
}

inline LabelVector predict(const Forest& forest, const MixedDataFrame& rows) {
  check_schema_compatible(forest.schema, rows.schema());
  const detail::FrameView view(rows);
  const int n_classes = static_cast<int>(forest.classes.size());
  std::vector<int> ids(rows.n_rows());
  std::vector<long> votes(n_classes);
  for (std::size_t i = 0; i < rows.n_rows(); ++i) {
    std::fill(votes.begin(), votes.end(), 0);
    for (const auto& tree : forest.trees) {
      ++votes[detail::traverse(tree.nodes, view, static_cast<int>(i))];
    }
    ids[i] = detail::majority_label(votes);
  }
  return LabelVector(std::move(ids), forest.classes);
}

// OOB error: each row is voted on only by trees whose bootstrap missed it;
// rows no tree missed are excluded from the denominator.
inline double oob_error(const Forest& forest, const MixedDataFrame& df,
                        const LabelVector& y) {
  if (df.n_rows() != forest.n_train || y.size() != forest.n_train) {
    throw std::invalid_argument("frame is not the training data");
  }
  const detail::FrameView view(df);
  const int n_classes = static_cast<int>(forest.classes.size());
  std::vector<std::vector<long>> votes(df.n_rows(),
                                       std::vector<long>(n_classes, 0));
  for (const auto& tree : forest.trees) {
    for (int r : tree.oob) {
      ++votes[r][detail::traverse(tree.nodes, view, r)];
    }
  }
  long counted = 0, wrong = 0;
  for (std::size_t i = 0; i < df.n_rows(); ++i) {
    long total = 0;
    for (long v : votes[i]) total += v;
    if (total == 0) continue;
    ++counted;
    if (detail::majority_label(votes[i]) != y.id(i)) ++wrong;
  }
  if (counted == 0) throw std::runtime_error("no out-of-bag rows");
  return static_cast<double>(wrong) / static_cast<double>(counted);
}

struct VIReport {
  std::vector<double> importance;  // per variable, Eq.-style OOB permutation
  std::vector<double> tree_err;    // err per tree (NaN if tree has no OOB)
  std::vector<std::vector<double>> tree_errperm;  // [variable][tree]
  int trees_used = 0;
  std::vector<std::string> warnings;
};

// Permutation variable importance: per tree, the OOB error increase after
// permuting one variable's values within the tree's OOB rows, averaged over
// trees. Trees without OOB rows are excluded (with a warning) and the
// divisor adjusted. A variable no tree splits on has importance exactly 0.
inline VIReport variable_importance(const Forest& forest,
                                    const MixedDataFrame& df,
                                    const LabelVector& y, std::uint64_t seed,
                                    int repeats = 1) {
  if (df.n_rows() != forest.n_train || y.size() != forest.n_train) {
    throw std::invalid_argument("frame is not the training data");
  }
  if (repeats < 1) throw std::invalid_argument("repeats must be positive");
  const detail::FrameView view(df);
  const int p = static_cast<int>(df.n_cols());
  const int q = static_cast<int>(forest.trees.size());
  const double nan = std::numeric_limits<double>::quiet_NaN();

  VIReport report;
  report.importance.assign(p, 0.0);
  report.tree_err.assign(q, nan);
  report.tree_errperm.assign(p, std::vector<double>(q, nan));

  parallel_for(q, [&](std::size_t l) {
    const Tree& tree = forest.trees[l];
    if (tree.oob.empty()) return;
    const auto oob_misses = [&](int ov_var, const double* ov_num,
                                const int* ov_cat) {
      long wrong = 0;
      for (int r : tree.oob) {
        if (detail::traverse(tree.nodes, view, r, ov_var, ov_num, ov_cat) !=
            y.id(r)) {
          ++wrong;
        }
      }
      return static_cast<double>(wrong) /
             static_cast<double>(tree.oob.size());
    };
    const double err = oob_misses(-1, nullptr, nullptr);
    report.tree_err[l] = err;

    std::vector<double> num_buffer;
    std::vector<int> cat_buffer;
    for (int j = 0; j < p; ++j) {
      const bool used = std::binary_search(tree.used_vars.begin(),
                                           tree.used_vars.end(), j);
      if (!used) {
        // Permuting a variable the tree never reads cannot change any path.
        report.tree_errperm[j][l] = err;
        continue;
      }
      Rng rng(derive_seed(seed, stream::kPermutation, l, j));
      double total = 0.0;
      for (int rep = 0; rep < repeats; ++rep) {
        if (df.kind(j) == ColumnKind::kNumeric) {
          num_buffer.assign(df.numeric_column(j).begin(),
                            df.numeric_column(j).end());
          std::vector<double> values;
          values.reserve(tree.oob.size());
          for (int r : tree.oob) values.push_back(num_buffer[r]);
          rng.shuffle(values);
          for (std::size_t k = 0; k < tree.oob.size(); ++k) {
            num_buffer[tree.oob[k]] = values[k];
          }
          total += oob_misses(j, num_buffer.data(), nullptr);
        } else {
          cat_buffer.assign(df.categorical_column(j).begin(),
                            df.categorical_column(j).end());
          std::vector<int> values;
          values.reserve(tree.oob.size());
          for (int r : tree.oob) values.push_back(cat_buffer[r]);
          rng.shuffle(values);
          for (std::size_t k = 0; k < tree.oob.size(); ++k) {
            cat_buffer[tree.oob[k]] = values[k];
          }
          total += oob_misses(j, nullptr, cat_buffer.data());
        }
      }
      report.tree_errperm[j][l] = total / repeats;
    }
  });

  for (int l = 0; l < q; ++l) {
    if (std::isnan(report.tree_err[l])) {
      report.warnings.push_back("tree " + std::to_string(l) +
                                " has no out-of-bag rows; excluded");
      continue;
    }
    ++report.trees_used;
  }
  if (report.trees_used == 0) {
    throw std::runtime_error("no out-of-bag rows");
  }
  for (int j = 0; j < p; ++j) {
    double sum = 0.0;
    for (int l = 0; l < q; ++l) {
      if (std::isnan(report.tree_err[l])) continue;
      sum += report.tree_errperm[j][l] - report.tree_err[l];
    }
    report.importance[j] = sum / report.trees_used;
  }
  return report;
}

// Misclassification fraction; labels are compared by class name so the two
// vectors may carry different class lists.
inline double misclassification(const LabelVector& predicted,
                                const LabelVector& truth) {
  if (predicted.size() != truth.size()) {
    throw std::invalid_argument("length mismatch");
  }
  long wrong = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (predicted.class_name(predicted.id(i)) !=
        truth.class_name(truth.id(i))) {
      ++wrong;
    }
  }
  return static_cast<double>(wrong) / static_cast<double>(truth.size());
}

}  // namespace covsurf
