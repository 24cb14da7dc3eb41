#pragma once

// Hierarchical clustering of variables. A cluster's homogeneity is the first
// PCA eigenvalue of its columns; merging two clusters costs
//   d(A, B) = lambda1(A) + lambda1(B) - lambda1(A u B) >= 0,
// and the greedy algorithm performs the cheapest merge p-1 times. Each
// cluster is summarized by a synthetic variable: the cluster's first
// principal component, kept in prediction-coefficient form so new rows can be
// scored directly from raw values.
//
// There is no Lance-Williams update for this criterion, so dissimilarities
// involving a freshly merged cluster are recomputed. The key shortcut: with
// S = M^{1/2} Z^t (1/n) Z M^{1/2} precomputed once on the full frame,
// lambda1 of any cluster is the top eigenvalue of the principal submatrix of
// S over the cluster's expanded columns (standardization is per-variable, so
// sub-frame preprocessing equals restriction).

#include <algorithm>
#include <fstream>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "covsurf/pcamix.hpp"

namespace covsurf {

// One summand of a synthetic-variable score, tied to one source column.
struct SyntheticTerm {
  int column = 0;                  // index into the training schema
  double beta = 0.0;               // numeric columns: score += beta * x
  std::vector<double> level_beta;  // categorical: score += level_beta[level]
};

struct SyntheticVariable {
  std::vector<int> columns;  // sorted source-column indices
  double lambda1 = 0.0;
  double beta0 = 0.0;
  std::vector<SyntheticTerm> terms;
  std::vector<double> train_scores;

  double score(const MixedDataFrame& rows, std::size_t row) const {
    double value = beta0;
    for (const auto& term : terms) {
      if (term.level_beta.empty()) {
        value += term.beta * rows.num(term.column, row);
      } else {
        value += term.level_beta[rows.cat(term.column, row)];
      }
    }
    return value;
  }
};

// Precomputed quantities for fast per-cluster eigenvalue queries.
class HomogeneityKernel {
 public:
  explicit HomogeneityKernel(const MixedDataFrame& df)
      : input_(preprocess(df)), s_(weighted_gram(input_)) {}

  int n_variables() const { return static_cast<int>(input_.encodings.size()); }
  const PcamixInput& input() const { return input_; }

  double lambda1(const std::vector<int>& cols) const {
    const auto zidx = expanded_indices(cols);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(
        submatrix(zidx), Eigen::EigenvaluesOnly);
    return std::max(0.0, solver.eigenvalues().maxCoeff());
  }

  // Full synthetic variable (top eigenpair + prediction coefficients +
  // training scores) for the cluster.
  SyntheticVariable synthetic(const std::vector<int>& cols) const {
    const auto zidx = expanded_indices(cols);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(submatrix(zidx));
    const int top = static_cast<int>(zidx.size()) - 1;

    SyntheticVariable sv;
    sv.columns = cols;
    std::sort(sv.columns.begin(), sv.columns.end());
    sv.lambda1 = std::max(0.0, solver.eigenvalues()(top));

    // v = M^{-1/2} w restricted to the cluster, sign-fixed like the GSVD.
    Eigen::VectorXd w = solver.eigenvectors().col(top);
    Eigen::VectorXd v(zidx.size());
    for (std::size_t k = 0; k < zidx.size(); ++k) {
      v(k) = w(k) / std::sqrt(input_.col_weight(zidx[k]));
    }
    int arg = 0;
    double best = -1.0;
    for (int k = 0; k < v.size(); ++k) {
      if (std::abs(v(k)) > best) {
        best = std::abs(v(k));
        arg = k;
      }
    }
    if (v(arg) < 0.0) {
      v *= -1.0;
      w *= -1.0;
    }

    int k = 0;
    for (int j : sv.columns) {
      const auto& enc = input_.encodings[j];
      SyntheticTerm term;
      term.column = j;
      if (enc.kind == ColumnKind::kNumeric) {
        term.beta = v(k) / enc.sd;
        sv.beta0 -= v(k) * enc.mean / enc.sd;
        ++k;
      } else {
        term.level_beta.resize(enc.z_width);
        for (int s = 0; s < enc.z_width; ++s) {
          term.level_beta[s] = v(k) / enc.level_freq[s];
          sv.beta0 -= v(k);
          ++k;
        }
      }
      sv.terms.push_back(std::move(term));
    }

    // f = Z_sub M_sub v, i.e. sum_k Z(:,k) * m_k * v_k.
    Eigen::VectorXd f = Eigen::VectorXd::Zero(input_.n);
    for (std::size_t q = 0; q < zidx.size(); ++q) {
      f += input_.Z.col(zidx[q]) * (input_.col_weight(zidx[q]) * v(q));
    }
    sv.train_scores.assign(f.data(), f.data() + f.size());
    return sv;
  }

 private:
  std::vector<int> expanded_indices(const std::vector<int>& cols) const {
    if (cols.empty()) throw std::invalid_argument("empty cluster");
    std::vector<int> sorted(cols);
    std::sort(sorted.begin(), sorted.end());
    std::vector<int> zidx;
    for (int j : sorted) {
      if (j < 0 || j >= n_variables()) {
        throw std::invalid_argument("column index out of range");
      }
      const auto& enc = input_.encodings[j];
      for (int s = 0; s < enc.z_width; ++s) zidx.push_back(enc.z_begin + s);
    }
    return zidx;
  }

  Eigen::MatrixXd submatrix(const std::vector<int>& zidx) const {
    Eigen::MatrixXd sub(zidx.size(), zidx.size());
    for (std::size_t a = 0; a < zidx.size(); ++a) {
      for (std::size_t b = 0; b < zidx.size(); ++b) {
        sub(a, b) = s_(zidx[a], zidx[b]);
      }
    }
    return sub;
  }

  PcamixInput input_;
  Eigen::MatrixXd s_;
};

inline double homogeneity(const MixedDataFrame& df,
                          const std::vector<int>& cluster) {
  return first_eigenvalue(select_columns(df, cluster));
}

inline double dissimilarity(const MixedDataFrame& df,
                            const std::vector<int>& a,
                            const std::vector<int>& b) {
  std::vector<int> sa(a), sb(b);
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  std::vector<int> overlap;
  std::set_intersection(sa.begin(), sa.end(), sb.begin(), sb.end(),
                        std::back_inserter(overlap));
  if (!overlap.empty()) {
    throw std::invalid_argument("clusters overlap");
  }
  HomogeneityKernel kernel(df);
  std::vector<int> both(sa);
  both.insert(both.end(), sb.begin(), sb.end());
  return std::max(0.0,
                  kernel.lambda1(sa) + kernel.lambda1(sb) -
                      kernel.lambda1(both));
}

// Merge tree. Node ids: leaves are 0..p-1 (column order), the node created
// by merge t is p+t. Heights are the raw d(A,B) values; the sequence is not
// forced monotone (inversions are possible and preserved).
struct Merge {
  int left = 0;   // child whose minimum column index is smaller
  int right = 0;
  double height = 0.0;
};

struct CutCluster {
  int node = 0;
  std::vector<int> cols;  // sorted
};

struct Hierarchy {
  int p = 0;
  std::vector<std::string> leaf_names;
  std::vector<Merge> merges;  // p-1 entries

  // The nested K-cluster partition (after p-K merges), ordered by each
  // cluster's minimum column index.
  std::vector<CutCluster> cut(int K) const {
    if (K < 1 || K > p) {
      throw std::invalid_argument("cluster count out of range: K=" +
                                  std::to_string(K) + ", p=" +
                                  std::to_string(p));
    }
    std::vector<std::optional<std::vector<int>>> members(2 * p - 1);
    std::vector<bool> active(2 * p - 1, false);
    for (int j = 0; j < p; ++j) {
      members[j] = std::vector<int>{j};
      active[j] = true;
    }
    for (int t = 0; t < p - K; ++t) {
      const auto& m = merges[t];
      std::vector<int> merged;
      std::merge(members[m.left]->begin(), members[m.left]->end(),
                 members[m.right]->begin(), members[m.right]->end(),
                 std::back_inserter(merged));
      active[m.left] = false;
      active[m.right] = false;
      members[p + t] = std::move(merged);
      active[p + t] = true;
    }
    std::vector<CutCluster> result;
    for (int node = 0; node < 2 * p - 1; ++node) {
      if (active[node]) result.push_back({node, std::move(*members[node])});
    }
    std::sort(result.begin(), result.end(),
              [](const CutCluster& a, const CutCluster& b) {
                return a.cols.front() < b.cols.front();
              });
    return result;
  }

  // Leaves in dendrogram display order (left subtree first).
  std::vector<int> leaf_order() const {
    std::vector<int> order;
    std::vector<int> stack{2 * p - 2};
    while (!stack.empty()) {
      const int node = stack.back();
      stack.pop_back();
      if (node < p) {
        order.push_back(node);
      } else {
        const auto& m = merges[node - p];
        stack.push_back(m.right);
        stack.push_back(m.left);
      }
    }
    return order;
  }
};

// Greedy bottom-up clustering: start from singletons, repeatedly merge the
// pair with minimal d. Equal dissimilarities are broken toward the pair with
// the lexicographically smallest (smaller min column, then the other min
// column), which makes the tree independent of column order.
inline Hierarchy build_hierarchy(const MixedDataFrame& df) {
  const HomogeneityKernel kernel(df);
  const int p = static_cast<int>(df.n_cols());
  Hierarchy hierarchy;
  hierarchy.p = p;
  for (int j = 0; j < p; ++j) hierarchy.leaf_names.push_back(df.name(j));
  if (p == 1) return hierarchy;

  struct Node {
    int id;
    std::vector<int> cols;
    double lambda1;
  };
  std::vector<Node> active;
  active.reserve(p);
  for (int j = 0; j < p; ++j) {
    active.push_back({j, {j}, kernel.lambda1({j})});
  }

  const auto pair_d = [&](const Node& a, const Node& b) {
    std::vector<int> both;
    std::merge(a.cols.begin(), a.cols.end(), b.cols.begin(), b.cols.end(),
               std::back_inserter(both));
    return std::max(0.0, a.lambda1 + b.lambda1 - kernel.lambda1(both));
  };

  // Symmetric dissimilarity matrix over active slots; rows/columns are
  // repaired after each swap-pop removal.
  Eigen::MatrixXd dist(p, p);
  for (std::size_t i = 0; i < active.size(); ++i) {
    for (std::size_t j = i + 1; j < active.size(); ++j) {
      dist(i, j) = dist(j, i) = pair_d(active[i], active[j]);
    }
  }

  for (int step = 0; step < p - 1; ++step) {
    std::size_t bi = 0, bj = 1;
    double best = std::numeric_limits<double>::infinity();
    auto key = [&](std::size_t i, std::size_t j) {
      return std::minmax(active[i].cols.front(), active[j].cols.front());
    };
    for (std::size_t i = 0; i < active.size(); ++i) {
      for (std::size_t j = i + 1; j < active.size(); ++j) {
        const double d = dist(i, j);
        if (d < best || (d == best && key(i, j) < key(bi, bj))) {
          best = d;
          bi = i;
          bj = j;
        }
      }
    }

    Node merged;
    merged.id = p + step;
    std::merge(active[bi].cols.begin(), active[bi].cols.end(),
               active[bj].cols.begin(), active[bj].cols.end(),
               std::back_inserter(merged.cols));
    merged.lambda1 = kernel.lambda1(merged.cols);

    Merge record;
    const bool left_first =
        active[bi].cols.front() < active[bj].cols.front();
    record.left = left_first ? active[bi].id : active[bj].id;
    record.right = left_first ? active[bj].id : active[bi].id;
    record.height = best;
    hierarchy.merges.push_back(record);

    // Remove slots bi and bj (larger index first), then append the merged
    // cluster and fill in its dissimilarities.
    const auto remove_slot = [&](std::size_t slot) {
      const std::size_t last = active.size() - 1;
      if (slot != last) {
        active[slot] = std::move(active[last]);
        for (std::size_t k = 0; k < last; ++k) {
          dist(slot, k) = dist(k, slot) = dist(last, k);
        }
      }
      active.pop_back();
    };
    remove_slot(std::max(bi, bj));
    remove_slot(std::min(bi, bj));
    active.push_back(std::move(merged));
    const std::size_t slot = active.size() - 1;
    for (std::size_t k = 0; k + 1 < active.size(); ++k) {
      dist(slot, k) = dist(k, slot) = pair_d(active[k], active[slot]);
    }
  }
  return hierarchy;
}

struct PartitionModel {
  Schema schema;  // full training schema
  std::vector<SyntheticVariable> clusters;  // ordered by min column index
  double homogeneity = 0.0;

  std::size_t size() const { return clusters.size(); }

  // n x K matrix of synthetic-variable scores for schema-compatible rows.
  Eigen::MatrixXd scores(const MixedDataFrame& rows) const {
    check_schema_compatible(schema, rows.schema());
    Eigen::MatrixXd out(rows.n_rows(), clusters.size());
    for (std::size_t k = 0; k < clusters.size(); ++k) {
      for (std::size_t i = 0; i < rows.n_rows(); ++i) {
        out(i, k) = clusters[k].score(rows, i);
      }
    }
    return out;
  }
};

inline Eigen::MatrixXd synthetic_scores(const PartitionModel& partition,
                                        const MixedDataFrame& rows) {
  return partition.scores(rows);
}

// Builds partitions from one hierarchy while memoizing synthetic variables
// per tree node, so sweeping over many K values fits each node only once.
class PartitionBuilder {
 public:
  PartitionBuilder(const MixedDataFrame& df, const Hierarchy& hierarchy)
      : df_(df),
        hierarchy_(hierarchy),
        kernel_(df),
        cache_(2 * hierarchy.p - 1) {}

  const SyntheticVariable& node_synthetic(int node,
                                          const std::vector<int>& cols) {
    auto& slot = cache_.at(node);
    if (!slot) slot = kernel_.synthetic(cols);
    return *slot;
  }

  PartitionModel partition(int K) {
    PartitionModel model;
    model.schema = df_.schema();
    for (const auto& cluster : hierarchy_.cut(K)) {
      const auto& sv = node_synthetic(cluster.node, cluster.cols);
      model.homogeneity += sv.lambda1;
      model.clusters.push_back(sv);
    }
    return model;
  }

 private:
  const MixedDataFrame& df_;
  const Hierarchy& hierarchy_;
  HomogeneityKernel kernel_;
  std::vector<std::optional<SyntheticVariable>> cache_;
};

inline PartitionModel cut(const MixedDataFrame& df, const Hierarchy& hierarchy,
                          int K) {
  PartitionBuilder builder(df, hierarchy);
  return builder.partition(K);
}

// Text export, one merge per line. Leaves keep their column names; node ids
// follow the Hierarchy convention.
inline void write_dendrogram(const Hierarchy& hierarchy,
                             const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  out << "p " << hierarchy.p << '\n';
  for (int j = 0; j < hierarchy.p; ++j) {
    out << "leaf " << j << ' ' << hierarchy.leaf_names[j] << '\n';
  }
  for (const auto& m : hierarchy.merges) {
    out << "merge " << m.left << ' ' << m.right << ' '
        << format_double(m.height) << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace covsurf
