#pragma once

// Synthetic benchmark generator: 120 variables in ten blocks. Nine blocks of
// sizes 3/15/12 are drawn from an equicorrelated Gaussian (correlation rho
// within a block, independent across blocks); the last 30 variables are
// independent noise with variance sigma2. Three of the correlated blocks stay
// numeric, three are dichotomized at the median, and three are mixed (the
// last third of each dichotomized). Binary labels follow a logistic model on
// the small and large blocks, centered so the classes are balanced; the
// moderate blocks and the noise variables carry no signal.

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "covsurf/mixed_data.hpp"
#include "covsurf/rng.hpp"

namespace covsurf {

inline constexpr int kSimColumns = 120;

struct SimConfig {
  std::size_t n = 600;
  double rho = 0.9;
  double sigma2 = 1.0;
  std::uint64_t seed = 0;
  bool theoretical_median = false;  // dichotomize at 0 instead of the sample

  void validate() const {
    if (n < 2) throw std::invalid_argument("need at least 2 rows");
    // Equicorrelation is positive definite for rho in (-1/(s-1), 1); the
    // largest block has s = 15.
    if (rho <= -1.0 / 14.0 || rho >= 1.0) {
      throw std::invalid_argument("rho must lie in (-1/14, 1)");
    }
    if (!(sigma2 > 0.0)) {
      throw std::invalid_argument("sigma2 must be positive");
    }
  }
};

enum class GroupType { kNumeric, kCategorical, kMixed, kNoise };

struct GroupInfo {
  std::string name;
  int first_col = 0;  // 0-based
  int size = 0;
  bool informative = false;
  GroupType type = GroupType::kNoise;

  // Mixed blocks have their last third dichotomized; categorical blocks all
  // of it, numeric and noise blocks none.
  int binarized_count() const {
    switch (type) {
      case GroupType::kCategorical:
        return size;
      case GroupType::kMixed:
        return size / 3;
      default:
        return 0;
    }
  }
};

inline const std::vector<GroupInfo>& group_layout() {
  static const std::vector<GroupInfo> layout = {
      {"NumS", 0, 3, true, GroupType::kNumeric},
      {"NumL", 3, 15, true, GroupType::kNumeric},
      {"NumM", 18, 12, false, GroupType::kNumeric},
      {"CategS", 30, 3, true, GroupType::kCategorical},
      {"CategL", 33, 15, true, GroupType::kCategorical},
      {"CategM", 48, 12, false, GroupType::kCategorical},
      {"MixedS", 60, 3, true, GroupType::kMixed},
      {"MixedL", 63, 15, true, GroupType::kMixed},
      {"MixedM", 78, 12, false, GroupType::kMixed},
      {"Noise", 90, 30, false, GroupType::kNoise},
  };
  return layout;
}

// Logistic coefficients on the 120 columns: (1, 2, 3) on each informative
// small block, (1/5)(1,...,1, 2,...,2, 3,...,3) on each informative large
// block, zero elsewhere.
inline std::vector<double> informative_beta() {
  std::vector<double> beta(kSimColumns, 0.0);
  for (const GroupInfo& group : group_layout()) {
    if (!group.informative) continue;
    for (int k = 0; k < group.size; ++k) {
      beta[group.first_col + k] =
          group.size == 3 ? k + 1 : (k / 5 + 1) / 5.0;
    }
  }
  return beta;
}

inline bool column_is_binarized(int col) {
  for (const GroupInfo& group : group_layout()) {
    if (col >= group.first_col && col < group.first_col + group.size) {
      return col >= group.first_col + group.size - group.binarized_count();
    }
  }
  throw std::invalid_argument("column index out of range");
}

inline Eigen::MatrixXd covariance(const SimConfig& config) {
  config.validate();
  Eigen::MatrixXd sigma = Eigen::MatrixXd::Zero(kSimColumns, kSimColumns);
  for (const GroupInfo& group : group_layout()) {
    for (int a = 0; a < group.size; ++a) {
      for (int b = 0; b < group.size; ++b) {
        double value;
        if (group.type == GroupType::kNoise) {
          value = a == b ? config.sigma2 : 0.0;
        } else {
          value = a == b ? 1.0 : config.rho;
        }
        sigma(group.first_col + a, group.first_col + b) = value;
      }
    }
  }
  return sigma;
}

struct SimulatedData {
  MixedDataFrame frame;
  LabelVector labels;
};

inline SimulatedData generate(const SimConfig& config) {
  config.validate();
  const auto n = static_cast<Eigen::Index>(config.n);

  Eigen::LLT<Eigen::MatrixXd> llt(covariance(config));
  if (llt.info() != Eigen::Success) {
    throw std::runtime_error("covariance not positive definite");
  }
  const Eigen::MatrixXd chol_l = llt.matrixL();

  // Draw order is fixed: all n x 120 normals row by row, then one label
  // uniform per row.
  Rng rng(config.seed);
  Eigen::MatrixXd normals(n, kSimColumns);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int k = 0; k < kSimColumns; k += 2) {
      const auto [a, b] = rng.normal_pair();
      normals(i, k) = a;
      normals(i, k + 1) = b;
    }
  }
  const Eigen::MatrixXd latent = normals * chol_l.transpose();

  Schema schema;
  std::vector<ColumnValues> columns;
  for (const GroupInfo& group : group_layout()) {
    for (int k = 0; k < group.size; ++k) {
      const int col = group.first_col + k;
      const double* values = latent.col(col).data();  // column-major storage
      SchemaColumn spec;
      spec.name = group.name + std::to_string(k + 1);
      if (column_is_binarized(col)) {
        spec.kind = ColumnKind::kCategorical;
        spec.levels = {"0", "1"};
        double median = 0.0;
        if (!config.theoretical_median) {
          std::vector<double> sorted(values, values + config.n);
          std::sort(sorted.begin(), sorted.end());
          median = config.n % 2 == 1
                       ? sorted[config.n / 2]
                       : (sorted[config.n / 2 - 1] + sorted[config.n / 2]) / 2;
        }
        CategoricalColumn cells(config.n);
        for (std::size_t i = 0; i < config.n; ++i) {
          cells[i] = values[i] < median ? 0 : 1;
        }
        columns.emplace_back(std::move(cells));
      } else {
        spec.kind = ColumnKind::kNumeric;
        columns.emplace_back(NumericColumn(values, values + config.n));
      }
      schema.columns.push_back(std::move(spec));
    }
  }
  MixedDataFrame frame(std::move(schema), std::move(columns));

  // Logistic scores use the frame as delivered: dichotomized columns enter
  // as 0/1. The intercept centers the score at the balanced point (each
  // binary column contributes its coefficient half the time).
  const std::vector<double> beta = informative_beta();
  double offset = 0.0;
  for (int col = 0; col < kSimColumns; ++col) {
    if (column_is_binarized(col)) offset += 0.5 * beta[col];
  }
  std::vector<int> ids(config.n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double score = -offset;
    for (int col = 0; col < kSimColumns; ++col) {
      if (beta[col] == 0.0) continue;
      score += beta[col] * (frame.kind(col) == ColumnKind::kCategorical
                                ? static_cast<double>(frame.cat(col, i))
                                : frame.num(col, i));
    }
    const double prob = 1.0 / (1.0 + std::exp(-score));
    ids[i] = rng.uniform01() < prob ? 1 : 0;
  }
  LabelVector labels(std::move(ids), {"0", "1"});
  return {std::move(frame), std::move(labels)};
}

}  // namespace covsurf
