#pragma once

// Principal component analysis for mixed data. Three steps:
//   1. preprocess: Z = (standardized numerics | centered level indicators),
//      row weights N = (1/n)I, column weights M = (1,...,1, n/n_s,...).
//   2. gsvd: Z = U Lambda V^t with U^t N U = V^t M V = I, computed as an
//      ordinary SVD of N^{1/2} Z M^{1/2} followed by back-scaling.
//   3. scores: principal components F = U Lambda, loadings A = M V Lambda,
//      and per-component prediction coefficients (beta_0, beta_j) so new
//      observations can be scored from raw values.
//
// Eigenvalues lambda_alpha are the squared singular values; the first one is
// the homogeneity criterion used by the variable-clustering module.

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "covsurf/mixed_data.hpp"

namespace covsurf {

// How one source variable maps into the expanded matrix Z.
struct VariableEncoding {
  ColumnKind kind = ColumnKind::kNumeric;
  int z_begin = 0;  // first expanded column
  int z_width = 1;  // 1 for numeric, level count for categorical
  double mean = 0.0;               // numeric only
  double sd = 0.0;                 // numeric only, population form
  std::vector<double> level_freq;  // categorical only, n_s/n per level
};

struct PcamixInput {
  Eigen::MatrixXd Z;           // n x (p1 + m)
  Eigen::VectorXd col_weight;  // diagonal of M
  std::vector<VariableEncoding> encodings;
  int n = 0;
  int p1 = 0;  // numeric variable count
  int p2 = 0;  // categorical variable count
  int m = 0;   // total level count over categorical variables
};

inline PcamixInput preprocess(const MixedDataFrame& df) {
  const int n = static_cast<int>(df.n_rows());
  if (n < 2) throw std::invalid_argument("need at least 2 rows");
  PcamixInput input;
  input.n = n;
  input.encodings.resize(df.n_cols());

  int width = 0;
  for (std::size_t j = 0; j < df.n_cols(); ++j) {
    if (df.kind(j) == ColumnKind::kNumeric) {
      ++input.p1;
      width += 1;
    } else {
      ++input.p2;
      input.m += static_cast<int>(df.level_count(j));
      width += static_cast<int>(df.level_count(j));
    }
  }
  input.Z.resize(n, width);
  input.col_weight.resize(width);

  int z = 0;
  for (std::size_t j = 0; j < df.n_cols(); ++j) {
    auto& enc = input.encodings[j];
    enc.kind = df.kind(j);
    enc.z_begin = z;
    if (df.kind(j) == ColumnKind::kNumeric) {
      enc.z_width = 1;
      const auto& cells = df.numeric_column(j);
      double mean = 0.0;
      for (double v : cells) mean += v;
      mean /= n;
      double var = 0.0;
      for (double v : cells) var += (v - mean) * (v - mean);
      var /= n;
      if (var == 0.0) {
        throw std::invalid_argument("zero variance: numeric column '" +
                                    df.name(j) + "' is constant");
      }
      enc.mean = mean;
      enc.sd = std::sqrt(var);
      for (int i = 0; i < n; ++i) {
        input.Z(i, z) = (cells[i] - mean) / enc.sd;
      }
      input.col_weight(z) = 1.0;
      ++z;
    } else {
      const int n_levels = static_cast<int>(df.level_count(j));
      enc.z_width = n_levels;
      std::vector<int> counts(n_levels, 0);
      const auto& cells = df.categorical_column(j);
      for (int v : cells) ++counts[v];
      enc.level_freq.resize(n_levels);
      for (int s = 0; s < n_levels; ++s) {
        if (counts[s] == 0) {
          throw std::invalid_argument(
              "empty level: level '" + df.schema().columns[j].levels[s] +
              "' of column '" + df.name(j) + "' does not occur");
        }
        enc.level_freq[s] = static_cast<double>(counts[s]) / n;
        for (int i = 0; i < n; ++i) {
          input.Z(i, z + s) = (cells[i] == s ? 1.0 : 0.0) - enc.level_freq[s];
        }
        input.col_weight(z + s) = static_cast<double>(n) / counts[s];
      }
      z += n_levels;
    }
  }
  return input;
}

// S = M^{1/2} Z^t (1/n) Z M^{1/2}. Its eigenvalues are the PCA eigenvalues,
// and any principal submatrix taken along one or more whole variables' columns
// is the S of the corresponding sub-frame (standardization is per-variable).
inline Eigen::MatrixXd weighted_gram(const PcamixInput& input) {
  const Eigen::VectorXd root = input.col_weight.cwiseSqrt();
  Eigen::MatrixXd w = input.Z * root.asDiagonal();
  return (w.transpose() * w) / static_cast<double>(input.n);
}

struct GsvdResult {
  Eigen::MatrixXd U;            // n x r, U^t N U = I
  Eigen::VectorXd sing;         // singular values, descending
  Eigen::VectorXd eigenvalues;  // sing^2
  Eigen::MatrixXd V;            // (p1+m) x r, V^t M V = I
  int rank = 0;
};

inline GsvdResult gsvd(const PcamixInput& input) {
  const double n = static_cast<double>(input.n);
  const Eigen::VectorXd root = input.col_weight.cwiseSqrt();
  const Eigen::MatrixXd w = (input.Z * root.asDiagonal()) / std::sqrt(n);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(
      w, Eigen::ComputeThinU | Eigen::ComputeThinV);

  const auto& sigma = svd.singularValues();
  const double largest = sigma.size() > 0 ? sigma(0) : 0.0;
  int rank = 0;
  while (rank < sigma.size() && sigma(rank) > 1e-10 * largest &&
         sigma(rank) > 0.0) {
    ++rank;
  }

  GsvdResult result;
  result.rank = rank;
  result.sing = sigma.head(rank);
  result.eigenvalues = result.sing.array().square();
  result.U = std::sqrt(n) * svd.matrixU().leftCols(rank);
  result.V = root.cwiseInverse().asDiagonal() * svd.matrixV().leftCols(rank);

  // Deterministic sign: flip each component so the V entry of largest
  // magnitude (first such index on ties) is positive.
  for (int a = 0; a < rank; ++a) {
    int arg = 0;
    double best = -1.0;
    for (int i = 0; i < result.V.rows(); ++i) {
      const double mag = std::abs(result.V(i, a));
      if (mag > best) {
        best = mag;
        arg = i;
      }
    }
    if (result.V(arg, a) < 0.0) {
      result.V.col(a) *= -1.0;
      result.U.col(a) *= -1.0;
    }
  }
  return result;
}

struct PcamixModel {
  Schema schema;  // training schema, for compatibility checks
  std::vector<VariableEncoding> encodings;
  int n = 0;
  int p1 = 0;
  int p2 = 0;
  int m = 0;
  Eigen::VectorXd eigenvalues;  // descending
  Eigen::MatrixXd U;            // n x r
  Eigen::MatrixXd V;            // (p1+m) x r
  Eigen::MatrixXd F;            // n x r principal components, Var = lambda
  Eigen::MatrixXd A;            // (p1+m) x r loadings, M V Lambda
  Eigen::VectorXd beta0;        // per component
  Eigen::MatrixXd beta;         // (p1+m) x r score coefficients

  int rank() const { return static_cast<int>(eigenvalues.size()); }
};

inline PcamixModel fit(const MixedDataFrame& df) {
  PcamixInput input = preprocess(df);
  const GsvdResult factors = gsvd(input);
  PcamixModel model;
  model.schema = df.schema();
  model.encodings = std::move(input.encodings);
  model.n = input.n;
  model.p1 = input.p1;
  model.p2 = input.p2;
  model.m = input.m;
  model.eigenvalues = factors.eigenvalues;
  model.U = factors.U;
  model.V = factors.V;
  model.F = factors.U * factors.sing.asDiagonal();
  model.A =
      input.col_weight.asDiagonal() * factors.V * factors.sing.asDiagonal();

  const int r = factors.rank;
  const int d = static_cast<int>(model.V.rows());
  model.beta0 = Eigen::VectorXd::Zero(r);
  model.beta = Eigen::MatrixXd::Zero(d, r);
  for (const auto& enc : model.encodings) {
    if (enc.kind == ColumnKind::kNumeric) {
      for (int a = 0; a < r; ++a) {
        const double v = model.V(enc.z_begin, a);
        model.beta(enc.z_begin, a) = v / enc.sd;
        model.beta0(a) -= v * enc.mean / enc.sd;
      }
    } else {
      for (int s = 0; s < enc.z_width; ++s) {
        for (int a = 0; a < r; ++a) {
          const double v = model.V(enc.z_begin + s, a);
          model.beta(enc.z_begin + s, a) = v / enc.level_freq[s];
          model.beta0(a) -= v;
        }
      }
    }
  }
  return model;
}

inline double first_eigenvalue(const MixedDataFrame& df) {
  const Eigen::MatrixXd s = weighted_gram(preprocess(df));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(
      s, Eigen::EigenvaluesOnly);
  return std::max(0.0, solver.eigenvalues().maxCoeff());
}

// Scores of new observations on the requested components, computed from raw
// values via the prediction coefficients. Training rows reproduce F.
inline Eigen::MatrixXd predict_scores(const PcamixModel& model,
                                      const MixedDataFrame& rows,
                                      const std::vector<int>& components) {
  check_schema_compatible(model.schema, rows.schema());
  for (int a : components) {
    if (a < 0 || a >= model.rank()) {
      throw std::invalid_argument("component index out of range");
    }
  }
  const std::size_t n = rows.n_rows();
  Eigen::MatrixXd scores(n, components.size());
  for (std::size_t c = 0; c < components.size(); ++c) {
    scores.col(c).setConstant(model.beta0(components[c]));
  }
  for (std::size_t j = 0; j < rows.n_cols(); ++j) {
    const auto& enc = model.encodings[j];
    if (enc.kind == ColumnKind::kNumeric) {
      const auto& cells = rows.numeric_column(j);
      for (std::size_t c = 0; c < components.size(); ++c) {
        const double b = model.beta(enc.z_begin, components[c]);
        for (std::size_t i = 0; i < n; ++i) scores(i, c) += b * cells[i];
      }
    } else {
      const auto& cells = rows.categorical_column(j);
      for (std::size_t c = 0; c < components.size(); ++c) {
        for (std::size_t i = 0; i < n; ++i) {
          scores(i, c) += model.beta(enc.z_begin + cells[i], components[c]);
        }
      }
    }
  }
  return scores;
}

inline Eigen::MatrixXd predict_scores(const PcamixModel& model,
                                      const MixedDataFrame& rows) {
  std::vector<int> all(model.rank());
  for (int a = 0; a < model.rank(); ++a) all[a] = a;
  return predict_scores(model, rows, all);
}

}  // namespace covsurf
