#include "covsurf/simulation.hpp"

#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <vector>

#include "test_support.hpp"

namespace covsurf {
namespace {

double pearson(const NumericColumn& u, const NumericColumn& x) {
  const double n = static_cast<double>(u.size());
  double mu = 0.0, mx = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    mu += u[i];
    mx += x[i];
  }
  mu /= n;
  mx /= n;
  double suu = 0.0, sxx = 0.0, sux = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    suu += (u[i] - mu) * (u[i] - mu);
    sxx += (x[i] - mx) * (x[i] - mx);
    sux += (u[i] - mu) * (x[i] - mx);
  }
  return sux / std::sqrt(suu * sxx);
}

TEST(Simulation, GroupLayoutCoversAllColumns) {
  const auto& layout = group_layout();
  ASSERT_EQ(layout.size(), 10u);
  int next = 0;
  int informative = 0, categorical_cols = 0;
  for (const GroupInfo& group : layout) {
    EXPECT_EQ(group.first_col, next);
    next += group.size;
    if (group.informative) ++informative;
    categorical_cols += group.binarized_count();
  }
  EXPECT_EQ(next, kSimColumns);
  EXPECT_EQ(informative, 6);
  EXPECT_EQ(categorical_cols, 40);  // 3 + 15 + 12 dichotomized + 1 + 5 + 4
}

TEST(Simulation, CovarianceHasExactBlockStructure) {
  SimConfig config;
  config.rho = 0.9;
  config.sigma2 = 2.5;
  const Eigen::MatrixXd sigma = covariance(config);
  ASSERT_EQ(sigma.rows(), kSimColumns);

  const auto group_of = [](int col) {
    for (std::size_t g = 0; g < group_layout().size(); ++g) {
      const GroupInfo& group = group_layout()[g];
      if (col >= group.first_col && col < group.first_col + group.size) {
        return static_cast<int>(g);
      }
    }
    return -1;
  };
  for (int a = 0; a < kSimColumns; ++a) {
    for (int b = 0; b < kSimColumns; ++b) {
      const GroupInfo& ga = group_layout()[group_of(a)];
      double want = 0.0;
      if (a == b) {
        want = ga.type == GroupType::kNoise ? 2.5 : 1.0;
      } else if (group_of(a) == group_of(b) &&
                 ga.type != GroupType::kNoise) {
        want = 0.9;
      }
      ASSERT_EQ(sigma(a, b), want) << a << "," << b;
    }
  }
}

TEST(Simulation, SmallBlockEigenvaluesMatchClosedForm) {
  // (1-rho)I + rho J on 3 variables has eigenvalues 1+2rho, 1-rho, 1-rho.
  SimConfig config;
  config.rho = 0.9;
  const Eigen::MatrixXd block = covariance(config).topLeftCorner(3, 3);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(block);
  ASSERT_EQ(solver.info(), Eigen::Success);
  EXPECT_NEAR(solver.eigenvalues()(0), 0.1, 1e-12);
  EXPECT_NEAR(solver.eigenvalues()(1), 0.1, 1e-12);
  EXPECT_NEAR(solver.eigenvalues()(2), 2.8, 1e-12);
}

TEST(Simulation, FrameLayoutNamesAndKinds) {
  SimConfig config;
  config.n = 60;
  config.seed = 9;
  const SimulatedData data = generate(config);
  ASSERT_EQ(data.frame.n_cols(), static_cast<std::size_t>(kSimColumns));
  ASSERT_EQ(data.frame.n_rows(), 60u);

  EXPECT_EQ(data.frame.name(0), "NumS1");
  EXPECT_EQ(data.frame.name(3), "NumL1");
  EXPECT_EQ(data.frame.name(30), "CategS1");
  EXPECT_EQ(data.frame.name(60), "MixedS1");
  EXPECT_EQ(data.frame.name(119), "Noise30");

  int categorical = 0;
  for (int j = 0; j < kSimColumns; ++j) {
    if (data.frame.kind(j) == ColumnKind::kCategorical) {
      ++categorical;
      EXPECT_EQ(data.frame.schema().columns[j].levels,
                (std::vector<std::string>{"0", "1"}));
    }
  }
  EXPECT_EQ(categorical, 40);

  // Mixed blocks: numeric head, dichotomized tail.
  EXPECT_EQ(data.frame.kind(60), ColumnKind::kNumeric);   // MixedS1
  EXPECT_EQ(data.frame.kind(61), ColumnKind::kNumeric);   // MixedS2
  EXPECT_EQ(data.frame.kind(62), ColumnKind::kCategorical);  // MixedS3
  EXPECT_EQ(data.frame.kind(72), ColumnKind::kNumeric);   // MixedL10
  EXPECT_EQ(data.frame.kind(73), ColumnKind::kCategorical);  // MixedL11
  EXPECT_EQ(data.frame.kind(85), ColumnKind::kNumeric);   // MixedM8
  EXPECT_EQ(data.frame.kind(86), ColumnKind::kCategorical);  // MixedM9

  EXPECT_EQ(data.labels.size(), 60u);
  EXPECT_EQ(data.labels.classes(), (std::vector<std::string>{"0", "1"}));
}

TEST(Simulation, MedianSplitIsBalancedToWithinOne) {
  for (const std::size_t n : {100u, 101u}) {
    SimConfig config;
    config.n = n;
    config.seed = 17;
    const SimulatedData data = generate(config);
    for (int j = 0; j < kSimColumns; ++j) {
      if (data.frame.kind(j) != ColumnKind::kCategorical) continue;
      long ones = 0;
      for (std::size_t i = 0; i < n; ++i) ones += data.frame.cat(j, i);
      const long zeros = static_cast<long>(n) - ones;
      EXPECT_LE(std::abs(ones - zeros), 1) << "column " << j;
    }
  }
}

TEST(Simulation, ReproducibleAndSeedSensitive) {
  SimConfig config;
  config.n = 40;
  config.seed = 31;
  const SimulatedData a = generate(config);
  const SimulatedData b = generate(config);
  ASSERT_EQ(a.frame.n_rows(), b.frame.n_rows());
  for (int j = 0; j < kSimColumns; ++j) {
    for (std::size_t i = 0; i < a.frame.n_rows(); ++i) {
      if (a.frame.kind(j) == ColumnKind::kNumeric) {
        ASSERT_EQ(a.frame.num(j, i), b.frame.num(j, i));
      } else {
        ASSERT_EQ(a.frame.cat(j, i), b.frame.cat(j, i));
      }
    }
  }
  EXPECT_EQ(a.labels.ids(), b.labels.ids());

  config.seed = 32;
  const SimulatedData c = generate(config);
  EXPECT_NE(a.frame.num(0, 0), c.frame.num(0, 0));
}

TEST(Simulation, TheoreticalMedianUsesZero) {
  SimConfig config;
  config.n = 200;
  config.seed = 5;
  config.theoretical_median = true;
  const SimulatedData data = generate(config);
  // With threshold 0 the raw sign decides; counts are near but generally not
  // exactly balanced.
  for (int j : {30, 62, 119 - 29}) {
    if (data.frame.kind(j) != ColumnKind::kCategorical) continue;
    long ones = 0;
    for (std::size_t i = 0; i < 200; ++i) ones += data.frame.cat(j, i);
    EXPECT_GT(ones, 60);
    EXPECT_LT(ones, 140);
  }
}

TEST(Simulation, InformativeBetaSumsToBalancedOffset) {
  const std::vector<double> beta = informative_beta();
  double offset = 0.0;
  for (int col = 0; col < kSimColumns; ++col) {
    if (column_is_binarized(col)) offset += 0.5 * beta[col];
  }
  EXPECT_DOUBLE_EQ(offset, 9.0);

  for (const GroupInfo& group : group_layout()) {
    for (int k = 0; k < group.size; ++k) {
      const double b = beta[group.first_col + k];
      if (!group.informative) {
        EXPECT_EQ(b, 0.0);
      } else if (group.size == 3) {
        EXPECT_DOUBLE_EQ(b, k + 1.0);
      } else {
        EXPECT_DOUBLE_EQ(b, (k / 5 + 1) / 5.0);
      }
    }
  }
}

TEST(Simulation, PopulationCorrelationsAndBalance) {
  SimConfig config;
  config.n = 10000;
  config.seed = 77;
  const SimulatedData data = generate(config);

  // Within-block correlations of numeric columns sit near rho.
  const auto col = [&](int j) { return data.frame.numeric_column(j); };
  EXPECT_NEAR(pearson(col(0), col(1)), 0.9, 0.05);    // NumS1, NumS2
  EXPECT_NEAR(pearson(col(3), col(10)), 0.9, 0.05);   // NumL1, NumL8
  EXPECT_NEAR(pearson(col(18), col(29)), 0.9, 0.05);  // NumM1, NumM12
  EXPECT_NEAR(pearson(col(60), col(61)), 0.9, 0.05);  // MixedS1, MixedS2

  // Cross-block and noise correlations vanish.
  EXPECT_LT(std::abs(pearson(col(0), col(3))), 0.05);
  EXPECT_LT(std::abs(pearson(col(0), col(90))), 0.05);
  EXPECT_LT(std::abs(pearson(col(90), col(91))), 0.05);

  // The logistic intercept balances the classes.
  double ones = 0.0;
  for (std::size_t i = 0; i < config.n; ++i) ones += data.labels.id(i);
  EXPECT_NEAR(ones / static_cast<double>(config.n), 0.5, 0.05);
}

TEST(Simulation, ConfigValidation) {
  SimConfig config;
  config.rho = 1.0;
  EXPECT_THROW(generate(config), std::invalid_argument);
  config.rho = -0.08;  // below -1/14
  EXPECT_THROW(covariance(config), std::invalid_argument);
  config.rho = -0.05;  // still positive definite
  EXPECT_NO_THROW(covariance(config));
  config = SimConfig{};
  config.sigma2 = 0.0;
  EXPECT_THROW(generate(config), std::invalid_argument);
  config = SimConfig{};
  config.n = 1;
  EXPECT_THROW(generate(config), std::invalid_argument);
  EXPECT_THROW(column_is_binarized(120), std::invalid_argument);
}

}  // namespace
}  // namespace covsurf
