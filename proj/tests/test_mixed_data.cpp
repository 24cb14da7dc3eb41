#include "covsurf/mixed_data.hpp"

#include <fstream>
#include <stdexcept>

#include <gtest/gtest.h>

#include "covsurf/rng.hpp"
#include "test_support.hpp"

namespace covsurf {
namespace {

using testing::categorical_col;
using testing::make_frame;
using testing::numeric_col;
using testing::TempDir;

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

TEST(LoadCsv, InfersAllNumericColumns) {
  TempDir dir;
  write_text(dir.file("d.csv"), "a,b\n1,2\n3,4\n5,6\n");
  const auto df = load_csv(dir.file("d.csv"));
  ASSERT_EQ(df.n_rows(), 3u);
  ASSERT_EQ(df.n_cols(), 2u);
  EXPECT_EQ(df.kind(0), ColumnKind::kNumeric);
  EXPECT_EQ(df.kind(1), ColumnKind::kNumeric);
  EXPECT_DOUBLE_EQ(df.num(0, 2), 5.0);
}

TEST(LoadCsv, InfersCategoricalWithFirstAppearanceLevels) {
  TempDir dir;
  write_text(dir.file("d.csv"), "c\nb\na\nb\n");
  const auto df = load_csv(dir.file("d.csv"));
  EXPECT_EQ(df.kind(0), ColumnKind::kCategorical);
  const auto& levels = df.schema().columns[0].levels;
  ASSERT_EQ(levels.size(), 2u);
  EXPECT_EQ(levels[0], "b");
  EXPECT_EQ(levels[1], "a");
  EXPECT_EQ(df.cat(0, 0), 0);
  EXPECT_EQ(df.cat(0, 1), 1);
  EXPECT_EQ(df.cat(0, 2), 0);
}

TEST(LoadCsv, SidecarOverridesInferenceToCategorical) {
  TempDir dir;
  write_text(dir.file("d.csv"), "x\n1\n2\n1\n");
  Schema schema;
  schema.columns.push_back(categorical_col("x", {}));
  // Empty level list in the sidecar: levels inferred by first appearance.
  schema.columns[0].levels.clear();
  const auto df = frame_from_table(read_csv_table(dir.file("d.csv")),
                                   std::optional<Schema>(schema));
  EXPECT_EQ(df.kind(0), ColumnKind::kCategorical);
  ASSERT_EQ(df.level_count(0), 2u);
  EXPECT_EQ(df.schema().columns[0].levels[0], "1");
  EXPECT_EQ(df.schema().columns[0].levels[1], "2");
  EXPECT_EQ(df.cat(0, 2), 0);
}

TEST(LoadCsv, ClosedLevelListRejectsUnknownLevel) {
  TempDir dir;
  write_text(dir.file("d.csv"), "x\na\nc\n");
  Schema schema;
  schema.columns.push_back(categorical_col("x", {"a", "b"}));
  try {
    load_csv(dir.file("d.csv"), schema);
    FAIL() << "expected unknown level error";
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("unknown level"), std::string::npos);
  }
}

TEST(LoadCsv, RaggedRowRejected) {
  TempDir dir;
  write_text(dir.file("d.csv"), "a,b\n1,2\n3\n");
  EXPECT_THROW(load_csv(dir.file("d.csv")), std::runtime_error);
}

TEST(LoadCsv, EmptyFileRejected) {
  TempDir dir;
  write_text(dir.file("d.csv"), "");
  try {
    load_csv(dir.file("d.csv"));
    FAIL() << "expected empty file error";
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("empty file"), std::string::npos);
  }
}

TEST(LoadCsv, HeaderOnlyFileRejected) {
  TempDir dir;
  write_text(dir.file("d.csv"), "a,b\n");
  EXPECT_THROW(load_csv(dir.file("d.csv")), std::runtime_error);
}

TEST(LoadCsv, MissingValueRejected) {
  TempDir dir;
  write_text(dir.file("d.csv"), "a,b\n1,\n2,3\n");
  try {
    load_csv(dir.file("d.csv"));
    FAIL() << "expected missing value error";
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("missing value"), std::string::npos);
  }
}

TEST(LoadCsv, SchemaNameMismatchDiagnosed) {
  TempDir dir;
  write_text(dir.file("d.csv"), "a,b\n1,2\n3,4\n");
  Schema schema;
  schema.columns.push_back(numeric_col("a"));
  schema.columns.push_back(numeric_col("z"));
  try {
    load_csv(dir.file("d.csv"), schema);
    FAIL() << "expected schema mismatch";
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("schema mismatch"), std::string::npos);
    EXPECT_NE(msg.find("'z'"), std::string::npos);
  }
}

TEST(RoundTrip, WriteThenLoadIsIdentity) {
  Rng rng(7);
  TempDir dir;
  for (int rep = 0; rep < 10; ++rep) {
    const std::size_t n = 2 + rng.below(20);
    NumericColumn xs, ys;
    CategoricalColumn cs;
    for (std::size_t i = 0; i < n; ++i) {
      xs.push_back(rng.normal_pair().first * 1e3);
      ys.push_back(rng.uniform01());
      cs.push_back(static_cast<int>(rng.below(3)));
    }
    // Force every level to appear so the frame is constructible.
    cs[0] = 0;
    cs[n - 1] = 2;
    if (n > 2) cs[1] = 1;
    const auto df = make_frame({{numeric_col("x"), xs},
                                {categorical_col("c", {"u", "v", "w"}), cs},
                                {numeric_col("y"), ys}});
    write_csv(df, dir.file("d.csv"));
    write_schema(df.schema(), dir.file("d.schema.json"));
    const auto back =
        load_csv(dir.file("d.csv"), load_schema(dir.file("d.schema.json")));
    ASSERT_EQ(back.n_rows(), df.n_rows());
    ASSERT_EQ(back.n_cols(), df.n_cols());
    for (std::size_t i = 0; i < n; ++i) {
      EXPECT_EQ(back.num(0, i), df.num(0, i));
      EXPECT_EQ(back.cat(1, i), df.cat(1, i));
      EXPECT_EQ(back.num(2, i), df.num(2, i));
    }
    EXPECT_EQ(back.schema().columns[1].levels, df.schema().columns[1].levels);
  }
}

TEST(FormatDouble, RoundTripsExactly) {
  Rng rng(11);
  for (int i = 0; i < 1000; ++i) {
    const auto [a, b] = rng.normal_pair();
    for (double v : {a * 1e-8, b * 1e12, a, 1.0 / 3.0 * b}) {
      const auto parsed = parse_double(format_double(v));
      ASSERT_TRUE(parsed.has_value());
      EXPECT_EQ(*parsed, v);
    }
  }
}

TEST(SquaredCorrelation, PerfectAndAffine) {
  const std::vector<double> x{1.0, 2.0, 3.0, 4.0};
  std::vector<double> u = x;
  EXPECT_NEAR(squared_correlation(u, x), 1.0, 1e-12);
  for (std::size_t i = 0; i < u.size(); ++i) u[i] = -2.0 * x[i] + 7.0;
  EXPECT_NEAR(squared_correlation(u, x), 1.0, 1e-12);
}

TEST(SquaredCorrelation, MatchesTwoPassOracle) {
  const std::vector<double> u{1.0, 2.0, 3.0, 4.0};
  const std::vector<double> x{1.0, 2.0, 2.0, 4.0};
  // Independent oracle: moment form r^2 = (E[ux]-EuEx)^2 / (Var u Var x).
  const double n = 4.0;
  double su = 0, sx = 0, sux = 0, suu = 0, sxx = 0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    su += u[i];
    sx += x[i];
    sux += u[i] * x[i];
    suu += u[i] * u[i];
    sxx += x[i] * x[i];
  }
  const double cov = sux / n - (su / n) * (sx / n);
  const double vu = suu / n - (su / n) * (su / n);
  const double vx = sxx / n - (sx / n) * (sx / n);
  const double oracle = cov * cov / (vu * vx);
  EXPECT_NEAR(squared_correlation(u, x), oracle, 1e-12);
  EXPECT_NEAR(squared_correlation(u, x), 0.8526315789473684, 1e-12);
  EXPECT_DOUBLE_EQ(squared_correlation(u, x), squared_correlation(x, u));
}

TEST(SquaredCorrelation, ConstantInputRejected) {
  const std::vector<double> u{1.0, 1.0, 1.0};
  const std::vector<double> x{1.0, 2.0, 3.0};
  try {
    squared_correlation(u, x);
    FAIL() << "expected constant variable error";
  } catch (const std::invalid_argument& e) {
    EXPECT_STREQ(e.what(), "constant variable");
  }
}

TEST(CorrelationRatio, PureBetweenGroupVariation) {
  const std::vector<double> u{3.0, 3.0, 5.0, 5.0, 9.0};
  const std::vector<int> g{0, 0, 1, 1, 2};
  EXPECT_NEAR(correlation_ratio(u, g, 3), 1.0, 1e-12);
}

TEST(CorrelationRatio, MatchesAnovaOracle) {
  const std::vector<double> u{1.0, 2.0, 3.0, 4.0};
  const std::vector<int> g{0, 0, 1, 1};
  EXPECT_NEAR(correlation_ratio(u, g, 2), 0.8, 1e-12);

  // Random-input property: eta^2 == 1 - withinSS/totalSS.
  Rng rng(23);
  for (int rep = 0; rep < 30; ++rep) {
    const std::size_t n = 6 + rng.below(40);
    const std::size_t levels = 2 + rng.below(4);
    std::vector<double> v(n);
    std::vector<int> h(n);
    for (std::size_t i = 0; i < n; ++i) {
      v[i] = rng.normal_pair().first;
      h[i] = static_cast<int>(rng.below(levels));
    }
    for (std::size_t s = 0; s < levels; ++s) h[s] = static_cast<int>(s);
    double mean = 0;
    for (double value : v) mean += value;
    mean /= static_cast<double>(n);
    std::vector<double> sum(levels, 0.0);
    std::vector<int> count(levels, 0);
    for (std::size_t i = 0; i < n; ++i) {
      sum[h[i]] += v[i];
      ++count[h[i]];
    }
    double within = 0, total = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double gm = sum[h[i]] / count[h[i]];
      within += (v[i] - gm) * (v[i] - gm);
      total += (v[i] - mean) * (v[i] - mean);
    }
    EXPECT_NEAR(correlation_ratio(v, h, levels), 1.0 - within / total, 1e-10);
  }
}

TEST(CorrelationRatio, SingleLevelGroupingRejected) {
  const std::vector<double> u{1.0, 2.0, 3.0};
  const std::vector<int> g{0, 0, 0};
  EXPECT_THROW(correlation_ratio(u, g, 1), std::invalid_argument);
}

TEST(CorrelationRatio, EmptyLevelRejected) {
  const std::vector<double> u{1.0, 2.0, 3.0};
  const std::vector<int> g{0, 0, 0};
  try {
    correlation_ratio(u, g, 2);
    FAIL() << "expected empty level error";
  } catch (const std::invalid_argument& e) {
    EXPECT_STREQ(e.what(), "empty level");
  }
}

TEST(CorrelationRatio, ConstantResponseRejected) {
  const std::vector<double> u{2.0, 2.0, 2.0, 2.0};
  const std::vector<int> g{0, 0, 1, 1};
  try {
    correlation_ratio(u, g, 2);
    FAIL() << "expected constant variable error";
  } catch (const std::invalid_argument& e) {
    EXPECT_STREQ(e.what(), "constant variable");
  }
}

TEST(MixedDataFrame, ValidatesConstruction) {
  // Kind/storage mismatch.
  Schema schema;
  schema.columns.push_back(numeric_col("x"));
  EXPECT_THROW(MixedDataFrame(schema, {CategoricalColumn{0, 1}}),
               std::invalid_argument);
  // Level index out of range.
  Schema cat_schema;
  cat_schema.columns.push_back(categorical_col("c", {"a", "b"}));
  EXPECT_THROW(MixedDataFrame(cat_schema, {CategoricalColumn{0, 2}}),
               std::invalid_argument);
  // Duplicate names.
  Schema dup;
  dup.columns.push_back(numeric_col("x"));
  dup.columns.push_back(numeric_col("x"));
  EXPECT_THROW(
      MixedDataFrame(dup, {NumericColumn{1.0}, NumericColumn{2.0}}),
      std::invalid_argument);
  // Single-level categorical.
  Schema single;
  single.columns.push_back(categorical_col("c", {"only"}));
  EXPECT_THROW(MixedDataFrame(single, {CategoricalColumn{0, 0}}),
               std::invalid_argument);
}

TEST(MixedDataFrame, SelectColumnsAndRows) {
  const auto df = make_frame(
      {{numeric_col("x"), NumericColumn{1.0, 2.0, 3.0, 4.0}},
       {categorical_col("c", {"a", "b"}), CategoricalColumn{0, 1, 0, 1}},
       {numeric_col("y"), NumericColumn{9.0, 8.0, 7.0, 6.0}}});
  const auto sub = select_columns(df, {2, 1});
  ASSERT_EQ(sub.n_cols(), 2u);
  EXPECT_EQ(sub.name(0), "y");
  EXPECT_EQ(sub.name(1), "c");
  EXPECT_DOUBLE_EQ(sub.num(0, 3), 6.0);
  EXPECT_EQ(sub.cat(1, 1), 1);

  const auto rows = select_rows(df, {3, 0, 3});
  ASSERT_EQ(rows.n_rows(), 3u);
  EXPECT_DOUBLE_EQ(rows.num(0, 0), 4.0);
  EXPECT_DOUBLE_EQ(rows.num(0, 1), 1.0);
  EXPECT_EQ(rows.cat(1, 2), 1);
}

TEST(LabelVector, SortsClassesLexicographically) {
  const auto y =
      LabelVector::from_strings({"yes", "no", "yes", "maybe", "no"});
  ASSERT_EQ(y.n_classes(), 3u);
  EXPECT_EQ(y.classes()[0], "maybe");
  EXPECT_EQ(y.classes()[1], "no");
  EXPECT_EQ(y.classes()[2], "yes");
  EXPECT_EQ(y.id(0), 2);
  EXPECT_EQ(y.id(3), 0);
  EXPECT_EQ(y.distinct_present(), 3u);
}

TEST(LabelVector, FileRoundTrip) {
  TempDir dir;
  const auto y = LabelVector::from_strings({"1", "0", "0", "1", "1"});
  write_labels(y, dir.file("labels.csv"));
  const auto back = load_labels(dir.file("labels.csv"));
  ASSERT_EQ(back.size(), y.size());
  for (std::size_t i = 0; i < y.size(); ++i) EXPECT_EQ(back.id(i), y.id(i));
  EXPECT_EQ(back.classes(), y.classes());
}

TEST(LabelVector, SelectRowsKeepsClassList) {
  const auto y = LabelVector::from_strings({"a", "b", "a", "b"});
  const auto sub = select_rows(y, {0, 2});
  EXPECT_EQ(sub.n_classes(), 2u);
  EXPECT_EQ(sub.distinct_present(), 1u);
}

}  // namespace
}  // namespace covsurf
