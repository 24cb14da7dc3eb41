#pragma once

// Data model for mixed numeric/categorical datasets: schema, immutable frame,
// class labels, CSV + JSON-sidecar ingestion, and the two elementary link
// measures (squared correlation, correlation ratio).
//
// Conventions used throughout the library:
//   - categorical cells are stored as 0-based indices into the column's level
//     list; level order is fixed at ingestion (first appearance);
//   - all variances use the population form (denominator n), matching the
//     uniform row weights 1/n of the PCA preprocessing;
//   - frames are immutable after construction and safe to share across
//     threads.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

namespace covsurf {

enum class ColumnKind { kNumeric, kCategorical };

struct SchemaColumn {
  std::string name;
  ColumnKind kind = ColumnKind::kNumeric;
  std::vector<std::string> levels;  // categorical columns only, ingestion order
};

struct Schema {
  std::vector<SchemaColumn> columns;

  std::size_t size() const { return columns.size(); }

  int find(const std::string& name) const {
    for (std::size_t j = 0; j < columns.size(); ++j) {
      if (columns[j].name == name) return static_cast<int>(j);
    }
    return -1;
  }

  void validate() const {
    std::map<std::string, int> seen;
    for (const auto& col : columns) {
      if (col.name.empty()) {
        throw std::invalid_argument("schema column with empty name");
      }
      if (++seen[col.name] > 1) {
        throw std::invalid_argument("duplicate column name: " + col.name);
      }
      if (col.kind == ColumnKind::kCategorical && col.levels.size() < 2) {
        throw std::invalid_argument("constant variable: categorical column '" +
                                    col.name + "' has fewer than 2 levels");
      }
      if (col.kind == ColumnKind::kNumeric && !col.levels.empty()) {
        throw std::invalid_argument("numeric column '" + col.name +
                                    "' must not declare levels");
      }
    }
  }
};

using NumericColumn = std::vector<double>;
using CategoricalColumn = std::vector<int>;
using ColumnValues = std::variant<NumericColumn, CategoricalColumn>;

class MixedDataFrame {
 public:
  MixedDataFrame(Schema schema, std::vector<ColumnValues> columns)
      : schema_(std::move(schema)), columns_(std::move(columns)) {
    schema_.validate();
    if (schema_.size() != columns_.size()) {
      throw std::invalid_argument("schema/column count mismatch");
    }
    if (columns_.empty()) throw std::invalid_argument("frame has no columns");
    n_rows_ = std::visit([](const auto& c) { return c.size(); }, columns_[0]);
    if (n_rows_ == 0) throw std::invalid_argument("frame has no rows");
    for (std::size_t j = 0; j < columns_.size(); ++j) {
      const auto& spec = schema_.columns[j];
      const std::size_t rows =
          std::visit([](const auto& c) { return c.size(); }, columns_[j]);
      if (rows != n_rows_) {
        throw std::invalid_argument("column '" + spec.name +
                                    "' has inconsistent row count");
      }
      const bool is_cat = std::holds_alternative<CategoricalColumn>(columns_[j]);
      if (is_cat != (spec.kind == ColumnKind::kCategorical)) {
        throw std::invalid_argument("column '" + spec.name +
                                    "' storage does not match its schema kind");
      }
      if (is_cat) {
        const auto& cells = std::get<CategoricalColumn>(columns_[j]);
        const int n_levels = static_cast<int>(spec.levels.size());
        for (int v : cells) {
          if (v < 0 || v >= n_levels) {
            throw std::invalid_argument("level index out of range in column '" +
                                        spec.name + "'");
          }
        }
      } else {
        for (double v : std::get<NumericColumn>(columns_[j])) {
          if (!std::isfinite(v)) {
            throw std::invalid_argument("non-finite value in column '" +
                                        spec.name + "'");
          }
        }
      }
    }
  }

  const Schema& schema() const { return schema_; }
  std::size_t n_rows() const { return n_rows_; }
  std::size_t n_cols() const { return columns_.size(); }

  ColumnKind kind(std::size_t col) const { return schema_.columns[col].kind; }
  const std::string& name(std::size_t col) const {
    return schema_.columns[col].name;
  }
  std::size_t level_count(std::size_t col) const {
    return schema_.columns[col].levels.size();
  }

  double num(std::size_t col, std::size_t row) const {
    return std::get<NumericColumn>(columns_[col])[row];
  }
  int cat(std::size_t col, std::size_t row) const {
    return std::get<CategoricalColumn>(columns_[col])[row];
  }
  const NumericColumn& numeric_column(std::size_t col) const {
    return std::get<NumericColumn>(columns_[col]);
  }
  const CategoricalColumn& categorical_column(std::size_t col) const {
    return std::get<CategoricalColumn>(columns_[col]);
  }

 private:
  Schema schema_;
  std::size_t n_rows_ = 0;
  std::vector<ColumnValues> columns_;
};

// A frame offered to a trained model must carry the training schema: same
// columns in the same order, same kinds, identical level lists.
inline void check_schema_compatible(const Schema& trained,
                                    const Schema& given) {
  if (trained.size() != given.size()) {
    throw std::invalid_argument(
        "schema mismatch: expected " + std::to_string(trained.size()) +
        " columns, got " + std::to_string(given.size()));
  }
  for (std::size_t j = 0; j < trained.size(); ++j) {
    const auto& a = trained.columns[j];
    const auto& b = given.columns[j];
    if (a.name != b.name) {
      throw std::invalid_argument("schema mismatch: column " +
                                  std::to_string(j + 1) + " is '" + b.name +
                                  "', expected '" + a.name + "'");
    }
    if (a.kind != b.kind) {
      throw std::invalid_argument("schema mismatch: column '" + a.name +
                                  "' has the wrong kind");
    }
    if (a.kind == ColumnKind::kCategorical && a.levels != b.levels) {
      throw std::invalid_argument("schema mismatch: column '" + a.name +
                                  "' has a different level list");
    }
  }
}

inline MixedDataFrame select_columns(const MixedDataFrame& df,
                                     const std::vector<int>& cols) {
  Schema schema;
  std::vector<ColumnValues> columns;
  schema.columns.reserve(cols.size());
  columns.reserve(cols.size());
  for (int j : cols) {
    if (j < 0 || static_cast<std::size_t>(j) >= df.n_cols()) {
      throw std::invalid_argument("column index out of range");
    }
    schema.columns.push_back(df.schema().columns[j]);
    if (df.kind(j) == ColumnKind::kNumeric) {
      columns.emplace_back(df.numeric_column(j));
    } else {
      columns.emplace_back(df.categorical_column(j));
    }
  }
  return MixedDataFrame(std::move(schema), std::move(columns));
}

inline MixedDataFrame select_rows(const MixedDataFrame& df,
                                  const std::vector<int>& rows) {
  for (int i : rows) {
    if (i < 0 || static_cast<std::size_t>(i) >= df.n_rows()) {
      throw std::invalid_argument("row index out of range");
    }
  }
  std::vector<ColumnValues> columns;
  columns.reserve(df.n_cols());
  for (std::size_t j = 0; j < df.n_cols(); ++j) {
    if (df.kind(j) == ColumnKind::kNumeric) {
      NumericColumn cells;
      cells.reserve(rows.size());
      for (int i : rows) cells.push_back(df.num(j, i));
      columns.emplace_back(std::move(cells));
    } else {
      CategoricalColumn cells;
      cells.reserve(rows.size());
      for (int i : rows) cells.push_back(df.cat(j, i));
      columns.emplace_back(std::move(cells));
    }
  }
  return MixedDataFrame(df.schema(), std::move(columns));
}

// Class labels stored as 0-based ids into a lexicographically sorted class
// list; the sort makes label encoding independent of row order.
class LabelVector {
 public:
  LabelVector(std::vector<int> ids, std::vector<std::string> classes)
      : ids_(std::move(ids)), classes_(std::move(classes)) {
    if (ids_.empty()) throw std::invalid_argument("empty label vector");
    if (classes_.empty()) throw std::invalid_argument("empty class list");
    for (int v : ids_) {
      if (v < 0 || v >= static_cast<int>(classes_.size())) {
        throw std::invalid_argument("label id out of range");
      }
    }
  }

  static LabelVector from_strings(const std::vector<std::string>& raw) {
    if (raw.empty()) throw std::invalid_argument("empty label vector");
    std::vector<std::string> classes(raw);
    std::sort(classes.begin(), classes.end());
    classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
    std::vector<int> ids;
    ids.reserve(raw.size());
    for (const auto& s : raw) {
      const auto it = std::lower_bound(classes.begin(), classes.end(), s);
      ids.push_back(static_cast<int>(it - classes.begin()));
    }
    return LabelVector(std::move(ids), std::move(classes));
  }

  std::size_t size() const { return ids_.size(); }
  int id(std::size_t i) const { return ids_[i]; }
  const std::vector<int>& ids() const { return ids_; }
  const std::vector<std::string>& classes() const { return classes_; }
  std::size_t n_classes() const { return classes_.size(); }
  const std::string& class_name(int id) const { return classes_[id]; }

  // Number of distinct classes actually present (supervised operations
  // require at least 2).
  std::size_t distinct_present() const {
    std::vector<bool> seen(classes_.size(), false);
    std::size_t count = 0;
    for (int v : ids_) {
      if (!seen[v]) {
        seen[v] = true;
        ++count;
      }
    }
    return count;
  }

 private:
  std::vector<int> ids_;
  std::vector<std::string> classes_;
};

inline LabelVector select_rows(const LabelVector& y,
                               const std::vector<int>& rows) {
  std::vector<int> ids;
  ids.reserve(rows.size());
  for (int i : rows) {
    if (i < 0 || static_cast<std::size_t>(i) >= y.size()) {
      throw std::invalid_argument("row index out of range");
    }
    ids.push_back(y.id(i));
  }
  return LabelVector(std::move(ids), y.classes());
}

// ---------------------------------------------------------------------------
// Link measures
// ---------------------------------------------------------------------------

// Squared Pearson correlation, population form. Symmetric and invariant under
// affine rescaling of either argument.
inline double squared_correlation(const std::vector<double>& u,
                                  const std::vector<double>& x) {
  if (u.size() != x.size() || u.empty()) {
    throw std::invalid_argument("length mismatch");
  }
  const double n = static_cast<double>(u.size());
  double mu = 0.0, mx = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    mu += u[i];
    mx += x[i];
  }
  mu /= n;
  mx /= n;
  double cov = 0.0, vu = 0.0, vx = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double du = u[i] - mu;
    const double dx = x[i] - mx;
    cov += du * dx;
    vu += du * du;
    vx += dx * dx;
  }
  if (vu == 0.0 || vx == 0.0) throw std::invalid_argument("constant variable");
  return std::min(1.0, (cov * cov) / (vu * vx));
}

// Correlation ratio eta^2: between-group sum of squares over total sum of
// squares of u across the levels of g.
inline double correlation_ratio(const std::vector<double>& u,
                                const std::vector<int>& g,
                                std::size_t n_levels) {
  if (u.size() != g.size() || u.empty()) {
    throw std::invalid_argument("length mismatch");
  }
  if (n_levels < 2) {
    throw std::invalid_argument(
        "degenerate grouping: fewer than 2 levels declared");
  }
  std::vector<double> level_sum(n_levels, 0.0);
  std::vector<std::size_t> level_count(n_levels, 0);
  double mean = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (g[i] < 0 || static_cast<std::size_t>(g[i]) >= n_levels) {
      throw std::invalid_argument("level index out of range");
    }
    level_sum[g[i]] += u[i];
    ++level_count[g[i]];
    mean += u[i];
  }
  mean /= static_cast<double>(u.size());
  double total = 0.0;
  for (double v : u) total += (v - mean) * (v - mean);
  if (total == 0.0) throw std::invalid_argument("constant variable");
  double between = 0.0;
  for (std::size_t s = 0; s < n_levels; ++s) {
    if (level_count[s] == 0) throw std::invalid_argument("empty level");
    const double d = level_sum[s] / static_cast<double>(level_count[s]) - mean;
    between += static_cast<double>(level_count[s]) * d * d;
  }
  return std::min(1.0, between / total);
}

// ---------------------------------------------------------------------------
// CSV + sidecar schema I/O
// ---------------------------------------------------------------------------

// Shortest decimal representation that round-trips the double exactly.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline std::optional<double> parse_double(const std::string& cell) {
  if (cell.empty()) return std::nullopt;
  double value = 0.0;
  const char* begin = cell.data();
  const char* end = begin + cell.size();
  const auto res = std::from_chars(begin, end, value);
  if (res.ec != std::errc() || res.ptr != end || !std::isfinite(value)) {
    return std::nullopt;
  }
  return value;
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

// Plain comma-separated values: first row is the header, no quoting or
// escaping (cell values must not contain commas or newlines).
inline CsvTable read_csv_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  const auto split = [](const std::string& line) {
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = line.find(',', start);
      if (comma == std::string::npos) {
        cells.push_back(line.substr(start));
        break;
      }
      cells.push_back(line.substr(start, comma - start));
      start = comma + 1;
    }
    return cells;
  };
  CsvTable table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() && in.peek() == std::ifstream::traits_type::eof()) break;
    auto cells = split(line);
    if (line_no == 1) {
      table.header = std::move(cells);
    } else {
      if (cells.size() != table.header.size()) {
        throw std::runtime_error("ragged row at line " +
                                 std::to_string(line_no) + " in " + path);
      }
      table.rows.push_back(std::move(cells));
    }
  }
  if (table.header.empty() || table.rows.empty()) {
    throw std::runtime_error("empty file: " + path);
  }
  return table;
}

// Builds a typed frame from raw cells. Without a schema, a column is Numeric
// iff every cell parses as a finite real number, else Categorical with levels
// in order of first appearance. A supplied schema overrides inference: its
// column names must match the header, and declared level lists are closed
// (values outside them raise "unknown level"). Schema columns declared
// Categorical with an empty level list get inferred levels.
inline MixedDataFrame frame_from_table(const CsvTable& table,
                                       const std::optional<Schema>& schema) {
  const std::size_t p = table.header.size();
  const std::size_t n = table.rows.size();
  Schema resolved;
  if (schema) {
    if (schema->size() != p) {
      throw std::invalid_argument(
          "schema mismatch: expected " + std::to_string(schema->size()) +
          " columns, file has " + std::to_string(p));
    }
    for (std::size_t j = 0; j < p; ++j) {
      if (schema->columns[j].name != table.header[j]) {
        throw std::invalid_argument("schema mismatch: column " +
                                    std::to_string(j + 1) + " is '" +
                                    table.header[j] + "', expected '" +
                                    schema->columns[j].name + "'");
      }
    }
    resolved = *schema;
  } else {
    resolved.columns.resize(p);
    for (std::size_t j = 0; j < p; ++j) {
      resolved.columns[j].name = table.header[j];
      resolved.columns[j].kind = ColumnKind::kNumeric;
      for (const auto& row : table.rows) {
        if (row[j].empty()) {
          throw std::invalid_argument("missing value in column '" +
                                      table.header[j] + "'");
        }
        if (!parse_double(row[j])) {
          resolved.columns[j].kind = ColumnKind::kCategorical;
          break;
        }
      }
    }
  }

  std::vector<ColumnValues> columns;
  columns.reserve(p);
  for (std::size_t j = 0; j < p; ++j) {
    auto& spec = resolved.columns[j];
    if (spec.kind == ColumnKind::kNumeric) {
      NumericColumn cells;
      cells.reserve(n);
      for (const auto& row : table.rows) {
        const auto value = parse_double(row[j]);
        if (!value) {
          throw std::invalid_argument("cannot parse '" + row[j] +
                                      "' as a number in column '" + spec.name +
                                      "'");
        }
        cells.push_back(*value);
      }
      columns.emplace_back(std::move(cells));
    } else {
      const bool closed = !spec.levels.empty();
      std::map<std::string, int> index;
      for (std::size_t s = 0; s < spec.levels.size(); ++s) {
        index[spec.levels[s]] = static_cast<int>(s);
      }
      CategoricalColumn cells;
      cells.reserve(n);
      for (const auto& row : table.rows) {
        if (row[j].empty()) {
          throw std::invalid_argument("missing value in column '" + spec.name +
                                      "'");
        }
        auto it = index.find(row[j]);
        if (it == index.end()) {
          if (closed) {
            throw std::invalid_argument("unknown level '" + row[j] +
                                        "' in column '" + spec.name + "'");
          }
          it = index.emplace(row[j], static_cast<int>(spec.levels.size()))
                   .first;
          spec.levels.push_back(row[j]);
        }
        cells.push_back(it->second);
      }
      columns.emplace_back(std::move(cells));
    }
  }
  return MixedDataFrame(std::move(resolved), std::move(columns));
}

inline MixedDataFrame load_csv(const std::string& path,
                               const std::optional<Schema>& schema = {}) {
  return frame_from_table(read_csv_table(path), schema);
}

inline void write_csv(const MixedDataFrame& df, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  for (std::size_t j = 0; j < df.n_cols(); ++j) {
    out << (j ? "," : "") << df.name(j);
  }
  out << '\n';
  for (std::size_t i = 0; i < df.n_rows(); ++i) {
    for (std::size_t j = 0; j < df.n_cols(); ++j) {
      if (j) out << ',';
      if (df.kind(j) == ColumnKind::kNumeric) {
        out << format_double(df.num(j, i));
      } else {
        out << df.schema().columns[j].levels[df.cat(j, i)];
      }
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

inline nlohmann::json schema_to_json(const Schema& schema) {
  nlohmann::json cols = nlohmann::json::array();
  for (const auto& col : schema.columns) {
    nlohmann::json entry;
    entry["name"] = col.name;
    entry["kind"] =
        col.kind == ColumnKind::kNumeric ? "numeric" : "categorical";
    if (col.kind == ColumnKind::kCategorical) entry["levels"] = col.levels;
    cols.push_back(std::move(entry));
  }
  return nlohmann::json{{"columns", std::move(cols)}};
}

inline Schema schema_from_json(const nlohmann::json& doc) {
  Schema schema;
  if (!doc.is_object() || !doc.contains("columns") ||
      !doc["columns"].is_array()) {
    throw std::invalid_argument("schema document must have a 'columns' array");
  }
  for (const auto& entry : doc["columns"]) {
    SchemaColumn col;
    col.name = entry.at("name").get<std::string>();
    const auto kind = entry.at("kind").get<std::string>();
    if (kind == "numeric") {
      col.kind = ColumnKind::kNumeric;
    } else if (kind == "categorical") {
      col.kind = ColumnKind::kCategorical;
      if (entry.contains("levels")) {
        col.levels = entry["levels"].get<std::vector<std::string>>();
      }
    } else {
      throw std::invalid_argument("unknown column kind: " + kind);
    }
    schema.columns.push_back(std::move(col));
  }
  return schema;
}

inline Schema load_schema(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("cannot parse schema file " + path + ": " +
                             e.what());
  }
  return schema_from_json(doc);
}

inline void write_schema(const Schema& schema, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  out << schema_to_json(schema).dump(2) << '\n';
  if (!out) throw std::runtime_error("write failed: " + path);
}

// Labels file: single-column CSV with header "label".
inline LabelVector load_labels(const std::string& path) {
  const CsvTable table = read_csv_table(path);
  if (table.header.size() != 1) {
    throw std::invalid_argument("label file must have exactly one column");
  }
  std::vector<std::string> raw;
  raw.reserve(table.rows.size());
  for (const auto& row : table.rows) {
    if (row[0].empty()) throw std::invalid_argument("missing label value");
    raw.push_back(row[0]);
  }
  return LabelVector::from_strings(raw);
}

inline void write_labels(const LabelVector& y, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  out << "label\n";
  for (std::size_t i = 0; i < y.size(); ++i) {
    out << y.class_name(y.id(i)) << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace covsurf
