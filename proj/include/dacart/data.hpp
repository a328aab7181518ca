#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <istream>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "dacart/error.hpp"

namespace dacart {

enum class ColumnKind { continuous, binary };

inline const char* to_string(ColumnKind kind) {
  return kind == ColumnKind::binary ? "binary" : "continuous";
}

inline ColumnKind column_kind_from_string(std::string_view s) {
  if (s == "binary") return ColumnKind::binary;
  if (s == "continuous") return ColumnKind::continuous;
  throw ValidationError("unknown column kind '" + std::string(s) + "'");
}

struct ColumnSchema {
  std::string name;
  ColumnKind kind = ColumnKind::continuous;

  friend bool operator==(const ColumnSchema&, const ColumnSchema&) = default;
};

// Column-major table. Feature columns live in `columns`; the response and the
// per-row weights are optional side vectors. Treated as immutable once built;
// every operation that needs a different table returns a new one.
struct Dataset {
  std::vector<ColumnSchema> schema;
  std::vector<std::vector<double>> columns;
  std::optional<std::vector<double>> response;
  std::optional<std::vector<double>> row_weights;
  std::string response_name = "y";
  ColumnKind response_kind = ColumnKind::continuous;
  std::string weight_name = "weight";

  std::size_t rows() const {
    if (!columns.empty()) return columns.front().size();
    if (response) return response->size();
    return 0;
  }
  std::size_t features() const { return columns.size(); }
  bool has_response() const { return response.has_value(); }

  std::span<const double> column(std::size_t j) const { return columns.at(j); }
  std::span<const double> y() const {
    if (!response) throw ValidationError("dataset has no response column");
    return *response;
  }

  std::optional<std::size_t> find(std::string_view name) const {
    for (std::size_t j = 0; j < schema.size(); ++j)
      if (schema[j].name == name) return j;
    return std::nullopt;
  }

  std::size_t index_of(std::string_view name) const {
    if (auto j = find(name)) return *j;
    throw ValidationError("unknown column '" + std::string(name) + "'");
  }

  std::vector<double> weights_or_ones() const {
    if (row_weights) return *row_weights;
    return std::vector<double>(rows(), 1.0);
  }

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

struct ValidationReport {
  std::vector<std::string> violations;

  bool ok() const { return violations.empty(); }

  std::string to_string() const {
    std::string out;
    for (const auto& v : violations) {
      if (!out.empty()) out += "; ";
      out += v;
    }
    return out;
  }
};

namespace detail {

inline bool is_binary_value(double v) { return v == 0.0 || v == 1.0; }

inline void check_vector(ValidationReport& report, const std::string& label,
                         std::span<const double> values, bool binary) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      report.violations.push_back(label + ": non-finite value at row " +
                                  std::to_string(i));
    } else if (binary && !is_binary_value(values[i])) {
      report.violations.push_back(label + ": non-binary value at row " +
                                  std::to_string(i));
    }
  }
}

}  // namespace detail

// Checks every Dataset invariant and lists each violation. Rows and columns
// are reported with 0-based indices.
inline ValidationReport validate(const Dataset& d, bool allow_empty = false) {
  ValidationReport report;
  auto& v = report.violations;
  if (d.schema.size() != d.columns.size()) {
    v.push_back("schema has " + std::to_string(d.schema.size()) +
                " entries but dataset has " + std::to_string(d.columns.size()) +
                " columns");
    return report;
  }
  std::unordered_set<std::string> names;
  for (const auto& c : d.schema) {
    if (!names.insert(c.name).second)
      v.push_back("duplicate column name '" + c.name + "'");
  }
  if (d.response && names.count(d.response_name))
    v.push_back("response name '" + d.response_name + "' clashes with a feature");

  const std::size_t n = d.rows();
  if (n == 0 && !allow_empty) v.push_back("dataset has no rows");
  for (std::size_t j = 0; j < d.columns.size(); ++j) {
    const std::string label =
        "column " + std::to_string(j) + " ('" + d.schema[j].name + "')";
    if (d.columns[j].size() != n) {
      v.push_back(label + ": length " + std::to_string(d.columns[j].size()) +
                  " differs from " + std::to_string(n));
      continue;
    }
    detail::check_vector(report, label, d.columns[j],
                         d.schema[j].kind == ColumnKind::binary);
  }
  if (d.response) {
    if (d.response->size() != n) {
      v.push_back("response length differs from row count");
    } else {
      detail::check_vector(report, "response '" + d.response_name + "'", *d.response,
                           d.response_kind == ColumnKind::binary);
    }
  }
  if (d.row_weights) {
    const auto& w = *d.row_weights;
    if (w.size() != n) {
      v.push_back("row_weights length differs from row count");
    } else {
      double sum = 0.0;
      for (std::size_t i = 0; i < w.size(); ++i) {
        if (!std::isfinite(w[i])) {
          v.push_back("non-finite weight at row " + std::to_string(i));
        } else if (w[i] < 0.0) {
          v.push_back("negative weight at row " + std::to_string(i));
        } else {
          sum += w[i];
        }
      }
      if (n > 0 && !(sum > 0.0)) v.push_back("row_weights sum to zero");
    }
  }
  return report;
}

inline void require_valid(const Dataset& d, bool allow_empty = false) {
  auto report = validate(d, allow_empty);
  if (!report.ok()) throw ValidationError("invalid dataset: " + report.to_string());
}

inline ColumnKind infer_kind(std::span<const double> values) {
  if (values.empty()) return ColumnKind::continuous;
  return std::all_of(values.begin(), values.end(), detail::is_binary_value)
             ? ColumnKind::binary
             : ColumnKind::continuous;
}

inline Dataset select_rows(const Dataset& d, std::span<const std::size_t> rows) {
  Dataset out;
  out.schema = d.schema;
  out.response_name = d.response_name;
  out.response_kind = d.response_kind;
  out.weight_name = d.weight_name;
  auto take = [&](const std::vector<double>& src) {
    std::vector<double> dst;
    dst.reserve(rows.size());
    for (auto i : rows) dst.push_back(src[i]);
    return dst;
  };
  out.columns.reserve(d.columns.size());
  for (const auto& c : d.columns) out.columns.push_back(take(c));
  if (d.response) out.response = take(*d.response);
  if (d.row_weights) out.row_weights = take(*d.row_weights);
  return out;
}

inline Dataset select_columns(const Dataset& d, std::span<const std::size_t> cols) {
  Dataset out = d;
  out.schema.clear();
  out.columns.clear();
  for (auto j : cols) {
    out.schema.push_back(d.schema.at(j));
    out.columns.push_back(d.columns.at(j));
  }
  return out;
}

inline Dataset select_columns(const Dataset& d, std::span<const std::string> names) {
  std::vector<std::size_t> cols;
  for (const auto& name : names) cols.push_back(d.index_of(name));
  return select_columns(d, cols);
}

// Stacks `b` under `a`. Schemas must agree by name; `b`'s columns are
// matched by name so column order may differ.
inline Dataset concat_rows(const Dataset& a, const Dataset& b) {
  if (a.features() != b.features())
    throw ValidationError("cannot stack datasets with different schemas");
  Dataset out = a;
  for (std::size_t j = 0; j < a.features(); ++j) {
    const auto& src = b.columns[b.index_of(a.schema[j].name)];
    out.columns[j].insert(out.columns[j].end(), src.begin(), src.end());
  }
  if (a.response && b.response) {
    out.response->insert(out.response->end(), b.response->begin(), b.response->end());
  } else {
    out.response.reset();
  }
  if (a.row_weights && b.row_weights) {
    out.row_weights->insert(out.row_weights->end(), b.row_weights->begin(),
                            b.row_weights->end());
  } else {
    out.row_weights.reset();
  }
  return out;
}

// Shortest decimal form that parses back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

struct CsvOptions {
  std::optional<std::string> response;
  std::optional<std::string> weight;
  // Kind overrides by column name; unlisted columns are inferred.
  std::vector<ColumnSchema> schema_hint;
  // Accept a header-only file (used for prediction inputs).
  bool allow_empty = false;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(',', start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos
                                              ? std::string_view::npos
                                              : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline std::optional<ColumnKind> hinted_kind(const CsvOptions& opts,
                                             std::string_view name) {
  for (const auto& h : opts.schema_hint)
    if (h.name == name) return h.kind;
  return std::nullopt;
}

}  // namespace detail

inline Dataset read_csv(std::istream& in, const CsvOptions& opts = {}) {
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    for (auto f : detail::split_fields(line)) header.emplace_back(f);
    break;
  }
  if (header.empty()) throw ParseError("missing header row", line_no, 0);
  {
    std::unordered_set<std::string> seen;
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (header[c].empty())
        throw ParseError("empty column name at column " + std::to_string(c + 1),
                         line_no, c + 1);
      if (!seen.insert(header[c]).second)
        throw ParseError("duplicate column name '" + header[c] + "'", line_no, c + 1);
    }
  }

  std::vector<std::vector<double>> raw(header.size());
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    ++row;
    auto fields = detail::split_fields(line);
    if (fields.size() != header.size()) {
      throw ParseError("line " + std::to_string(line_no) + " (row " +
                           std::to_string(row) + "): expected " +
                           std::to_string(header.size()) + " fields, found " +
                           std::to_string(fields.size()),
                       line_no, 0);
    }
    for (std::size_t c = 0; c < fields.size(); ++c) {
      auto f = fields[c];
      const std::string where = "line " + std::to_string(line_no) + " (row " +
                                std::to_string(row) + "), column " +
                                std::to_string(c + 1) + " '" + header[c] + "'";
      if (f.empty() || f == "NA")
        throw ValidationError(where + ": missing value");
      double value = 0.0;
      const char* first = f.data();
      if (!f.empty() && f.front() == '+') ++first;
      auto [ptr, ec] = std::from_chars(first, f.data() + f.size(), value);
      if (ec != std::errc() || ptr != f.data() + f.size())
        throw ParseError(where + ": malformed numeric field '" + std::string(f) + "'",
                         line_no, c + 1);
      raw[c].push_back(value);
    }
  }

  Dataset d;
  for (std::size_t c = 0; c < header.size(); ++c) {
    auto kind = detail::hinted_kind(opts, header[c]).value_or(infer_kind(raw[c]));
    if (opts.response && header[c] == *opts.response) {
      d.response_name = header[c];
      d.response_kind = kind;
      d.response = std::move(raw[c]);
    } else if (opts.weight && header[c] == *opts.weight) {
      d.weight_name = header[c];
      d.row_weights = std::move(raw[c]);
    } else {
      d.schema.push_back({header[c], kind});
      d.columns.push_back(std::move(raw[c]));
    }
  }
  if (opts.response && !d.response)
    throw ValidationError("response column '" + *opts.response + "' not found");
  if (opts.weight && !d.row_weights)
    throw ValidationError("weight column '" + *opts.weight + "' not found");
  require_valid(d, opts.allow_empty);
  return d;
}

inline Dataset read_csv_string(const std::string& text, const CsvOptions& opts = {}) {
  std::istringstream in(text);
  return read_csv(in, opts);
}

inline Dataset parse_dataset(const std::string& path, const CsvOptions& opts = {}) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  return read_csv(in, opts);
}

// Writes features, then the response and weight columns when present. Values
// use the shortest round-trip representation, so read_csv(write_csv(d)) == d.
inline void write_csv(std::ostream& out, const Dataset& d) {
  std::vector<std::pair<std::string, const std::vector<double>*>> cols;
  for (std::size_t j = 0; j < d.features(); ++j)
    cols.emplace_back(d.schema[j].name, &d.columns[j]);
  if (d.response) cols.emplace_back(d.response_name, &*d.response);
  if (d.row_weights) cols.emplace_back(d.weight_name, &*d.row_weights);
  for (std::size_t c = 0; c < cols.size(); ++c)
    out << (c ? "," : "") << cols[c].first;
  out << '\n';
  for (std::size_t i = 0; i < d.rows(); ++i) {
    for (std::size_t c = 0; c < cols.size(); ++c)
      out << (c ? "," : "") << format_double((*cols[c].second)[i]);
    out << '\n';
  }
}

inline CsvOptions options_for(const Dataset& d) {
  CsvOptions opts;
  if (d.response) opts.response = d.response_name;
  if (d.row_weights) opts.weight = d.weight_name;
  opts.schema_hint = d.schema;
  if (d.response) opts.schema_hint.push_back({d.response_name, d.response_kind});
  return opts;
}

}  // namespace dacart
