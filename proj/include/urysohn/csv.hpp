#pragma once

#include <algorithm>
#include <charconv>
#include <cstddef>
#include <fstream>
#include <iomanip>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "urysohn/dataset.hpp"

namespace urysohn {

struct CsvOptions {
  /// 0 picks ';', ',' or tab by counting them on the first line.
  char delimiter = 0;
  bool header = false;
  /// 1-based; 0 selects the last column.
  std::size_t output_column = 0;
  /// 1-based columns dropped before typing (e.g. record IDs).
  std::vector<std::size_t> ignored;
  /// 1-based numeric columns to treat as categorical.
  std::vector<std::size_t> quantized;
  /// Map a numeric output with exactly two distinct values to -1 / +1
  /// (lower / higher). Two-level symbolic outputs are always mapped, the
  /// lexicographically first level to +1.
  bool binary_output = false;
  /// False when the file holds inputs only; outputs are then set to 0.
  bool has_output = true;
  /// Accept constant and single-level columns (scoring data).
  bool allow_degenerate = false;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

inline std::optional<double> parse_number(std::string_view s) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

inline std::vector<std::string> split(std::string_view line, char delimiter) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find(delimiter, start);
    out.emplace_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline char detect_delimiter(std::string_view first_line) {
  const auto semis = std::count(first_line.begin(), first_line.end(), ';');
  const auto commas = std::count(first_line.begin(), first_line.end(), ',');
  const auto tabs = std::count(first_line.begin(), first_line.end(), '\t');
  if (tabs > semis && tabs > commas) return '\t';
  return semis > commas ? ';' : ',';
}

inline bool contains(const std::vector<std::size_t>& v, std::size_t x) {
  return std::find(v.begin(), v.end(), x) != v.end();
}

}  // namespace detail

/// Parses delimited text held in memory. `origin` names the source in errors.
inline Dataset parse_csv_text(std::string_view text, const CsvOptions& opt, const std::string& origin = "<text>") {
  struct Line {
    std::size_t number;
    std::vector<std::string> fields;
  };
  std::vector<Line> lines;
  std::vector<std::string> names;
  char delimiter = opt.delimiter;
  std::size_t number = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto end = text.find('\n', pos);
    const auto raw = text.substr(pos, end == std::string_view::npos ? std::string_view::npos : end - pos);
    pos = end == std::string_view::npos ? text.size() + 1 : end + 1;
    ++number;
    if (detail::trim(raw).empty()) continue;
    if (delimiter == 0) delimiter = detail::detect_delimiter(raw);
    auto fields = detail::split(raw, delimiter);
    if (opt.header && names.empty() && lines.empty()) {
      names = std::move(fields);
      continue;
    }
    if (!lines.empty() && fields.size() != lines.front().fields.size())
      throw DataError("expected " + std::to_string(lines.front().fields.size()) + " fields, found " +
                      std::to_string(fields.size()), number);
    if (!names.empty() && fields.size() != names.size())
      throw DataError("expected " + std::to_string(names.size()) + " fields (header), found " +
                      std::to_string(fields.size()), number);
    for (const auto& f : fields)
      if (f.empty()) throw DataError("empty field (missing values are not supported)", number);
    lines.push_back({number, std::move(fields)});
  }
  if (lines.empty()) throw DataError(origin + ": no records");

  const std::size_t cols = lines.front().fields.size();
  const std::size_t out_col = !opt.has_output ? 0 : opt.output_column == 0 ? cols : opt.output_column;
  if (out_col > cols) throw DataError("output column " + std::to_string(out_col) + " exceeds column count " +
                                      std::to_string(cols));
  for (const auto c : opt.ignored)
    if (c == 0 || c > cols) throw DataError("ignored column " + std::to_string(c) + " out of range");
  if (out_col != 0 && detail::contains(opt.ignored, out_col)) throw DataError("output column is also ignored");
  if (names.empty())
    for (std::size_t c = 1; c <= cols; ++c) names.push_back("c" + std::to_string(c));

  // Typing pass.
  std::vector<bool> numeric(cols, true);
  for (const auto& l : lines)
    for (std::size_t c = 0; c < cols; ++c)
      if (numeric[c] && !detail::parse_number(l.fields[c])) numeric[c] = false;

  const auto make_spec = [&](std::size_t c, ColumnRole role) {
    ColumnSpec spec{names[c], role};
    const bool categorical = !numeric[c] || (role == ColumnRole::Input && detail::contains(opt.quantized, c + 1));
    if (categorical) {
      spec.kind = InputKind::Quantized;
      std::set<std::string> levels;
      for (const auto& l : lines) levels.insert(l.fields[c]);
      spec.categories.assign(levels.begin(), levels.end());
    }
    return spec;
  };

  Dataset data;
  data.source = origin;
  std::vector<std::size_t> input_cols;
  for (std::size_t c = 0; c < cols; ++c) {
    if (c + 1 == out_col || detail::contains(opt.ignored, c + 1)) continue;
    input_cols.push_back(c);
    data.inputs.push_back(make_spec(c, ColumnRole::Input));
  }
  if (input_cols.empty()) throw DataError(origin + ": no input columns");

  std::vector<double> rec(input_cols.size());
  const auto encode_inputs = [&](const Line& l) {
    for (std::size_t j = 0; j < input_cols.size(); ++j) {
      const auto& field = l.fields[input_cols[j]];
      rec[j] = data.inputs[j].is_categorical() ? data.inputs[j].encode(field) : *detail::parse_number(field);
    }
  };
  if (out_col == 0) {
    for (const auto& l : lines) {
      encode_inputs(l);
      data.push_back(rec, 0.0);
    }
    data.finalize(opt.allow_degenerate);
    return data;
  }

  const std::size_t oc = out_col - 1;
  data.output = make_spec(oc, ColumnRole::Output);
  std::optional<std::pair<double, double>> numeric_binary;
  if (data.output.is_categorical() && data.output.level_count() != 2) {
    for (const auto& l : lines)
      if (!detail::parse_number(l.fields[oc]))
        throw DataError("output column " + data.output.name + " is not numeric: '" + l.fields[oc] + "'", l.number);
  }
  if (!data.output.is_categorical() && opt.binary_output) {
    std::set<double> distinct;
    for (const auto& l : lines) distinct.insert(*detail::parse_number(l.fields[oc]));
    if (distinct.size() != 2)
      throw DataError("binary output requested but column " + data.output.name + " has " +
                      std::to_string(distinct.size()) + " distinct values");
    numeric_binary = std::pair{*distinct.begin(), *distinct.rbegin()};
  }

  for (const auto& l : lines) {
    encode_inputs(l);
    double z = 0.0;
    if (data.output.is_categorical())
      z = data.output.encode(l.fields[oc]) == 1.0 ? 1.0 : -1.0;
    else if (numeric_binary)
      z = *detail::parse_number(l.fields[oc]) == numeric_binary->second ? 1.0 : -1.0;
    else
      z = *detail::parse_number(l.fields[oc]);
    data.push_back(rec, z);
  }
  data.finalize(opt.allow_degenerate);
  return data;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline Dataset parse_csv(const std::string& path, const CsvOptions& opt) {
  return parse_csv_text(read_file(path), opt, path);
}

/// One number per line (blank lines skipped).
inline std::vector<double> read_series(const std::string& path) {
  const auto text = read_file(path);
  std::vector<double> out;
  std::istringstream in(text);
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto t = detail::trim(line);
    if (t.empty()) continue;
    const auto v = detail::parse_number(t);
    if (!v) throw DataError(path + ": not a number: '" + std::string(t) + "'", number);
    out.push_back(*v);
  }
  if (out.empty()) throw DataError(path + ": empty series");
  return out;
}

/// Writes the dataset with a header row; categorical inputs are decoded.
inline void write_csv(const Dataset& data, std::ostream& os, char delimiter = ',') {
  for (const auto& c : data.inputs) os << c.name << delimiter;
  os << data.output.name << '\n';
  os << std::setprecision(17);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto r = data.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) {
      if (data.inputs[j].is_categorical())
        os << data.inputs[j].decode(r[j]);
      else
        os << r[j];
      os << delimiter;
    }
    os << data.z[i] << '\n';
  }
}

inline void write_csv(const Dataset& data, const std::string& path, char delimiter = ',') {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  write_csv(data, out, delimiter);
  if (!out) throw DataError("write failed: " + path);
}

}  // namespace urysohn
