#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "urysohn/piecewise_linear.hpp"
#include "urysohn/random.hpp"

namespace urysohn {

/// Raised for malformed or inconsistent input data. Carries a 1-based row
/// number when the problem is tied to a record (0 otherwise).
class DataError : public std::runtime_error {
public:
  explicit DataError(const std::string& what, std::size_t row = 0)
      : std::runtime_error(row ? "row " + std::to_string(row) + ": " + what : what), row_(row) {}
  [[nodiscard]] std::size_t row() const noexcept { return row_; }

private:
  std::size_t row_;
};

enum class ColumnRole { Input, Output, Ignored };

struct ColumnSpec {
  std::string name;
  ColumnRole role = ColumnRole::Input;
  InputKind kind = InputKind::Continuous;
  double min = 0.0;
  double max = 0.0;
  /// Categorical levels; level k (0-based here) is encoded as k + 1.
  std::vector<std::string> categories;

  [[nodiscard]] bool is_categorical() const noexcept { return kind == InputKind::Quantized; }
  [[nodiscard]] std::size_t level_count() const noexcept { return categories.size(); }

  [[nodiscard]] double encode(const std::string& level) const {
    const auto it = std::lower_bound(categories.begin(), categories.end(), level);
    if (it == categories.end() || *it != level)
      throw DataError("unknown level '" + level + "' in column " + name);
    return static_cast<double>(it - categories.begin() + 1);
  }

  [[nodiscard]] const std::string& decode(double code) const {
    const auto k = static_cast<long>(std::lround(code)) - 1;
    if (k < 0 || static_cast<std::size_t>(k) >= categories.size())
      throw DataError("code " + std::to_string(code) + " out of range in column " + name);
    return categories[static_cast<std::size_t>(k)];
  }

  friend bool operator==(const ColumnSpec&, const ColumnSpec&) = default;
};

/// Inclusive per-input value range.
struct Range {
  double min = 0.0;
  double max = 0.0;
  friend bool operator==(const Range&, const Range&) = default;
};

/// Row-major numeric records with typed columns. Categorical inputs are
/// stored already encoded as 1..level_count.
struct Dataset {
  std::vector<ColumnSpec> inputs;
  ColumnSpec output{"z", ColumnRole::Output};
  std::vector<double> x;
  std::vector<double> z;
  std::string source;

  [[nodiscard]] std::size_t size() const noexcept { return z.size(); }
  [[nodiscard]] bool empty() const noexcept { return z.empty(); }
  [[nodiscard]] std::size_t input_count() const noexcept { return inputs.size(); }

  [[nodiscard]] std::span<const double> row(std::size_t i) const noexcept {
    return {x.data() + i * inputs.size(), inputs.size()};
  }

  void push_back(std::span<const double> inputs_row, double output) {
    if (inputs_row.size() != inputs.size())
      throw DataError("record has " + std::to_string(inputs_row.size()) + " inputs, expected " +
                      std::to_string(inputs.size()), size() + 1);
    x.insert(x.end(), inputs_row.begin(), inputs_row.end());
    z.push_back(output);
  }

  [[nodiscard]] Dataset subset(std::span<const std::size_t> indices) const {
    Dataset out;
    out.inputs = inputs;
    out.output = output;
    out.source = source;
    out.x.reserve(indices.size() * inputs.size());
    out.z.reserve(indices.size());
    for (const std::size_t i : indices) out.push_back(row(i), z[i]);
    return out;
  }

  /// Recomputes continuous ranges from the data and checks every invariant.
  /// Data scored by an existing model may hold constant or single-level
  /// columns; pass allow_degenerate for that case.
  void finalize(bool allow_degenerate = false) {
    const std::size_t m = inputs.size();
    if (m == 0) throw DataError("dataset has no input columns");
    if (x.size() != m * z.size()) throw DataError("input matrix size does not match record count");
    for (std::size_t j = 0; j < m; ++j) {
      auto& col = inputs[j];
      double lo = std::numeric_limits<double>::infinity();
      double hi = -lo;
      for (std::size_t i = 0; i < size(); ++i) {
        const double v = x[i * m + j];
        if (!std::isfinite(v)) throw DataError("non-finite value in column " + col.name, i + 1);
        if (col.is_categorical() && (v < 1.0 || v > static_cast<double>(col.level_count()) || v != std::round(v)))
          throw DataError("categorical code out of range in column " + col.name, i + 1);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      if (col.is_categorical()) {
        if (col.level_count() < 2 && !allow_degenerate) throw DataError("column " + col.name + " has a single level");
        col.min = 1.0;
        col.max = static_cast<double>(col.level_count());
      } else {
        if (!empty() && !(lo < hi) && !allow_degenerate) throw DataError("column " + col.name + " is constant (min = max)");
        col.min = lo;
        col.max = hi;
      }
    }
    if (!empty()) {
      const auto [lo, hi] = std::minmax_element(z.begin(), z.end());
      output.min = *lo;
      output.max = *hi;
    }
  }
};

/// Per-input ranges over a subset of records. Categorical inputs always span
/// their full level set. A constant continuous column is widened by ±0.5 so a
/// model can still be built on a subset that happens not to vary.
inline std::vector<Range> input_ranges(const Dataset& data) {
  const std::size_t m = data.input_count();
  std::vector<Range> ranges(m, Range{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()});
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto r = data.row(i);
    for (std::size_t j = 0; j < m; ++j) {
      ranges[j].min = std::min(ranges[j].min, r[j]);
      ranges[j].max = std::max(ranges[j].max, r[j]);
    }
  }
  for (std::size_t j = 0; j < m; ++j) {
    const auto& col = data.inputs[j];
    if (col.is_categorical()) {
      ranges[j] = {1.0, static_cast<double>(col.level_count())};
    } else if (!(ranges[j].min < ranges[j].max)) {
      if (data.empty()) throw DataError("cannot take ranges of an empty dataset");
      ranges[j] = {ranges[j].min - 0.5, ranges[j].max + 0.5};
    }
  }
  return ranges;
}

// ---------------------------------------------------------------------------
// Windowing

/// Rearranges a single-input single-output signal pair into records of the
/// `window` most recent inputs (newest first) and the current output.
inline Dataset window_siso(std::span<const double> input, std::span<const double> output, std::size_t window) {
  if (window == 0) throw DataError("window length must be positive");
  if (input.size() != output.size())
    throw DataError("input and output series differ in length (" + std::to_string(input.size()) + " vs " +
                    std::to_string(output.size()) + ")");
  if (input.size() < window)
    throw DataError("series of length " + std::to_string(input.size()) + " is shorter than window " +
                    std::to_string(window));
  Dataset data;
  for (std::size_t j = 0; j < window; ++j) data.inputs.push_back({"lag" + std::to_string(j)});
  const std::size_t count = input.size() - window + 1;
  data.x.reserve(count * window);
  data.z.reserve(count);
  std::vector<double> rec(window);
  for (std::size_t i = 0; i < count; ++i) {
    for (std::size_t j = 0; j < window; ++j) rec[j] = input[i + window - 1 - j];
    data.push_back(rec, output[i + window - 1]);
  }
  return data;
}

// ---------------------------------------------------------------------------
// Splitting

struct Fold {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
};

struct FoldPlan {
  std::size_t fold_count = 0;
  std::vector<std::size_t> permutation;
  std::vector<Fold> folds;
};

/// Seeded shuffle, then contiguous chunks of floor/ceil(N/k) records.
inline FoldPlan split_kfold(std::size_t record_count, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw DataError("fold count must be at least 2");
  if (k > record_count)
    throw DataError("fold count " + std::to_string(k) + " exceeds record count " + std::to_string(record_count));
  Rng rng(seed);
  FoldPlan plan;
  plan.fold_count = k;
  plan.permutation = permutation(record_count, rng);
  for (std::size_t f = 0; f < k; ++f) {
    const std::size_t begin = f * record_count / k;
    const std::size_t end = (f + 1) * record_count / k;
    Fold fold;
    fold.validation.assign(plan.permutation.begin() + static_cast<std::ptrdiff_t>(begin),
                           plan.permutation.begin() + static_cast<std::ptrdiff_t>(end));
    fold.train.reserve(record_count - (end - begin));
    fold.train.insert(fold.train.end(), plan.permutation.begin(),
                      plan.permutation.begin() + static_cast<std::ptrdiff_t>(begin));
    fold.train.insert(fold.train.end(), plan.permutation.begin() + static_cast<std::ptrdiff_t>(end),
                      plan.permutation.end());
    plan.folds.push_back(std::move(fold));
  }
  return plan;
}

struct ThreeWaySplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> selection;
  std::vector<std::size_t> test;
};

/// Seeded shuffle cut into train/selection/test. The first two sizes are
/// floor(N * fraction); the test subset takes the remainder.
inline ThreeWaySplit split_fractions(std::size_t record_count, double train_fraction, double selection_fraction,
                                     double test_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0 && selection_fraction > 0 && test_fraction > 0))
    throw DataError("split fractions must all be positive");
  if (std::abs(train_fraction + selection_fraction + test_fraction - 1.0) > 1e-9)
    throw DataError("split fractions must sum to 1");
  const auto cut = [&](double f) {
    return static_cast<std::size_t>(std::floor(static_cast<double>(record_count) * f + 1e-9));
  };
  const std::size_t n_train = cut(train_fraction);
  const std::size_t n_sel = cut(selection_fraction);
  if (n_train == 0 || n_sel == 0 || n_train + n_sel >= record_count)
    throw DataError("split of " + std::to_string(record_count) + " records leaves an empty subset");
  Rng rng(seed);
  const auto perm = permutation(record_count, rng);
  const auto at = [&](std::size_t k) { return perm.begin() + static_cast<std::ptrdiff_t>(k); };
  return {{perm.begin(), at(n_train)}, {at(n_train), at(n_train + n_sel)}, {at(n_train + n_sel), perm.end()}};
}

// ---------------------------------------------------------------------------
// Synthetic benchmark function

struct SyntheticInputRanges {
  static constexpr double lo[5] = {0.0, 0.0, 1.0, 0.4, 0.0};
  static constexpr double hi[5] = {0.99, 1.55, 1.49, 1.39, 0.49};
};

/// |sin(x2)^x1 - exp(-x3)| / x4 + x5 cos(x5). std::pow(0, 0) is 1.
inline double synthetic_function(std::span<const double> x) {
  return std::abs(std::pow(std::sin(x[1]), x[0]) - std::exp(-x[2])) / x[3] + x[4] * std::cos(x[4]);
}

inline Dataset synth_generate(std::size_t record_count, std::uint64_t seed) {
  if (record_count == 0) throw DataError("record count must be positive");
  Rng rng(seed);
  Dataset data;
  data.source = "synthetic(seed=" + std::to_string(seed) + ")";
  for (std::size_t j = 0; j < 5; ++j) {
    ColumnSpec col{"x" + std::to_string(j + 1)};
    col.min = SyntheticInputRanges::lo[j];
    col.max = SyntheticInputRanges::hi[j];
    data.inputs.push_back(std::move(col));
  }
  data.output.name = "z";
  double rec[5];
  for (std::size_t i = 0; i < record_count; ++i) {
    for (std::size_t j = 0; j < 5; ++j) rec[j] = uniform(rng, SyntheticInputRanges::lo[j], SyntheticInputRanges::hi[j]);
    data.push_back(rec, synthetic_function(rec));
  }
  const auto [lo, hi] = std::minmax_element(data.z.begin(), data.z.end());
  data.output.min = *lo;
  data.output.max = *hi;
  return data;
}

}  // namespace urysohn
