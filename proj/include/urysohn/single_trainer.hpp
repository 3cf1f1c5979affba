#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "urysohn/dataset.hpp"
#include "urysohn/piecewise_linear.hpp"
#include "urysohn/random.hpp"

namespace urysohn {

struct TrainConfig {
  /// Projection step, 0 < alpha < 2. Values below 1 filter noise.
  double alpha = 0.5;
  std::size_t epochs = 100;
  /// Node count per continuous input; one entry broadcasts to all inputs.
  /// Categorical inputs always use one node per level.
  std::vector<std::size_t> nodes_per_input{10};
  std::uint64_t seed = 0;
  /// Stop once an epoch's mean |residual| drops below this. 0 disables.
  double early_stop = 0.0;

  void validate() const {
    if (!(alpha > 0.0 && alpha < 2.0)) throw std::invalid_argument("alpha must lie in (0, 2)");
    if (epochs == 0) throw std::invalid_argument("epochs must be positive");
    if (nodes_per_input.empty()) throw std::invalid_argument("nodes per input not set");
    for (const auto n : nodes_per_input)
      if (n < 2) throw std::invalid_argument("every function needs at least 2 nodes");
    if (early_stop < 0.0) throw std::invalid_argument("early-stop threshold must be non-negative");
  }
};

struct TrainTrace {
  std::vector<double> epoch_mean_abs_residual;
  /// Fraction of records rejected by the error gate (tree training only).
  std::vector<double> epoch_skip_rate;
  double final_residual = 0.0;
};

inline std::size_t nodes_for(std::span<const std::size_t> nodes_per_input, std::size_t j) {
  if (nodes_per_input.size() == 1) return nodes_per_input[0];
  if (j >= nodes_per_input.size())
    throw std::invalid_argument("nodes per input lists " + std::to_string(nodes_per_input.size()) +
                                " entries, input " + std::to_string(j + 1) + " has none");
  return nodes_per_input[j];
}

/// All-zero operator over the given columns and ranges.
inline UrysohnOperator make_operator(std::span<const ColumnSpec> columns, std::span<const Range> ranges,
                                     std::span<const std::size_t> nodes_per_input) {
  if (columns.size() != ranges.size()) throw std::invalid_argument("column/range count mismatch");
  if (nodes_per_input.size() != 1 && nodes_per_input.size() != columns.size())
    throw std::invalid_argument("nodes per input lists " + std::to_string(nodes_per_input.size()) +
                                " entries for " + std::to_string(columns.size()) + " inputs");
  std::vector<PiecewiseLinear> fs;
  fs.reserve(columns.size());
  for (std::size_t j = 0; j < columns.size(); ++j) {
    if (columns[j].is_categorical())
      fs.push_back(PiecewiseLinear::quantized(columns[j].level_count()));
    else
      fs.emplace_back(ranges[j].min, ranges[j].max, nodes_for(nodes_per_input, j));
  }
  return UrysohnOperator(std::move(fs));
}

/// Two nodes per input: the linear regression model written in terms of the
/// values at the left and right ends of each input range.
inline UrysohnOperator make_linear_baseline(std::span<const Range> ranges) {
  if (ranges.empty()) throw std::invalid_argument("linear baseline needs at least one input");
  std::vector<PiecewiseLinear> fs;
  for (const auto& r : ranges) fs.emplace_back(r.min, r.max, std::size_t{2});
  return UrysohnOperator(std::move(fs));
}

/// Squared norm of the sparse projection row: sum of (1-psi)^2 + psi^2.
inline double chi_norm(std::span<const SegmentLocation> locations) noexcept {
  double chi = 0.0;
  for (const auto& loc : locations) {
    const double psi = loc.fraction;
    chi += (1.0 - psi) * (1.0 - psi) + psi * psi;
  }
  return chi;
}

/// Projects the operator's nodal values toward the hyperplane of record
/// (x, z) with relative step alpha. Returns the pre-step residual D; the
/// post-step residual on the same record is (1 - alpha) D.
inline double kaczmarz_step(UrysohnOperator& op, std::span<const SegmentLocation> loc, double z, double alpha) {
  const double residual = z - op.evaluate(loc);
  const double scale = alpha * residual / chi_norm(loc);
  for (std::size_t j = 0; j < op.input_count(); ++j) {
    const double psi = loc[j].fraction;
    op[j].apply_nodal_increment(loc[j], scale * (1.0 - psi), scale * psi);
  }
  return residual;
}

inline double kaczmarz_step(UrysohnOperator& op, std::span<const double> x, double z, double alpha) {
  std::vector<SegmentLocation> loc(op.input_count());
  op.locate(x, loc);
  return kaczmarz_step(op, std::span<const SegmentLocation>(loc), z, alpha);
}

/// Record-by-record projection descent, reshuffled every epoch.
inline std::pair<UrysohnOperator, TrainTrace> train_single(UrysohnOperator op, const Dataset& data,
                                                           const TrainConfig& cfg) {
  cfg.validate();
  if (data.empty()) throw DataError("cannot train on an empty dataset");
  op.check_arity(data.input_count());

  Rng rng(cfg.seed);
  auto order = iota_indices(data.size());
  std::vector<SegmentLocation> loc(op.input_count());
  TrainTrace trace;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle(std::span<std::size_t>(order), rng);
    double sum_abs = 0.0;
    for (const std::size_t i : order) {
      op.locate(data.row(i), loc);
      sum_abs += std::abs(kaczmarz_step(op, std::span<const SegmentLocation>(loc), data.z[i], cfg.alpha));
    }
    const double mean_abs = sum_abs / static_cast<double>(data.size());
    trace.epoch_mean_abs_residual.push_back(mean_abs);
    if (cfg.early_stop > 0.0 && mean_abs < cfg.early_stop) break;
  }
  trace.final_residual = trace.epoch_mean_abs_residual.back();
  return {std::move(op), std::move(trace)};
}

}  // namespace urysohn
