#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "urysohn/dataset.hpp"
#include "urysohn/piecewise_linear.hpp"
#include "urysohn/random.hpp"
#include "urysohn/single_trainer.hpp"

namespace urysohn {

/// Two-layer tree of Urysohn operators: K branch operators map the inputs to
/// auxiliary variables phi_k, and a root operator with one function per
/// branch maps those to the output.
struct UrysohnTree {
  std::vector<UrysohnOperator> branches;
  UrysohnOperator root;

  [[nodiscard]] std::size_t addend_count() const noexcept { return branches.size(); }
  [[nodiscard]] std::size_t input_count() const noexcept {
    return branches.empty() ? 0 : branches.front().input_count();
  }

  void check_shape() const {
    if (branches.empty()) throw std::invalid_argument("tree needs at least one branch");
    if (root.input_count() != branches.size())
      throw std::invalid_argument("root has " + std::to_string(root.input_count()) + " functions for " +
                                  std::to_string(branches.size()) + " branches");
    for (const auto& b : branches)
      if (b.input_count() != input_count()) throw std::invalid_argument("branches differ in input count");
    for (const auto& f : root.functions())
      if (f.is_quantized()) throw std::invalid_argument("root functions must be continuous");
  }

  friend bool operator==(const UrysohnTree&, const UrysohnTree&) = default;
};

/// Fills phi with the branch outputs and returns the model output. Auxiliary
/// values outside a root function's domain are clamped.
inline double forward(const UrysohnTree& tree, std::span<const double> x, std::span<double> phi) {
  double z = 0.0;
  for (std::size_t k = 0; k < tree.branches.size(); ++k) {
    phi[k] = tree.branches[k].evaluate(x);
    z += tree.root[k](phi[k]);
  }
  return z;
}

inline std::pair<double, std::vector<double>> forward(const UrysohnTree& tree, std::span<const double> x) {
  std::vector<double> phi(tree.addend_count());
  const double z = forward(tree, x, phi);
  return {z, std::move(phi)};
}

inline double predict(const UrysohnTree& tree, std::span<const double> x) {
  double z = 0.0;
  for (std::size_t k = 0; k < tree.branches.size(); ++k) z += tree.root[k](tree.branches[k].evaluate(x));
  return z;
}

/// Slope guard: magnitudes below delta are pushed out to ±delta, keeping the
/// sign (zero counts as positive).
constexpr double threshold_derivative(double zeta, double delta) noexcept {
  if (zeta >= delta || zeta <= -delta) return zeta;
  return zeta >= 0.0 ? delta : -delta;
}

struct TreeConfig {
  /// Number of branch operators; 0 means 2m + 1.
  std::size_t addends = 0;
  std::vector<std::size_t> branch_nodes{10};
  std::size_t root_nodes = 10;
  /// Fraction of the residual moved onto the auxiliary variables, 0 < mu <= 1.
  double mu = 0.2;
  /// Slope threshold. 0 selects 1e-3 times the root function's value range
  /// (floor 1e-6), recomputed per step.
  double delta = 0.0;
  double alpha_branch = 0.5;
  double alpha_root = 0.5;
  std::size_t epochs = 100;
  std::uint64_t seed = 0;
  /// Half-width of the uniform draw for the initial auxiliary variables.
  double init_spread = 1.0;

  [[nodiscard]] std::size_t addends_for(std::size_t m) const noexcept { return addends ? addends : 2 * m + 1; }

  void validate() const {
    if (!(mu > 0.0 && mu <= 1.0)) throw std::invalid_argument("mu must lie in (0, 1]");
    if (delta < 0.0) throw std::invalid_argument("delta must be positive (0 selects the default)");
    if (!(alpha_branch > 0.0 && alpha_branch < 2.0)) throw std::invalid_argument("branch alpha must lie in (0, 2)");
    if (!(alpha_root > 0.0 && alpha_root < 2.0)) throw std::invalid_argument("root alpha must lie in (0, 2)");
    if (epochs == 0) throw std::invalid_argument("epochs must be positive");
    if (root_nodes < 2) throw std::invalid_argument("root functions need at least 2 nodes");
    if (branch_nodes.empty()) throw std::invalid_argument("branch nodes not set");
    for (const auto n : branch_nodes)
      if (n < 2) throw std::invalid_argument("every function needs at least 2 nodes");
    if (!(init_spread > 0.0)) throw std::invalid_argument("initial spread must be positive");
  }
};

inline double default_delta(const PiecewiseLinear& f) {
  const auto v = f.values();
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  return std::max(1e-3 * (*hi - *lo), 1e-6);
}

/// Sum of root functions at phi, continuing boundary segments linearly
/// outside their domains (the values they take after repositioning).
inline double root_output(const UrysohnTree& tree, std::span<const double> phi) {
  double z = 0.0;
  for (std::size_t k = 0; k < phi.size(); ++k) z += tree.root[k].extrapolate(phi[k]);
  return z;
}

/// Auxiliary-variable increments mu R / (K T(Phi_k'(phi_k))).
inline void phi_increments(const UrysohnTree& tree, std::span<const double> phi, double residual, double mu,
                           double delta, std::span<double> out) {
  const auto K = static_cast<double>(tree.addend_count());
  for (std::size_t k = 0; k < phi.size(); ++k) {
    const auto& f = tree.root[k];
    const double d = delta > 0.0 ? delta : default_delta(f);
    out[k] = mu * residual / (K * threshold_derivative(f.slope(phi[k]), d));
  }
}

inline std::vector<double> phi_increments(const UrysohnTree& tree, std::span<const double> phi, double residual,
                                          double mu, double delta) {
  std::vector<double> out(phi.size());
  phi_increments(tree, phi, residual, mu, delta, out);
  return out;
}

/// Extends the domain exactly to new_value, keeping the node count and
/// resampling values (interpolation inside the old domain, linear
/// extrapolation of the boundary segment outside). No-op for values inside.
inline PiecewiseLinear reposition_root_domain(PiecewiseLinear f, double new_value) {
  f.reposition_to_include(new_value);
  return f;
}

/// Scratch buffers for one tree step, reused across records.
struct TreeStepWorkspace {
  std::vector<double> phi;
  std::vector<double> shift;
  std::vector<double> target;
  std::vector<SegmentLocation> loc;

  explicit TreeStepWorkspace(const UrysohnTree& tree)
      : phi(tree.addend_count()), shift(tree.addend_count()), target(tree.addend_count()),
        loc(std::max(tree.input_count(), tree.addend_count())) {}
};

struct TreeStepResult {
  bool accepted = false;
  double residual = 0.0;
};

/// One record of the descent. The record is skipped (tree untouched) unless
/// moving the auxiliary variables strictly lowers the absolute error.
inline TreeStepResult tree_step(UrysohnTree& tree, std::span<const double> x, double z, const TreeConfig& cfg,
                                TreeStepWorkspace& ws, double mu) {
  const std::size_t K = tree.addend_count();
  const std::size_t m = tree.input_count();
  auto branch_loc = std::span<SegmentLocation>(ws.loc).first(m);

  for (std::size_t k = 0; k < K; ++k) ws.phi[k] = tree.branches[k].evaluate(x);
  const double residual = z - root_output(tree, ws.phi);
  phi_increments(tree, ws.phi, residual, mu, cfg.delta, ws.shift);
  for (std::size_t k = 0; k < K; ++k) ws.target[k] = ws.phi[k] + ws.shift[k];
  const double shifted_error = std::abs(z - root_output(tree, ws.target));
  if (!(shifted_error < std::abs(residual))) return {false, residual};

  for (std::size_t k = 0; k < K; ++k) {
    tree.branches[k].locate(x, branch_loc);
    kaczmarz_step(tree.branches[k], std::span<const SegmentLocation>(branch_loc), ws.target[k], cfg.alpha_branch);
  }
  for (std::size_t k = 0; k < K; ++k) tree.root[k].reposition_to_include(ws.target[k]);
  auto root_loc = std::span<SegmentLocation>(ws.loc).first(K);
  tree.root.locate(ws.target, root_loc);
  kaczmarz_step(tree.root, std::span<const SegmentLocation>(root_loc), z, cfg.alpha_root);
  return {true, residual};
}

/// Branches fitted to random auxiliary targets (so no two start identical),
/// then a root fitted to the resulting auxiliary values. One pass each.
inline UrysohnTree initialize_tree(const Dataset& data, std::span<const Range> ranges, const TreeConfig& cfg) {
  cfg.validate();
  if (data.empty()) throw DataError("cannot initialize a tree from an empty dataset");
  const std::size_t m = data.input_count();
  const std::size_t K = cfg.addends_for(m);
  Rng rng(derive_seed(cfg.seed, 0x1417));

  UrysohnTree tree;
  const auto blank = make_operator(data.inputs, ranges, cfg.branch_nodes);
  tree.branches.assign(K, blank);

  std::vector<SegmentLocation> loc(m);
  for (std::size_t i = 0; i < data.size(); ++i) {
    blank.locate(data.row(i), loc);
    for (auto& branch : tree.branches)
      kaczmarz_step(branch, std::span<const SegmentLocation>(loc),
                    uniform(rng, -cfg.init_spread, cfg.init_spread), cfg.alpha_branch);
  }

  std::vector<Range> phi_range(K, Range{std::numeric_limits<double>::infinity(),
                                        -std::numeric_limits<double>::infinity()});
  std::vector<double> phi(data.size() * K);
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (std::size_t k = 0; k < K; ++k) {
      const double v = tree.branches[k].evaluate(data.row(i));
      phi[i * K + k] = v;
      phi_range[k].min = std::min(phi_range[k].min, v);
      phi_range[k].max = std::max(phi_range[k].max, v);
    }
  }
  std::vector<PiecewiseLinear> root_fns;
  for (auto& r : phi_range) {
    if (!(r.max - r.min > 1e-9 * std::max(1.0, std::abs(r.min)))) {
      r.min -= 0.5 * cfg.init_spread;
      r.max += 0.5 * cfg.init_spread;
    }
    root_fns.emplace_back(r.min, r.max, cfg.root_nodes);
  }
  tree.root = UrysohnOperator(std::move(root_fns));
  std::vector<SegmentLocation> root_loc(K);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto p = std::span<const double>(phi).subspan(i * K, K);
    tree.root.locate(p, root_loc);
    kaczmarz_step(tree.root, std::span<const SegmentLocation>(root_loc), data.z[i], cfg.alpha_root);
  }
  return tree;
}

/// Extends root domains so they cover every auxiliary value the current
/// branches produce on data.
inline void cover_root_domains(UrysohnTree& tree, const Dataset& data) {
  const std::size_t K = tree.addend_count();
  std::vector<Range> seen(K, Range{std::numeric_limits<double>::infinity(),
                                   -std::numeric_limits<double>::infinity()});
  for (std::size_t i = 0; i < data.size(); ++i)
    for (std::size_t k = 0; k < K; ++k) {
      const double v = tree.branches[k].evaluate(data.row(i));
      seen[k].min = std::min(seen[k].min, v);
      seen[k].max = std::max(seen[k].max, v);
    }
  for (std::size_t k = 0; k < K; ++k) {
    if (data.empty()) break;
    tree.root[k].reposition_to_include(seen[k].min);
    tree.root[k].reposition_to_include(seen[k].max);
  }
}

inline TreeStepResult tree_step(UrysohnTree& tree, std::span<const double> x, double z, const TreeConfig& cfg) {
  TreeStepWorkspace ws(tree);
  return tree_step(tree, x, z, cfg, ws, cfg.mu);
}

/// Continues the descent from an existing tree.
inline std::pair<UrysohnTree, TrainTrace> train_tree(UrysohnTree tree, const Dataset& data, const TreeConfig& cfg) {
  cfg.validate();
  if (data.empty()) throw DataError("cannot train on an empty dataset");
  tree.check_shape();
  tree.branches.front().check_arity(data.input_count());

  Rng rng(derive_seed(cfg.seed, 0x7ee));
  auto order = iota_indices(data.size());
  TreeStepWorkspace ws(tree);
  TrainTrace trace;
  double mu = cfg.mu;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle(std::span<std::size_t>(order), rng);
    double sum_abs = 0.0;
    std::size_t skipped = 0;
    for (const std::size_t i : order) {
      const auto step = tree_step(tree, data.row(i), data.z[i], cfg, ws, mu);
      sum_abs += std::abs(step.residual);
      if (!step.accepted) ++skipped;
    }
    trace.epoch_mean_abs_residual.push_back(sum_abs / static_cast<double>(data.size()));
    trace.epoch_skip_rate.push_back(static_cast<double>(skipped) / static_cast<double>(data.size()));
    if (skipped == data.size()) mu = std::max(0.5 * mu, cfg.mu / 64.0);
  }
  cover_root_domains(tree, data);
  trace.final_residual = trace.epoch_mean_abs_residual.back();
  return {std::move(tree), std::move(trace)};
}

/// Record-by-record descent over shuffled epochs. An epoch in which every
/// record is rejected halves mu for the next one (down to 1/64 of its start).
inline std::pair<UrysohnTree, TrainTrace> train_tree(const Dataset& data, std::span<const Range> ranges,
                                                     const TreeConfig& cfg) {
  cfg.validate();
  if (data.empty()) throw DataError("cannot train on an empty dataset");
  UrysohnTree tree = initialize_tree(data, ranges, cfg);
  return train_tree(std::move(tree), data, cfg);
}

}  // namespace urysohn
