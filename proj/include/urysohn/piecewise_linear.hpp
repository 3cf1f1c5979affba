#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <cstddef>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace urysohn {

enum class InputKind { Continuous, Quantized };

/// Position of an argument on a uniform nodal grid.
///
/// Indices are 0-based. When the argument sits exactly on a node the floor
/// segment is taken, `fraction` is 0 and `ceiling == floor`.
struct SegmentLocation {
  std::size_t floor = 0;
  std::size_t ceiling = 0;
  double fraction = 0.0;
};

/// Piecewise-linear function of one variable on a uniform grid of n >= 2 nodes.
///
/// A quantized function takes integer arguments 1..n which coincide with the
/// nodes, so every lookup lands on exactly one node.
class PiecewiseLinear {
public:
  PiecewiseLinear() = default;

  PiecewiseLinear(double domain_min, double domain_max, std::size_t node_count, double fill = 0.0)
      : PiecewiseLinear(domain_min, domain_max, std::vector<double>(node_count, fill)) {}

  PiecewiseLinear(double domain_min, double domain_max, std::vector<double> node_values)
      : min_(domain_min), max_(domain_max), values_(std::move(node_values)) {
    if (values_.size() < 2)
      throw std::invalid_argument("piecewise-linear function needs at least 2 nodes");
    if (!(std::isfinite(min_) && std::isfinite(max_)) || !(min_ < max_))
      throw std::invalid_argument("degenerate domain [" + std::to_string(min_) + ", " +
                                  std::to_string(max_) + "]");
  }

  static PiecewiseLinear quantized(std::size_t level_count, double fill = 0.0) {
    return quantized(std::vector<double>(level_count, fill));
  }

  static PiecewiseLinear quantized(std::vector<double> node_values) {
    const auto n = static_cast<double>(node_values.size());
    PiecewiseLinear f(1.0, std::max(n, 2.0), std::move(node_values));
    f.kind_ = InputKind::Quantized;
    return f;
  }

  [[nodiscard]] InputKind kind() const noexcept { return kind_; }
  [[nodiscard]] bool is_quantized() const noexcept { return kind_ == InputKind::Quantized; }
  [[nodiscard]] double domain_min() const noexcept { return min_; }
  [[nodiscard]] double domain_max() const noexcept { return max_; }
  [[nodiscard]] std::size_t size() const noexcept { return values_.size(); }
  [[nodiscard]] std::span<const double> values() const noexcept { return values_; }
  [[nodiscard]] std::span<double> values() noexcept { return values_; }
  double& operator[](std::size_t k) { return values_[k]; }
  double operator[](std::size_t k) const { return values_[k]; }

  [[nodiscard]] double step() const noexcept {
    return (max_ - min_) / static_cast<double>(values_.size() - 1);
  }

  /// Abscissa of node k (0-based).
  [[nodiscard]] double node_position(std::size_t k) const noexcept {
    if (k + 1 == values_.size()) return max_;
    return min_ + step() * static_cast<double>(k);
  }

  [[nodiscard]] double clamp(double x) const noexcept { return std::clamp(x, min_, max_); }

  [[nodiscard]] bool contains(double x) const noexcept { return x >= min_ && x <= max_; }

  /// Arguments outside the domain are clamped first.
  [[nodiscard]] SegmentLocation locate(double x) const noexcept {
    const std::size_t last = values_.size() - 1;
    x = clamp(x);
    if (kind_ == InputKind::Quantized) {
      const auto k = static_cast<std::size_t>(std::lround(x - min_));
      const std::size_t q = std::min(k, last);
      return {q, q, 0.0};
    }
    double b = static_cast<double>(last) * (x - min_) / (max_ - min_);
    // Node positions round-trip through node_position() with a few ulps of error.
    const double scale = static_cast<double>(last) * std::max({1.0, std::abs(min_), std::abs(max_)}) / (max_ - min_);
    if (const double r = std::round(b); std::abs(b - r) <= 16.0 * std::numeric_limits<double>::epsilon() * scale) b = r;
    auto q = static_cast<std::size_t>(std::floor(b));
    if (q >= last) return {last, last, 0.0};
    const double psi = b - static_cast<double>(q);
    if (psi <= 0.0) return {q, q, 0.0};
    return {q, q + 1, psi};
  }

  [[nodiscard]] double evaluate(const SegmentLocation& loc) const noexcept {
    return (1.0 - loc.fraction) * values_[loc.floor] + loc.fraction * values_[loc.ceiling];
  }

  [[nodiscard]] double operator()(double x) const noexcept { return evaluate(locate(x)); }

  /// Index of the segment used for slopes and extrapolation at x.
  [[nodiscard]] std::size_t segment_index(double x) const noexcept {
    const std::size_t last_segment = values_.size() - 2;
    if (x <= min_) return 0;
    if (x >= max_) return last_segment;
    const double b = (x - min_) / step();
    return std::min(static_cast<std::size_t>(std::floor(b)), last_segment);
  }

  /// Slope of the segment containing x; boundary segments beyond the domain.
  [[nodiscard]] double slope(double x) const noexcept {
    const std::size_t s = segment_index(x);
    return (values_[s + 1] - values_[s]) / step();
  }

  /// Like operator() inside the domain; outside it the boundary segment is
  /// continued linearly instead of clamping.
  [[nodiscard]] double extrapolate(double x) const noexcept {
    if (contains(x)) return (*this)(x);
    const std::size_t s = segment_index(x);
    return values_[s] + (x - node_position(s)) * (values_[s + 1] - values_[s]) / step();
  }

  /// node[floor] += amount_floor and node[ceiling] += amount_ceiling. A
  /// single-node location only moves node[floor]; amount_ceiling is then
  /// expected to be zero and is ignored.
  void apply_nodal_increment(const SegmentLocation& loc, double amount_floor, double amount_ceiling) noexcept {
    values_[loc.floor] += amount_floor;
    if (loc.ceiling != loc.floor) values_[loc.ceiling] += amount_ceiling;
  }

  /// Re-spreads the nodes uniformly over [new_min, new_max], resampling the
  /// current shape (linear continuation outside the old domain).
  void rescale_domain(double new_min, double new_max) {
    if (!(new_min < new_max)) throw std::invalid_argument("degenerate domain in rescale");
    const std::size_t n = values_.size();
    std::vector<double> resampled(n);
    const double h = (new_max - new_min) / static_cast<double>(n - 1);
    for (std::size_t k = 0; k < n; ++k) {
      const double x = (k + 1 == n) ? new_max : new_min + h * static_cast<double>(k);
      resampled[k] = extrapolate(x);
    }
    values_ = std::move(resampled);
    min_ = new_min;
    max_ = new_max;
  }

  /// Extends the domain exactly to include x. Returns false (no change) when
  /// x already lies inside.
  bool reposition_to_include(double x) {
    if (contains(x) || kind_ == InputKind::Quantized) return false;
    rescale_domain(std::min(min_, x), std::max(max_, x));
    return true;
  }

  friend bool operator==(const PiecewiseLinear&, const PiecewiseLinear&) = default;

private:
  double min_ = 0.0;
  double max_ = 1.0;
  std::vector<double> values_{0.0, 0.0};
  InputKind kind_ = InputKind::Continuous;
};

/// Discrete Urysohn operator: the sum of one piecewise-linear function per input.
class UrysohnOperator {
public:
  UrysohnOperator() = default;

  explicit UrysohnOperator(std::vector<PiecewiseLinear> functions) : functions_(std::move(functions)) {
    if (functions_.empty()) throw std::invalid_argument("Urysohn operator needs at least one input");
  }

  [[nodiscard]] std::size_t input_count() const noexcept { return functions_.size(); }
  [[nodiscard]] std::span<const PiecewiseLinear> functions() const noexcept { return functions_; }
  [[nodiscard]] std::span<PiecewiseLinear> functions() noexcept { return functions_; }
  PiecewiseLinear& operator[](std::size_t j) { return functions_[j]; }
  const PiecewiseLinear& operator[](std::size_t j) const { return functions_[j]; }

  [[nodiscard]] std::size_t parameter_count() const noexcept {
    return std::accumulate(functions_.begin(), functions_.end(), std::size_t{0},
                           [](std::size_t acc, const PiecewiseLinear& f) { return acc + f.size(); });
  }

  void check_arity(std::size_t n) const {
    if (n != functions_.size())
      throw std::invalid_argument("input has " + std::to_string(n) + " values, operator expects " +
                                  std::to_string(functions_.size()));
  }

  void locate(std::span<const double> x, std::span<SegmentLocation> out) const {
    check_arity(x.size());
    for (std::size_t j = 0; j < functions_.size(); ++j) out[j] = functions_[j].locate(x[j]);
  }

  [[nodiscard]] std::vector<SegmentLocation> locate(std::span<const double> x) const {
    std::vector<SegmentLocation> out(functions_.size());
    locate(x, out);
    return out;
  }

  [[nodiscard]] double evaluate(std::span<const SegmentLocation> loc) const noexcept {
    double sum = 0.0;
    for (std::size_t j = 0; j < functions_.size(); ++j) sum += functions_[j].evaluate(loc[j]);
    return sum;
  }

  [[nodiscard]] double evaluate(std::span<const double> x) const {
    check_arity(x.size());
    double sum = 0.0;
    for (std::size_t j = 0; j < functions_.size(); ++j) sum += functions_[j](x[j]);
    return sum;
  }

  /// Evaluation with linear continuation of each function beyond its domain.
  [[nodiscard]] double extrapolate(std::span<const double> x) const {
    check_arity(x.size());
    double sum = 0.0;
    for (std::size_t j = 0; j < functions_.size(); ++j) sum += functions_[j].extrapolate(x[j]);
    return sum;
  }

  friend bool operator==(const UrysohnOperator&, const UrysohnOperator&) = default;

private:
  std::vector<PiecewiseLinear> functions_;
};

}  // namespace urysohn
