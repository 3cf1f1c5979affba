#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

namespace urysohn {

inline void check_same_length(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw std::invalid_argument("series lengths differ (" + std::to_string(a.size()) + " vs " +
                                std::to_string(b.size()) + ")");
}

/// Sample Pearson correlation. Empty when either series has zero variance or
/// fewer than two points.
inline std::optional<double> pearson(std::span<const double> z, std::span<const double> z_hat) {
  check_same_length(z, z_hat);
  const std::size_t n = z.size();
  if (n < 2) return std::nullopt;
  double mz = 0.0, mh = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mz += z[i];
    mh += z_hat[i];
  }
  mz /= static_cast<double>(n);
  mh /= static_cast<double>(n);
  double szz = 0.0, shh = 0.0, szh = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = z[i] - mz;
    const double b = z_hat[i] - mh;
    szz += a * a;
    shh += b * b;
    szh += a * b;
  }
  if (!(szz > 0.0) || !(shh > 0.0)) return std::nullopt;
  return std::clamp(szh / std::sqrt(szz * shh), -1.0, 1.0);
}

/// RMSE divided by a normalizing range, by default the range of z.
inline double nrmse(std::span<const double> z, std::span<const double> z_hat, std::optional<double> range = {}) {
  check_same_length(z, z_hat);
  if (z.empty()) throw std::invalid_argument("nrmse of an empty series");
  double r = 0.0;
  if (range) {
    r = *range;
  } else {
    const auto [lo, hi] = std::minmax_element(z.begin(), z.end());
    r = *hi - *lo;
  }
  if (!(r > 0.0)) throw std::invalid_argument("nrmse undefined for a constant output (zero range)");
  double ss = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) ss += (z[i] - z_hat[i]) * (z[i] - z_hat[i]);
  return std::sqrt(ss / static_cast<double>(z.size())) / r;
}

/// Records whose prediction sign disagrees with the ±1 label; 0 is always wrong.
inline std::size_t classification_errors(std::span<const double> z, std::span<const double> z_hat) {
  check_same_length(z, z_hat);
  std::size_t errors = 0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    const bool correct = (z[i] > 0.0 && z_hat[i] > 0.0) || (z[i] < 0.0 && z_hat[i] < 0.0);
    if (!correct) ++errors;
  }
  return errors;
}

struct ConfidenceInterval {
  double mean = 0.0;
  double half_width = 0.0;
  std::size_t count = 0;
};

/// Student-t 95% interval for the mean of repeated-run statistics.
inline ConfidenceInterval ci95(std::span<const double> samples) {
  const std::size_t n = samples.size();
  if (n < 2) throw std::invalid_argument("confidence interval needs at least 2 samples");
  double mean = 0.0;
  for (const double s : samples) mean += s;
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (const double s : samples) ss += (s - mean) * (s - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  const boost::math::students_t dist(static_cast<double>(n - 1));
  const double t = boost::math::quantile(dist, 0.975);
  return {mean, t * sd / std::sqrt(static_cast<double>(n)), n};
}

struct EvalReport {
  std::optional<double> pearson;
  double nrmse = 0.0;
  /// Only meaningful for ±1 outputs.
  std::optional<std::size_t> misclassified;
  std::size_t n = 0;
};

inline bool is_sign_labelled(std::span<const double> z) {
  return !z.empty() && std::all_of(z.begin(), z.end(), [](double v) { return v == 1.0 || v == -1.0; });
}

inline EvalReport evaluate(std::span<const double> z, std::span<const double> z_hat,
                           std::optional<double> range = {}) {
  EvalReport r;
  r.n = z.size();
  r.pearson = pearson(z, z_hat);
  r.nrmse = nrmse(z, z_hat, range);
  if (is_sign_labelled(z)) r.misclassified = classification_errors(z, z_hat);
  return r;
}

/// key=value lines, one metric per line.
inline std::string to_key_value(const EvalReport& r, const std::string& prefix = "") {
  std::ostringstream os;
  os.precision(10);
  os << prefix << "n=" << r.n << '\n';
  if (r.pearson)
    os << prefix << "pearson=" << *r.pearson << '\n';
  else
    os << prefix << "pearson=undefined\n";
  os << prefix << "nrmse=" << r.nrmse << '\n';
  if (r.misclassified) os << prefix << "misclassified=" << *r.misclassified << '\n';
  return os.str();
}

}  // namespace urysohn
