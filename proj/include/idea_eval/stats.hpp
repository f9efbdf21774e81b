// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

namespace idea_eval {

/// Arithmetic mean, summed in ascending order so the result does not depend
/// on input order, and clamped into [min, max] against rounding drift.
inline double mean_of(std::span<const double> values) {
  if (values.empty()) return 0.0;
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  double sum = 0.0;
  for (double v : sorted) sum += v;
  return std::clamp(sum / static_cast<double>(sorted.size()), sorted.front(), sorted.back());
}

/// Divides by n (population convention) unless `sample` and n > 1.
/// Exactly zero when all values are equal.
inline double variance_of(std::span<const double> values, bool sample = false) {
  if (values.empty()) return 0.0;
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  if (*lo == *hi) return 0.0;
  const double mu = mean_of(values);
  std::vector<double> sq;
  sq.reserve(values.size());
  for (double v : values) sq.push_back((v - mu) * (v - mu));
  std::sort(sq.begin(), sq.end());
  double ss = 0.0;
  for (double s : sq) ss += s;
  const auto n = static_cast<double>(values.size());
  if (sample && values.size() > 1) return ss / (n - 1.0);
  return ss / n;
}

inline double stddev_of(std::span<const double> values, bool sample = false) {
  return std::sqrt(variance_of(values, sample));
}

}  // namespace idea_eval
