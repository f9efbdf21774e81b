// SPDX-License-Identifier: Apache-2.0
// Independent reference computations used only by tests.
#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

namespace idea_eval::testing {

// O(n^2) average rank: 1 + #smaller + (#equal - 1) / 2.
inline std::vector<double> naive_ranks(const std::vector<double>& v) {
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    double less = 0, equal = 0;
    for (double w : v) {
      if (w < v[i]) less += 1;
      if (w == v[i]) equal += 1;
    }
    r[i] = 1.0 + less + (equal - 1.0) / 2.0;
  }
  return r;
}

inline double naive_pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

inline double pearson_on_ranks(const std::vector<double>& x, const std::vector<double>& y) {
  return naive_pearson(naive_ranks(x), naive_ranks(y));
}

// Tie-free closed form 1 - 6 sum d^2 / (n (n^2 - 1)).
inline double rank_difference_rho(const std::vector<double>& x, const std::vector<double>& y) {
  const auto rx = naive_ranks(x);
  const auto ry = naive_ranks(y);
  double d2 = 0;
  for (std::size_t i = 0; i < x.size(); ++i) d2 += (rx[i] - ry[i]) * (rx[i] - ry[i]);
  const double n = static_cast<double>(x.size());
  return 1.0 - 6.0 * d2 / (n * (n * n - 1.0));
}

}  // namespace idea_eval::testing
