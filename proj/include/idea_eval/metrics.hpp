// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "idea_eval/corpus.hpp"

namespace idea_eval {

inline constexpr double kSignificanceLevel = 0.05;

struct CorrResult {
  double rho = 0.0;
  double pvalue = 1.0;
  std::size_t n = 0;
  bool significant = false;
};

/// 1-based ranks; tied values share the mean of the ranks they span.
std::vector<double> average_ranks(std::span<const double> values);

/// Spearman rho (Pearson on average ranks) with a two-sided Student-t p-value.
/// Throws LengthMismatch, EmptyInput (n < 2), or ConstantInput.
CorrResult spearman(std::span<const double> x, std::span<const double> y);

/// As spearman, but nullopt when either side is constant.
std::optional<CorrResult> try_spearman(std::span<const double> x, std::span<const double> y);

/// Two-sided p-value for rho from n pairs using the t approximation.
double spearman_pvalue(double rho, std::size_t n);

/// Exact two-sided permutation p-value, enumerating all n! orderings of y.
/// Limited to n <= 10.
double spearman_permutation_pvalue(std::span<const double> x, std::span<const double> y);

/// Review score nearest to `prediction`; ties go to the smaller score.
double closest_review(double prediction, std::span<const double> reviews);

/// Spearman between predictions and, per paper, the nearest individual review.
CorrResult closest_human_corr(const std::map<std::string, double>& predictions,
                              const Corpus& corpus, std::string_view criterion);

struct HumanBaseline {
  double mean_rho = 0.0;
  std::size_t trials_used = 0;
  std::size_t papers = 0;
};

/// Mean rho of one randomly drawn review against the mean of the remaining
/// reviews, over `trials` draws. Papers with fewer than two reviews are skipped.
HumanBaseline human_baseline(const Corpus& corpus, std::string_view criterion, std::size_t trials,
                             std::uint64_t seed);

/// Counts over |pred - label| in [0,1), [1,2), [2,3), [3,inf).
struct ErrorBins {
  static constexpr std::array<const char*, 4> kLabels = {"[0,1)", "[1,2)", "[2,3)", "[3,inf)"};
  std::array<std::size_t, 4> counts{};
  std::array<double, 4> fractions{};
  std::size_t total = 0;
};

ErrorBins abs_error_bins(std::span<const double> predictions, std::span<const double> labels);

/// Share of pairs with |pred - label| < threshold.
double fraction_within(std::span<const double> predictions, std::span<const double> labels,
                       double threshold);

struct Histogram {
  double lo = 1.0;
  double hi = 10.0;
  double bin_width = 1.0;
  std::vector<std::size_t> counts;  // [lo + k·w, lo + (k+1)·w); last bin closed at hi
  std::size_t underflow = 0;
  std::size_t overflow = 0;
  std::size_t total = 0;

  double bin_lo(std::size_t k) const { return lo + static_cast<double>(k) * bin_width; }
  double bin_hi(std::size_t k) const;
  double fraction(std::size_t count) const;
};

Histogram score_histogram(std::span<const double> values, double bin_width, double lo = 1.0,
                          double hi = 10.0);

struct DomainRow {
  std::string domain;
  std::size_t count = 0;
  double human_mean = 0.0;
  double human_std = 0.0;
  double ours_mean = 0.0;
  double ours_std = 0.0;
  double human_min = 0.0;
  double ours_min = 0.0;
  double human_max = 0.0;
  double ours_max = 0.0;
  /// |human_mean - ours_mean| / human_mean, as a fraction.
  double diff_pct = 0.0;
};

inline constexpr std::string_view kNoDomain = "None";

/// One row per domain, sorted by name with the "None" row last.
std::vector<DomainRow> domain_stats(std::span<const double> predictions, std::span<const double> labels,
                                    std::span<const std::optional<std::string>> domains);

double relative_mean_difference(double human_mean, double ours_mean);

}  // namespace idea_eval
