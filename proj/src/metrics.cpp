// SPDX-License-Identifier: Apache-2.0
#include "idea_eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include <boost/math/distributions/students_t.hpp>
#include <fmt/format.h>

#include "idea_eval/error.hpp"
#include "idea_eval/stats.hpp"

namespace idea_eval {

std::vector<double> average_ranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    // Positions i..j (0-based) hold ranks i+1..j+1; their mean is (i+j)/2 + 1.
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

namespace {

void check_pairs(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) {
    throw Error(ErrorKind::LengthMismatch,
                fmt::format("spearman: {} vs {} values", x.size(), y.size()));
  }
  if (x.size() < 2) throw Error(ErrorKind::EmptyInput, "spearman needs at least 2 pairs");
}

bool is_constant(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [&](double a) { return a == v.front(); });
}

double pearson_centered(std::span<const double> a, std::span<const double> b) {
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / static_cast<double>(a.size());
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / static_cast<double>(b.size());
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma;
    const double db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

CorrResult make_result(double rho, std::size_t n) {
  CorrResult r;
  r.rho = rho;
  r.n = n;
  r.pvalue = spearman_pvalue(rho, n);
  r.significant = r.pvalue <= kSignificanceLevel;
  return r;
}

}  // namespace

double spearman_pvalue(double rho, std::size_t n) {
  if (n <= 2 || !std::isfinite(rho)) return 1.0;
  if (std::abs(rho) >= 1.0) return 0.0;
  const double df = static_cast<double>(n - 2);
  const double t = rho * std::sqrt(df / (1.0 - rho * rho));
  const boost::math::students_t dist(df);
  return std::clamp(2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t))), 0.0, 1.0);
}

std::optional<CorrResult> try_spearman(std::span<const double> x, std::span<const double> y) {
  check_pairs(x, y);
  if (is_constant(x) || is_constant(y)) return std::nullopt;
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  return make_result(pearson_centered(rx, ry), x.size());
}

CorrResult spearman(std::span<const double> x, std::span<const double> y) {
  auto r = try_spearman(x, y);
  if (!r) throw Error(ErrorKind::ConstantInput, "spearman undefined: an input is constant");
  return *r;
}

double spearman_permutation_pvalue(std::span<const double> x, std::span<const double> y) {
  check_pairs(x, y);
  if (x.size() > 10) throw Error(ErrorKind::InvalidConfig, "permutation p-value limited to n <= 10");
  const double observed = std::abs(spearman(x, y).rho);
  const auto rx = average_ranks(x);
  auto ry = average_ranks(y);
  std::sort(ry.begin(), ry.end());
  std::size_t extreme = 0, total = 0;
  do {
    ++total;
    if (std::abs(pearson_centered(rx, ry)) >= observed - 1e-12) ++extreme;
  } while (std::next_permutation(ry.begin(), ry.end()));
  // next_permutation skips duplicate orderings of tied ranks; each distinct
  // ordering stands for the same number of raw permutations, so the ratio holds.
  return static_cast<double>(extreme) / static_cast<double>(total);
}

double closest_review(double prediction, std::span<const double> reviews) {
  if (reviews.empty()) throw Error(ErrorKind::EmptyInput, "no reviews to choose from");
  double best = reviews.front();
  for (double s : reviews) {
    const double d = std::abs(s - prediction);
    const double bd = std::abs(best - prediction);
    if (d < bd || (d == bd && s < best)) best = s;
  }
  return best;
}

CorrResult closest_human_corr(const std::map<std::string, double>& predictions,
                              const Corpus& corpus, std::string_view criterion) {
  std::vector<double> preds, targets;
  preds.reserve(predictions.size());
  targets.reserve(predictions.size());
  for (const auto& [id, pred] : predictions) {
    preds.push_back(pred);
    targets.push_back(closest_review(pred, corpus.at(id).scores(criterion)));
  }
  return spearman(preds, targets);
}

HumanBaseline human_baseline(const Corpus& corpus, std::string_view criterion, std::size_t trials,
                             std::uint64_t seed) {
  std::vector<const std::vector<double>*> eligible;
  for (const auto& m : corpus.manuscripts()) {
    if (m.has_criterion(criterion) && m.scores(criterion).size() >= 2) {
      eligible.push_back(&m.scores(criterion));
    }
  }
  if (eligible.size() < 2) {
    throw Error(ErrorKind::InsufficientReviews,
                fmt::format("human baseline for '{}' needs >= 2 papers with >= 2 reviews, found {}",
                            criterion, eligible.size()));
  }
  if (trials == 0) throw Error(ErrorKind::InvalidConfig, "human baseline needs >= 1 trial");

  std::mt19937_64 rng(seed);
  std::vector<double> picked(eligible.size()), rest(eligible.size());
  double sum = 0.0;
  std::size_t used = 0;
  for (std::size_t t = 0; t < trials; ++t) {
    for (std::size_t p = 0; p < eligible.size(); ++p) {
      const auto& scores = *eligible[p];
      std::uniform_int_distribution<std::size_t> pick(0, scores.size() - 1);
      const std::size_t k = pick(rng);
      std::vector<double> others;
      others.reserve(scores.size() - 1);
      for (std::size_t i = 0; i < scores.size(); ++i) {
        if (i != k) others.push_back(scores[i]);
      }
      picked[p] = scores[k];
      rest[p] = mean_of(others);
    }
    // A draw where either side is constant has no rank information; skip it.
    if (auto r = try_spearman(picked, rest)) {
      sum += r->rho;
      ++used;
    }
  }
  if (used == 0) {
    throw Error(ErrorKind::ConstantInput, "human baseline undefined: every draw was constant");
  }
  return {sum / static_cast<double>(used), used, eligible.size()};
}

ErrorBins abs_error_bins(std::span<const double> predictions, std::span<const double> labels) {
  if (predictions.size() != labels.size()) {
    throw Error(ErrorKind::LengthMismatch,
                fmt::format("abs_error_bins: {} predictions vs {} labels", predictions.size(),
                            labels.size()));
  }
  ErrorBins bins;
  bins.total = predictions.size();
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const double err = std::abs(predictions[i] - labels[i]);
    const std::size_t k = err < 1.0 ? 0 : err < 2.0 ? 1 : err < 3.0 ? 2 : 3;
    ++bins.counts[k];
  }
  for (std::size_t k = 0; k < 4; ++k) {
    bins.fractions[k] = bins.total == 0 ? 0.0
                                        : static_cast<double>(bins.counts[k]) /
                                              static_cast<double>(bins.total);
  }
  return bins;
}

double fraction_within(std::span<const double> predictions, std::span<const double> labels,
                       double threshold) {
  if (predictions.size() != labels.size()) {
    throw Error(ErrorKind::LengthMismatch, "fraction_within: length mismatch");
  }
  if (predictions.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (std::abs(predictions[i] - labels[i]) < threshold) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(predictions.size());
}

double Histogram::bin_hi(std::size_t k) const {
  return std::min(hi, lo + static_cast<double>(k + 1) * bin_width);
}

double Histogram::fraction(std::size_t count) const {
  return total == 0 ? 0.0 : static_cast<double>(count) / static_cast<double>(total);
}

Histogram score_histogram(std::span<const double> values, double bin_width, double lo, double hi) {
  if (!(bin_width > 0.0) || !(hi > lo)) {
    throw Error(ErrorKind::InvalidConfig, "histogram needs bin_width > 0 and hi > lo");
  }
  Histogram h;
  h.lo = lo;
  h.hi = hi;
  h.bin_width = bin_width;
  const auto bins = static_cast<std::size_t>(std::ceil((hi - lo) / bin_width - 1e-12));
  h.counts.assign(std::max<std::size_t>(bins, 1), 0);
  h.total = values.size();
  for (double v : values) {
    if (v < lo) {
      ++h.underflow;
    } else if (v > hi) {
      ++h.overflow;
    } else {
      auto k = static_cast<std::size_t>(std::floor((v - lo) / bin_width));
      ++h.counts[std::min(k, h.counts.size() - 1)];
    }
  }
  return h;
}

double relative_mean_difference(double human_mean, double ours_mean) {
  if (human_mean == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return std::abs(human_mean - ours_mean) / std::abs(human_mean);
}

std::vector<DomainRow> domain_stats(std::span<const double> predictions, std::span<const double> labels,
                                    std::span<const std::optional<std::string>> domains) {
  if (predictions.size() != labels.size() || predictions.size() != domains.size()) {
    throw Error(ErrorKind::LengthMismatch, "domain_stats: inputs are not aligned");
  }
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> groups;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const std::string key = domains[i] ? *domains[i] : std::string(kNoDomain);
    auto& [human, ours] = groups[key];
    human.push_back(labels[i]);
    ours.push_back(predictions[i]);
  }
  std::vector<DomainRow> rows;
  for (const auto& [domain, streams] : groups) {
    const auto& [human, ours] = streams;
    DomainRow row;
    row.domain = domain;
    row.count = human.size();
    row.human_mean = mean_of(human);
    row.human_std = stddev_of(human);
    row.ours_mean = mean_of(ours);
    row.ours_std = stddev_of(ours);
    row.human_min = *std::min_element(human.begin(), human.end());
    row.human_max = *std::max_element(human.begin(), human.end());
    row.ours_min = *std::min_element(ours.begin(), ours.end());
    row.ours_max = *std::max_element(ours.begin(), ours.end());
    row.diff_pct = relative_mean_difference(row.human_mean, row.ours_mean);
    rows.push_back(std::move(row));
  }
  std::stable_partition(rows.begin(), rows.end(),
                        [](const DomainRow& r) { return r.domain != kNoDomain; });
  return rows;
}

}  // namespace idea_eval
