// SPDX-License-Identifier: Apache-2.0
#include "idea_eval/partition.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>
#include <json.hpp>

#include "idea_eval/error.hpp"
#include "idea_eval/stats.hpp"

namespace idea_eval {

double review_variance(const Manuscript& manuscript, std::string_view criterion) {
  return variance_of(manuscript.scores(criterion));
}

std::vector<std::string> sort_by_consistency(const Corpus& corpus, std::string_view criterion) {
  std::vector<std::pair<double, std::string>> keyed;
  for (const auto& m : corpus.manuscripts()) {
    if (!m.has_criterion(criterion)) continue;
    keyed.emplace_back(review_variance(m, criterion), m.id);
  }
  if (keyed.empty()) {
    throw Error(ErrorKind::UnknownCriterion,
                fmt::format("criterion '{}' not present in any manuscript", criterion));
  }
  std::sort(keyed.begin(), keyed.end());
  std::vector<std::string> ids;
  ids.reserve(keyed.size());
  for (auto& [_, id] : keyed) ids.push_back(std::move(id));
  return ids;
}

Split split(const std::vector<std::string>& ordered_ids, double train_ratio, std::string criterion) {
  if (!(train_ratio > 0.0 && train_ratio < 1.0)) {
    throw Error(ErrorKind::RatioOutOfRange,
                fmt::format("train ratio must lie in (0, 1), got {}", train_ratio));
  }
  if (ordered_ids.empty()) throw Error(ErrorKind::EmptyInput, "cannot split an empty id list");
  const auto n = ordered_ids.size();
  const auto floored = static_cast<std::size_t>(std::floor(train_ratio * static_cast<double>(n)));
  const auto n_train = std::max<std::size_t>(1, floored);
  if (n_train >= n) {
    throw Error(ErrorKind::AllTrain,
                fmt::format("ratio {} over {} papers leaves an empty test set", train_ratio, n));
  }
  Split s;
  s.criterion = std::move(criterion);
  s.train_ratio = train_ratio;
  s.train_ids.assign(ordered_ids.begin(), ordered_ids.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.test_ids.assign(ordered_ids.begin() + static_cast<std::ptrdiff_t>(n_train), ordered_ids.end());
  return s;
}

Split consistency_split(const Corpus& corpus, std::string_view criterion, double train_ratio) {
  return split(sort_by_consistency(corpus, criterion), train_ratio, std::string(criterion));
}

double mean_label(const Manuscript& manuscript, std::string_view criterion) {
  return mean_of(manuscript.scores(criterion));
}

std::string split_to_json(const Split& s) {
  nlohmann::ordered_json j;
  j["criterion"] = s.criterion;
  j["ratio"] = s.train_ratio;
  j["train_ids"] = s.train_ids;
  j["test_ids"] = s.test_ids;
  return j.dump(2) + "\n";
}

}  // namespace idea_eval
