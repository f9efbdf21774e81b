// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "idea_eval/corpus.hpp"

namespace idea_eval {

/// Consistency-ordered train/test partition for one criterion.
struct Split {
  std::string criterion;
  double train_ratio = 0.0;
  std::vector<std::string> train_ids;
  std::vector<std::string> test_ids;

  bool operator==(const Split&) const = default;
};

/// Population variance of one paper's review scores for `criterion`.
double review_variance(const Manuscript& manuscript, std::string_view criterion);

/// Ids of papers carrying `criterion`, ascending by review variance; ties by id.
std::vector<std::string> sort_by_consistency(const Corpus& corpus, std::string_view criterion);

/// First max(1, floor(ratio·n)) ids train, the rest test.
Split split(const std::vector<std::string>& ordered_ids, double train_ratio,
            std::string criterion = {});

/// Convenience: sort_by_consistency followed by split.
Split consistency_split(const Corpus& corpus, std::string_view criterion, double train_ratio);

/// Ground-truth label: mean of the paper's review scores.
double mean_label(const Manuscript& manuscript, std::string_view criterion);

std::string split_to_json(const Split& split);

}  // namespace idea_eval
