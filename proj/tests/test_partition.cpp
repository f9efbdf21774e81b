// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <algorithm>
#include <functional>
#include <random>

#include <json.hpp>

#include "idea_eval/error.hpp"
#include "idea_eval/partition.hpp"

using namespace idea_eval;

namespace {

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an idea_eval::Error");
  return ErrorKind::Io;
}

Manuscript paper(std::string id, std::vector<double> scores, std::string criterion = "q") {
  Manuscript m;
  m.id = std::move(id);
  m.title = "t";
  m.abstract = "a";
  m.reviews[std::move(criterion)] = std::move(scores);
  return m;
}

std::vector<std::string> ids(std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back("p" + std::to_string(i));
  return out;
}

}  // namespace

TEST_SUITE("partition") {

TEST_CASE("consistency order") {
  SUBCASE("ascending variance") {
    const Corpus corpus({paper("x", {5, 5}), paper("y", {4, 6}), paper("z", {5, 6})});
    CHECK(sort_by_consistency(corpus, "q") == std::vector<std::string>{"x", "z", "y"});
  }
  SUBCASE("ties broken by id") {
    const Corpus corpus({paper("b", {3, 5}), paper("a", {6, 8})});
    CHECK(sort_by_consistency(corpus, "q") == std::vector<std::string>{"a", "b"});
  }
  SUBCASE("single review has zero variance") {
    const Corpus corpus({paper("s", {7}), paper("t", {6, 7})});
    CHECK(review_variance(corpus.at("s"), "q") == 0.0);
    CHECK(sort_by_consistency(corpus, "q").front() == "s");
  }
  SUBCASE("papers without the criterion are dropped") {
    const Corpus corpus({paper("a", {5}), paper("b", {5}, "other")});
    CHECK(sort_by_consistency(corpus, "q") == std::vector<std::string>{"a"});
    CHECK(kind_of([&] { sort_by_consistency(corpus, "missing"); }) == ErrorKind::UnknownCriterion);
  }
  CHECK(review_variance(paper("v", {4, 6}), "q") == 1.0);
}

TEST_CASE("split sizes") {
  auto s = split(ids(10), 0.3);
  CHECK(s.train_ids.size() == 3);
  CHECK(s.test_ids.size() == 7);
  CHECK(s.train_ids == std::vector<std::string>{"p0", "p1", "p2"});

  s = split(ids(3), 0.05);
  CHECK(s.train_ids.size() == 1);
  CHECK(s.test_ids.size() == 2);

  s = split(ids(2), 0.9);
  CHECK(s.train_ids.size() == 1);
  CHECK(s.test_ids.size() == 1);

  CHECK(kind_of([] { split(ids(1), 0.9); }) == ErrorKind::AllTrain);
  CHECK(kind_of([] { split(ids(0), 0.3); }) == ErrorKind::EmptyInput);
  CHECK(kind_of([] { split(ids(10), 0.0); }) == ErrorKind::RatioOutOfRange);
  CHECK(kind_of([] { split(ids(10), 1.0); }) == ErrorKind::RatioOutOfRange);
  CHECK(kind_of([] { split(ids(10), -0.2); }) == ErrorKind::RatioOutOfRange);
}

TEST_CASE("mean label") {
  CHECK(mean_label(paper("a", {6, 6, 8}), "q") == doctest::Approx(6.6667).epsilon(1e-4));
  CHECK(mean_label(paper("a", {7.5}), "q") == 7.5);
  CHECK(mean_label(paper("a", {7, 8, 7.5}), "q") == 7.5);
  CHECK(kind_of([] { mean_label(paper("a", {5}), "zzz"); }) == ErrorKind::UnknownCriterion);

  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> score(1, 10);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> s(static_cast<std::size_t>(trial % 6 + 1));
    for (auto& v : s) v = score(rng);
    const double m = mean_label(paper("a", s), "q");
    std::shuffle(s.begin(), s.end(), rng);
    CHECK(mean_label(paper("a", s), "q") == m);
  }
}

TEST_CASE("train variances never exceed test variances") {
  std::mt19937_64 rng(9);
  std::uniform_int_distribution<int> n_papers(2, 60), n_reviews(1, 5), score(1, 10);
  std::uniform_real_distribution<double> ratio(0.01, 0.95);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Manuscript> ms;
    const int n = n_papers(rng);
    for (int i = 0; i < n; ++i) {
      std::vector<double> s(static_cast<std::size_t>(n_reviews(rng)));
      for (auto& v : s) v = score(rng);
      ms.push_back(paper("m" + std::to_string(i), s));
    }
    const Corpus corpus(ms);
    const double r = ratio(rng);
    if (std::max<std::size_t>(1, static_cast<std::size_t>(r * n)) >= static_cast<std::size_t>(n)) continue;
    const auto s = consistency_split(corpus, "q", r);
    CHECK(s.train_ids.size() + s.test_ids.size() == static_cast<std::size_t>(n));
    double train_max = 0.0, test_min = 1e300;
    for (const auto& id : s.train_ids) train_max = std::max(train_max, review_variance(corpus.at(id), "q"));
    for (const auto& id : s.test_ids) test_min = std::min(test_min, review_variance(corpus.at(id), "q"));
    CHECK(train_max <= test_min);
    CHECK(consistency_split(corpus, "q", r) == s);
  }
}

TEST_CASE("split json") {
  const Corpus corpus({paper("x", {5, 5}), paper("y", {4, 6}), paper("z", {5, 6})});
  const auto j = nlohmann::json::parse(split_to_json(consistency_split(corpus, "q", 0.3)));
  CHECK(j["criterion"] == "q");
  CHECK(j["ratio"] == 0.3);
  CHECK(j["train_ids"] == nlohmann::json::array({"x"}));
  CHECK(j["test_ids"] == nlohmann::json::array({"z", "y"}));
}

}  // TEST_SUITE
