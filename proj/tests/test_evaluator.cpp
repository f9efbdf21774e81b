// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <functional>
#include <random>

#include "idea_eval/error.hpp"
#include "idea_eval/evaluator.hpp"
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

struct Data {
  std::vector<FeatureVector> x;
  std::vector<double> y;
};

Data regression_data(std::size_t n, std::size_t dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Data d;
  for (std::size_t i = 0; i < n; ++i) {
    FeatureVector f(dim);
    for (auto& v : f) v = normal(rng);
    d.y.push_back(5.0 + f[0] - 0.5 * f[1] + 0.1 * normal(rng));
    d.x.push_back(std::move(f));
  }
  return d;
}

EvaluatorConfig small_config() {
  EvaluatorConfig c;
  c.hidden_dim = 32;
  c.epochs = 8;
  c.batch_size = 8;
  return c;
}

}  // namespace

TEST_SUITE("evaluator") {

TEST_CASE("standardizer") {
  const std::vector<FeatureVector> two{{0, 2}, {2, 2}};
  const auto s = fit_standardizer(two);
  CHECK(s.mean == std::vector<double>{1, 2});
  CHECK(s.std == std::vector<double>{1, kStdFloor});

  const std::vector<FeatureVector> one{{3, -1, 4}};
  CHECK(fit_standardizer(one).std == std::vector<double>(3, kStdFloor));

  const std::vector<FeatureVector> mixed{FeatureVector(4), FeatureVector(8)};
  CHECK(kind_of([&] { fit_standardizer(mixed); }) == ErrorKind::DimMismatch);
  CHECK(kind_of([] { fit_standardizer(std::vector<FeatureVector>{}); }) == ErrorKind::EmptyInput);
}

TEST_CASE("config validation") {
  EvaluatorConfig c;
  CHECK_NOTHROW(c.validate());
  CHECK(c.hidden_dim == 1024);
  CHECK(c.batch_size == 32);
  CHECK(c.epochs == 20);
  CHECK(c.learning_rate == 0.001);
  CHECK(c.dropout == 0.2);
  c.dropout = 1.0;
  CHECK(kind_of([&] { c.validate(); }) == ErrorKind::InvalidConfig);
  c = {};
  c.hidden_dim = 0;
  CHECK(kind_of([&] { c.validate(); }) == ErrorKind::InvalidConfig);
  c = {};
  c.learning_rate = 0;
  CHECK(kind_of([&] { c.validate(); }) == ErrorKind::InvalidConfig);
}

TEST_CASE("training is deterministic") {
  const auto d = regression_data(40, 6, 1);
  const auto config = small_config();
  const auto a = train(d.x, d.y, config);
  const auto b = train(d.x, d.y, config);
  CHECK(a.evaluator == b.evaluator);
  CHECK(a.history == b.history);
  CHECK(a.history.epochs.size() == config.epochs);
  CHECK(a.history.selected_epoch >= 1);
  CHECK(a.history.selected_epoch <= config.epochs);
  CHECK(a.history.selected_by == SelectionMetric::TrainSpearman);

  // Selected epoch has the best train Spearman, earliest on ties.
  double best = -2.0;
  std::size_t best_epoch = 0;
  for (const auto& e : a.history.epochs)
    if (e.train_spearman > best) {
      best = e.train_spearman;
      best_epoch = e.epoch;
    }
  CHECK(a.history.selected_epoch == best_epoch);

  auto other = config;
  other.seed = 1;
  CHECK_FALSE(train(d.x, d.y, other).evaluator == a.evaluator);
}

TEST_CASE("training errors") {
  const auto d = regression_data(4, 3, 2);
  const auto config = small_config();
  CHECK(kind_of([&] { train(std::span(d.x).first(1), std::span(d.y).first(1), config); }) == ErrorKind::EmptyInput);
  CHECK(kind_of([&] { train(d.x, std::span(d.y).first(3), config); }) == ErrorKind::LengthMismatch);
  auto bad = d.y;
  bad[0] = std::nan("");
  CHECK(kind_of([&] { train(d.x, bad, config); }) == ErrorKind::InvalidRecord);
  auto huge = config;
  huge.learning_rate = 1e200;
  auto big = d.y;
  for (auto& v : big) v *= 1e150;
  CHECK(kind_of([&] { train(d.x, big, huge); }) == ErrorKind::NanLoss);
}

TEST_CASE("constant labels fall back to minimum MSE") {
  auto d = regression_data(20, 4, 3);
  std::fill(d.y.begin(), d.y.end(), 6.0);
  auto config = small_config();
  config.epochs = 60;
  config.dropout = 0.0;
  const auto r = train(d.x, d.y, config);
  CHECK(r.history.selected_by == SelectionMetric::TrainMse);
  double min_mse = 1e300;
  std::size_t min_epoch = 0;
  for (const auto& e : r.history.epochs) {
    CHECK(std::isnan(e.train_spearman));
    if (e.train_mse < min_mse) {
      min_mse = e.train_mse;
      min_epoch = e.epoch;
    }
  }
  CHECK(r.history.selected_epoch == min_epoch);
  CHECK(min_mse < 1e-2 * r.history.initial_mse);
  CHECK(r.history.epochs.back().train_mse < r.history.epochs.front().train_mse);
}

TEST_CASE("predict") {
  Evaluator e;
  e.input_dim = 3;
  e.hidden_dim = 4;
  e.w1.assign(12, 0.0);
  e.b1.assign(4, 0.0);
  e.w2.assign(4, 0.0);
  e.b2 = 5.41;
  e.feat_mean.assign(3, 0.0);
  e.feat_std.assign(3, 1.0);
  std::mt19937_64 rng(4);
  std::normal_distribution<double> normal(0, 100);
  for (int i = 0; i < 50; ++i) {
    const FeatureVector x{normal(rng), normal(rng), normal(rng)};
    CHECK(predict(e, x) == 5.41);
  }
  CHECK(kind_of([&] { predict(e, FeatureVector(2)); }) == ErrorKind::DimMismatch);

  e.b2 = 12.5;
  CHECK(predict(e, FeatureVector(3)) == 12.5);
  CHECK(predict(e, FeatureVector(3), true) == 10.0);
  e.b2 = -3.0;
  CHECK(predict(e, FeatureVector(3), true) == 1.0);

  const auto d = regression_data(30, 5, 5);
  const auto trained = train(d.x, d.y, small_config()).evaluator;
  CHECK(predict(trained, d.x[0]) == predict(trained, d.x[0]));
}

TEST_CASE("gradient check") {
  const auto result = grad_check({});
  CHECK(result.passed);
  CHECK(result.max_relative_error < 1e-6);
  CHECK(result.probed + result.skipped == 8 * 16 + 16 + 16 + 1);
  CHECK(result.skipped <= 2);

  GradCheckOptions noisy;
  noisy.dropout = 0.5;
  const auto negative = grad_check(noisy);
  CHECK_FALSE(negative.passed);
  CHECK(negative.max_relative_error > noisy.tolerance);

  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    GradCheckOptions all;
    all.input_dim = 4;
    all.hidden_dim = 4;
    all.seed = seed;
    auto sampled = all;
    sampled.probes = 6;
    const auto a = grad_check(all);
    const auto s = grad_check(sampled);
    CHECK(a.probed + a.skipped == 4 * 4 + 4 + 4 + 1);
    CHECK(s.probed + s.skipped == 6);
    CHECK(a.passed == s.passed);
    CHECK(s.max_relative_error <= a.max_relative_error);
  }
}

TEST_CASE("selected snapshot improves on the initial training loss") {
  SynthOptions options;
  options.seed = 3;
  const auto synth = synth_corpus(options);
  const auto s = consistency_split(synth.corpus, options.criterion, 0.3);
  std::vector<FeatureVector> x;
  std::vector<double> y;
  for (const auto& id : s.train_ids) {
    const auto& t = synth.reps.at(id);
    x.push_back(select_tokens(select_layer(t, LayerIndex(-2)), t.vector_labels, TokenStrategy{}));
    y.push_back(mean_label(synth.corpus.at(id), options.criterion));
  }
  const auto r = train(x, y, EvaluatorConfig{});
  double mse = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) mse += std::pow(predict(r.evaluator, x[i]) - y[i], 2.0);
  mse /= static_cast<double>(x.size());
  CHECK(mse <= r.history.initial_mse);
}

TEST_CASE("power-of-two rescaling leaves training bit-identical") {
  const auto d = regression_data(24, 5, 6);
  auto scaled = d.x;
  const std::vector<double> factor{2.0, 0.25, 1024.0, 1.0 / 64.0, 8.0};
  for (auto& f : scaled)
    for (std::size_t j = 0; j < f.size(); ++j) f[j] *= factor[j];
  const auto config = small_config();
  const auto a = train(d.x, d.y, config);
  const auto b = train(scaled, d.y, config);
  CHECK(a.history == b.history);
  CHECK(a.evaluator.w1 == b.evaluator.w1);
  CHECK(a.evaluator.w2 == b.evaluator.w2);
  CHECK(a.evaluator.b2 == b.evaluator.b2);
  for (std::size_t i = 0; i < d.x.size(); ++i) CHECK(predict(a.evaluator, d.x[i]) == predict(b.evaluator, scaled[i]));
}

TEST_CASE("snapshot round trip") {
  const auto d = regression_data(30, 7, 8);
  const auto config = small_config();
  const auto r = train(d.x, d.y, config);
  const EvaluatorSnapshot snap{r.evaluator, config, r.history.selected_epoch};
  const auto path = std::filesystem::temp_directory_path() / "idea_eval_snapshot.bin";
  save_evaluator(snap, path);
  const auto back = load_evaluator(path);
  CHECK(back == snap);
  for (const auto& x : d.x) CHECK(predict(back.evaluator, x) == predict(snap.evaluator, x));
  std::filesystem::remove(path);
  CHECK(kind_of([] { load_evaluator("/nonexistent/snapshot.bin"); }) == ErrorKind::Io);
}

}  // TEST_SUITE
