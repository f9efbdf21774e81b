// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <array>
#include <cmath>
#include <random>

#include <fmt/format.h>

#include "idea_eval/error.hpp"
#include "idea_eval/reptensor.hpp"

namespace idea_eval {

namespace {

constexpr std::size_t kReviewsPerPaper = 3;
constexpr double kReviewNoiseStd = 0.25;
constexpr std::array<const char*, 4> kDomains = {"Theory", "Applications",
                                                 "Optimization", nullptr};

}  // namespace

SynthCorpus synth_corpus(const SynthOptions& options) {
  if (options.n < 4) throw Error(ErrorKind::InvalidConfig, "synth_corpus needs n >= 4");
  if (!(options.noise_std >= 0.0)) throw Error(ErrorKind::InvalidConfig, "noise_std must be >= 0");
  if (options.num_layers == 0 || options.hidden_dim == 0) {
    throw Error(ErrorKind::InvalidConfig, "synth_corpus needs L >= 1 and m >= 1");
  }
  const auto informative = LayerIndex(options.informative_layer).block(options.num_layers);

  std::mt19937_64 rng(options.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  SynthCorpus out;
  const double w_scale = 1.0 / std::sqrt(static_cast<double>(options.hidden_dim));
  out.weights.resize(options.hidden_dim);
  for (auto& w : out.weights) w = normal(rng) * w_scale;

  const auto width = fmt::format("{}", options.n - 1).size();
  std::vector<Manuscript> manuscripts;
  manuscripts.reserve(options.n);
  for (std::size_t i = 0; i < options.n; ++i) {
    RepTensor t;
    t.manuscript_id = fmt::format("p{:0{}}", i, width);
    t.model_name = "synthetic";
    t.num_layers = options.num_layers;
    t.hidden_dim = options.hidden_dim;
    t.num_vectors = 1;
    t.vector_labels = {"last"};
    t.data.resize(std::size_t{options.num_layers} * options.hidden_dim);
    for (auto& v : t.data) v = static_cast<float>(normal(rng));

    // Score from the stored float32 values so the planted signal is exactly
    // what a reader of the file sees.
    double projection = 0.0;
    for (std::uint32_t d = 0; d < options.hidden_dim; ++d) {
      projection += out.weights[d] * static_cast<double>(t.data[informative * options.hidden_dim + d]);
    }
    const double eps = normal(rng) * options.noise_std;
    const double score = std::clamp(5.0 + 2.0 * std::tanh(projection) + eps, 1.0, 10.0);

    std::vector<double> reviews;
    for (std::size_t r = 0; r < kReviewsPerPaper; ++r) {
      const double raw = score + normal(rng) * kReviewNoiseStd;
      reviews.push_back(std::clamp(std::round(raw * 2.0) / 2.0, 1.0, 10.0));
    }

    Manuscript m;
    m.id = t.manuscript_id;
    m.title = fmt::format("Synthetic manuscript {}", i);
    m.abstract = fmt::format("Planted-signal abstract for manuscript {}.", i);
    m.reviews.emplace(options.criterion, std::move(reviews));
    if (const char* domain = kDomains[i % kDomains.size()]) m.domain = domain;

    out.projections.push_back(projection);
    out.true_scores.push_back(score);
    out.reps.emplace(m.id, std::move(t));
    manuscripts.push_back(std::move(m));
  }
  out.corpus = Corpus(std::move(manuscripts));
  return out;
}

}  // namespace idea_eval
