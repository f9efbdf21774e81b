// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "idea_eval/corpus.hpp"

namespace idea_eval {

/// Hidden states kept for one manuscript: L transformer-block outputs, each
/// holding v selected token vectors of width m. Layout is [layer][vector][dim].
struct RepTensor {
  std::string manuscript_id;
  std::string model_name;
  std::uint32_t num_layers = 0;
  std::uint32_t hidden_dim = 0;
  std::uint32_t num_vectors = 0;
  std::vector<std::string> vector_labels;
  std::vector<float> data;

  /// Throws InvalidTensor if dimensions, labels, or data length disagree.
  void validate() const;

  bool operator==(const RepTensor&) const = default;
};

using RepStore = std::map<std::string, RepTensor, std::less<>>;

/// Negative block index: -1 is the final block, -L the first.
class LayerIndex {
 public:
  explicit LayerIndex(int index);
  int value() const noexcept { return index_; }
  /// 0-based block position for a model with `num_layers` blocks.
  std::size_t block(std::uint32_t num_layers) const;

  auto operator<=>(const LayerIndex&) const = default;

 private:
  int index_;
};

/// Non-owning v x m view of one layer.
struct LayerSlice {
  std::span<const float> values;
  std::uint32_t num_vectors = 0;
  std::uint32_t hidden_dim = 0;

  std::span<const float> vector(std::size_t k) const {
    return values.subspan(k * hidden_dim, hidden_dim);
  }
};

enum class TokenKind { Last, MiddlePlusLast, SectionLast, SegmentLast, FirstCls };

struct TokenStrategy {
  TokenKind kind = TokenKind::Last;
  std::uint32_t segment_len = 512;

  bool operator==(const TokenStrategy&) const = default;
};

/// Accepts "last", "middle_plus_last", "section_last", "segment_last",
/// "segment_last:<len>", "first_cls".
TokenStrategy parse_token_strategy(std::string_view text);
std::string to_string(const TokenStrategy& strategy);

using FeatureVector = std::vector<double>;

inline constexpr char kIdrpMagic[4] = {'I', 'D', 'R', 'P'};
inline constexpr std::uint16_t kIdrpVersion = 1;

std::vector<std::uint8_t> encode_reps(const RepTensor& tensor);
RepTensor decode_reps(std::span<const std::uint8_t> bytes);
void write_reps(const RepTensor& tensor, const std::filesystem::path& path);
RepTensor read_reps(const std::filesystem::path& path);

/// Reads `<id>.idrp` from `dir` for every listed id; ids without a file are
/// reported through `missing` rather than thrown.
RepStore load_reps_dir(const std::filesystem::path& dir, std::span<const std::string> ids,
                       std::vector<std::string>* missing = nullptr);

LayerSlice select_layer(const RepTensor& tensor, LayerIndex layer);

FeatureVector select_tokens(const LayerSlice& slice, std::span<const std::string> labels,
                            const TokenStrategy& strategy);

/// Labels a strategy needs, as reported in missing-label diagnostics.
std::string required_label(const TokenStrategy& strategy);
bool supports_strategy(std::span<const std::string> labels, const TokenStrategy& strategy);

struct SynthOptions {
  std::size_t n = 100;
  std::uint32_t num_layers = 4;
  std::uint32_t hidden_dim = 16;
  int informative_layer = -2;
  double noise_std = 0.1;
  std::uint64_t seed = 0;
  std::string criterion = "overall_quality";
};

struct SynthCorpus {
  Corpus corpus;
  RepStore reps;
  std::vector<double> weights;
  /// Noisy clipped score before review sampling, aligned with corpus order.
  std::vector<double> true_scores;
  /// w·x on the informative layer, aligned with corpus order.
  std::vector<double> projections;
};

/// Planted-signal corpus: one "last" vector per layer, only the informative
/// layer drives the score 5 + 2·tanh(w·x) + noise.
SynthCorpus synth_corpus(const SynthOptions& options);

}  // namespace idea_eval
