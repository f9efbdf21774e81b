// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "idea_eval/reptensor.hpp"

namespace idea_eval {

/// Defaults reproduce the published evaluator setup.
struct EvaluatorConfig {
  std::size_t hidden_dim = 1024;
  double learning_rate = 0.001;
  std::size_t batch_size = 32;
  double dropout = 0.2;
  std::size_t epochs = 20;
  std::uint64_t seed = 0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;

  /// Throws InvalidConfig on out-of-range values.
  void validate() const;

  bool operator==(const EvaluatorConfig&) const = default;
};

/// One-hidden-layer ReLU regressor over standardized features:
///   score = w2 · relu(W1 · (x - mean) / std + b1) + b2
struct Evaluator {
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;
  std::vector<double> w1;  // hidden_dim x input_dim, row-major
  std::vector<double> b1;
  std::vector<double> w2;
  double b2 = 0.0;
  std::vector<double> feat_mean;
  std::vector<double> feat_std;

  bool operator==(const Evaluator&) const = default;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_mse = 0.0;
  double train_spearman = 0.0;  // NaN when undefined

  bool operator==(const EpochRecord&) const = default;
};

enum class SelectionMetric { TrainSpearman, TrainMse };

struct TrainHistory {
  double initial_mse = 0.0;
  std::vector<EpochRecord> epochs;
  std::size_t selected_epoch = 0;
  SelectionMetric selected_by = SelectionMetric::TrainSpearman;

  bool operator==(const TrainHistory&) const = default;
};

struct TrainResult {
  Evaluator evaluator;
  TrainHistory history;
};

struct Standardizer {
  std::vector<double> mean;
  std::vector<double> std;
};

inline constexpr double kStdFloor = 1e-6;

/// Per-dimension mean and population std; std floored at kStdFloor.
Standardizer fit_standardizer(std::span<const FeatureVector> features);

TrainResult train(std::span<const FeatureVector> features, std::span<const double> labels,
                  const EvaluatorConfig& config);

/// Deterministic forward pass (no dropout). With `clamp`, limits to [1, 10].
double predict(const Evaluator& evaluator, std::span<const double> feature, bool clamp = false);

struct GradCheckOptions {
  std::size_t input_dim = 8;
  std::size_t hidden_dim = 16;
  std::size_t samples = 4;
  /// Number of randomly probed parameters; 0 probes every parameter.
  std::size_t probes = 0;
  double dropout = 0.0;
  double step = 1e-5;
  double tolerance = 1e-6;
  std::uint64_t seed = 0;
};

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t probed = 0;
  /// Probes whose +-step perturbation flips a ReLU; excluded from the max.
  std::size_t skipped = 0;
  bool passed = false;
};

/// Compares backprop gradients of the MSE loss with central differences.
GradCheckResult grad_check(const GradCheckOptions& options);

struct EvaluatorSnapshot {
  Evaluator evaluator;
  EvaluatorConfig config;
  std::size_t selected_epoch = 0;

  bool operator==(const EvaluatorSnapshot&) const = default;
};

void save_evaluator(const EvaluatorSnapshot& snapshot, const std::filesystem::path& path);
EvaluatorSnapshot load_evaluator(const std::filesystem::path& path);

}  // namespace idea_eval
