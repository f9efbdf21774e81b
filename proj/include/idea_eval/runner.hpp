// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "idea_eval/corpus.hpp"
#include "idea_eval/evaluator.hpp"
#include "idea_eval/metrics.hpp"
#include "idea_eval/partition.hpp"
#include "idea_eval/reptensor.hpp"

namespace idea_eval {

struct LayerSelection {
  bool all = true;
  std::vector<int> indices;

  /// Concrete layer list for an L-block model; "all" expands to -L..-1.
  std::vector<int> resolve(std::uint32_t num_layers) const;
  static LayerSelection parse(std::string_view text);
  std::string to_string() const;
};

struct ExperimentConfig {
  std::filesystem::path manifest;
  std::filesystem::path reps_dir;
  std::optional<std::filesystem::path> tei_dir;
  std::string criterion = "overall_quality";
  std::vector<double> ratios = {0.3};
  LayerSelection layers;
  TokenStrategy strategy;
  std::vector<std::uint64_t> seeds = {0, 1, 2};
  EvaluatorConfig evaluator;
  std::filesystem::path output_dir = "report";
  bool clamp = false;
  std::size_t jobs = 1;
  double histogram_bin_width = 1.0;
};

/// JSON config; every key optional, see README for the schema.
ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::filesystem::path& path);
std::string config_to_json(const ExperimentConfig& config);

struct CellResult {
  double ratio = 0.0;
  int layer = -1;
  std::uint64_t seed = 0;
  std::optional<double> rho;  // nullopt when predictions are constant
  double pvalue = 1.0;
  std::size_t selected_epoch = 0;
  std::vector<double> test_predictions;
};

struct CellSummary {
  double ratio = 0.0;
  int layer = -1;
  std::optional<double> mean_rho;
  std::optional<double> mean_pvalue;
  std::size_t seeds = 0;
  std::size_t seeds_defined = 0;
  bool best = false;
};

/// Comparative metrics at one ratio's best layer, using per-paper predictions
/// averaged over seeds.
struct MetricsBundle {
  double ratio = 0.0;
  int layer = -1;
  std::vector<std::string> test_ids;
  std::vector<double> labels;
  std::vector<double> predictions;
  ErrorBins bins;
  double within_two = 0.0;
  Histogram human_histogram;
  Histogram predicted_histogram;
  std::vector<DomainRow> domains;
  std::optional<CorrResult> closest_human;
};

struct Report {
  std::string criterion;
  TokenStrategy strategy;
  std::vector<Split> splits;  // one per ratio
  std::vector<CellResult> grid;  // ratio-major, then layer, then seed
  std::vector<CellSummary> summary;  // ratio-major, then layer
  std::vector<MetricsBundle> bundles;  // ratios with a defined best layer

  std::optional<int> best_layer(double ratio) const;
};

/// Runs the full grid from files named in the config.
Report run_experiment(const ExperimentConfig& config);

/// Runs the grid over in-memory inputs.
Report run_experiment(const ExperimentConfig& config, const Corpus& corpus, const RepStore& reps);

/// Writes grid.csv, summary.csv, bins.csv, hist.csv, domains.csv, closest.csv
/// and layers_<ratio>.svg into `out_dir`; returns the written paths.
std::vector<std::filesystem::path> emit_report(const Report& report, const std::filesystem::path& out_dir);

/// Runnability problems, empty when the config can run.
std::vector<std::string> validate_setup(const ExperimentConfig& config);
std::vector<std::string> validate_setup(const ExperimentConfig& config, const Corpus& corpus,
                                        const RepStore& reps);

/// Re-reads every `<id>.idrp` for the manifest and checks headers, labels
/// and corpus-wide dims.
std::vector<std::string> verify_reps(const std::filesystem::path& reps_dir, const Corpus& corpus);

/// Fixed-point CSV number: 6 decimals, '.' separator, "NA" for nullopt/NaN.
std::string format_number(std::optional<double> value);

}  // namespace idea_eval
