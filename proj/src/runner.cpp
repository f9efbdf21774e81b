// SPDX-License-Identifier: Apache-2.0
#include "idea_eval/runner.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <iostream>
#include <map>
#include <mutex>
#include <set>
#include <thread>

#include <fmt/format.h>

#include "idea_eval/error.hpp"
#include "idea_eval/stats.hpp"

namespace idea_eval {

std::optional<int> Report::best_layer(double ratio) const {
  for (const auto& s : summary) {
    if (s.ratio == ratio && s.best) return s.layer;
  }
  return std::nullopt;
}

namespace {

std::vector<std::string> eligible_ids(const Corpus& corpus, std::string_view criterion) {
  std::vector<std::string> ids;
  for (const auto& m : corpus.manuscripts()) {
    if (m.has_criterion(criterion)) ids.push_back(m.id);
  }
  return ids;
}

std::string join_ids(const std::vector<std::string>& ids, std::size_t limit = 20) {
  std::string out;
  for (std::size_t i = 0; i < ids.size() && i < limit; ++i) out += (i ? ", " : "") + ids[i];
  if (ids.size() > limit) out += fmt::format(", ... ({} total)", ids.size());
  return out;
}

void check_config_values(const ExperimentConfig& c) {
  if (c.ratios.empty()) throw Error(ErrorKind::InvalidConfig, "no training ratios configured");
  if (c.seeds.empty()) throw Error(ErrorKind::InvalidConfig, "no seeds configured");
  if (!c.layers.all && c.layers.indices.empty()) throw Error(ErrorKind::InvalidConfig, "no layers configured");
  for (double r : c.ratios) {
    if (!(r > 0.0 && r < 1.0)) {
      throw Error(ErrorKind::RatioOutOfRange, fmt::format("train ratio {} outside (0, 1)", r));
    }
  }
  if (!(c.histogram_bin_width > 0.0)) throw Error(ErrorKind::InvalidConfig, "histogram_bin_width must be > 0");
  c.evaluator.validate();
}

// Features for every eligible id at one layer, in `ids` order.
using FeatureTable = std::map<std::string, FeatureVector, std::less<>>;

FeatureTable assemble_features(const std::vector<std::string>& ids, const RepStore& reps, int layer,
                               const TokenStrategy& strategy) {
  FeatureTable table;
  std::size_t dim = 0;
  std::string first_id;
  for (const auto& id : ids) {
    const auto& t = reps.find(id)->second;
    auto f = select_tokens(select_layer(t, LayerIndex(layer)), t.vector_labels, strategy);
    if (first_id.empty()) {
      dim = f.size();
      first_id = id;
    } else if (f.size() != dim) {
      throw Error(ErrorKind::DimMismatch,
                  fmt::format("feature dims disagree under {}: '{}' has {}, '{}' has {}",
                              to_string(strategy), first_id, dim, id, f.size()));
    }
    table.emplace(id, std::move(f));
  }
  return table;
}

std::pair<std::uint32_t, std::uint32_t> common_shape(const std::vector<std::string>& ids,
                                                     const RepStore& reps) {
  const auto& first = reps.find(ids.front())->second;
  for (const auto& id : ids) {
    const auto& t = reps.find(id)->second;
    if (t.num_layers != first.num_layers || t.hidden_dim != first.hidden_dim) {
      throw Error(ErrorKind::DimMismatch,
                  fmt::format("representation shapes disagree: '{}' is L={} m={}, '{}' is L={} m={}",
                              ids.front(), first.num_layers, first.hidden_dim, id, t.num_layers,
                              t.hidden_dim));
    }
  }
  return {first.num_layers, first.hidden_dim};
}

struct CellJob {
  std::size_t ratio_index;
  int layer;
  std::uint64_t seed;
};

}  // namespace

Report run_experiment(const ExperimentConfig& config, const Corpus& corpus, const RepStore& reps) {
  check_config_values(config);
  if (!corpus.has_criterion(config.criterion)) {
    throw Error(ErrorKind::UnknownCriterion,
                fmt::format("criterion '{}' not present in the corpus", config.criterion));
  }
  const auto ids = eligible_ids(corpus, config.criterion);
  if (ids.size() < corpus.size()) {
    std::cerr << fmt::format("note: {} of {} manuscripts lack criterion '{}' and are excluded\n",
                             corpus.size() - ids.size(), corpus.size(), config.criterion);
  }
  std::vector<std::string> missing;
  for (const auto& id : ids) {
    if (!reps.contains(id)) missing.push_back(id);
  }
  if (!missing.empty()) {
    throw Error(ErrorKind::MissingReps,
                fmt::format("missing representations for: {}", join_ids(missing)));
  }
  const auto num_layers = common_shape(ids, reps).first;
  const auto layers = config.layers.resolve(num_layers);

  // Features are shared read-only across all cells.
  std::map<int, FeatureTable> features;
  for (int layer : layers) {
    if (!features.contains(layer)) {
      features.emplace(layer, assemble_features(ids, reps, layer, config.strategy));
    }
  }

  Report report;
  report.criterion = config.criterion;
  report.strategy = config.strategy;
  const auto ordered = sort_by_consistency(corpus, config.criterion);
  for (double ratio : config.ratios) report.splits.push_back(split(ordered, ratio, config.criterion));

  std::map<std::string, double> labels;
  for (const auto& id : ids) labels.emplace(id, mean_label(corpus.at(id), config.criterion));

  std::vector<CellJob> jobs;
  for (std::size_t r = 0; r < config.ratios.size(); ++r) {
    for (int layer : layers) {
      for (auto seed : config.seeds) jobs.push_back({r, layer, seed});
    }
  }
  report.grid.resize(jobs.size());

  const auto run_cell = [&](std::size_t index) {
    const auto& job = jobs[index];
    const auto& s = report.splits[job.ratio_index];
    const auto& table = features.at(job.layer);
    std::vector<FeatureVector> train_x;
    std::vector<double> train_y;
    for (const auto& id : s.train_ids) {
      train_x.push_back(table.find(id)->second);
      train_y.push_back(labels.at(id));
    }
    auto cfg = config.evaluator;
    cfg.seed = job.seed;
    const auto fit = train(train_x, train_y, cfg);

    CellResult cell;
    cell.ratio = config.ratios[job.ratio_index];
    cell.layer = job.layer;
    cell.seed = job.seed;
    cell.selected_epoch = fit.history.selected_epoch;
    std::vector<double> test_y;
    for (const auto& id : s.test_ids) {
      cell.test_predictions.push_back(predict(fit.evaluator, table.find(id)->second, config.clamp));
      test_y.push_back(labels.at(id));
    }
    if (s.test_ids.size() >= 2) {
      if (auto corr = try_spearman(cell.test_predictions, test_y)) {
        cell.rho = corr->rho;
        cell.pvalue = corr->pvalue;
      }
    }
    report.grid[index] = std::move(cell);
  };

  // Cells write only their own slot, so results land in grid order no matter
  // which worker finishes first.
  const std::size_t workers = std::clamp<std::size_t>(config.jobs, 1, std::max<std::size_t>(jobs.size(), 1));
  if (workers == 1) {
    for (std::size_t i = 0; i < jobs.size(); ++i) run_cell(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < jobs.size(); i = next++) {
          try {
            run_cell(i);
          } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
          }
        }
      });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
  }

  // Per-cell aggregation over seeds.
  const std::size_t n_seeds = config.seeds.size();
  for (std::size_t r = 0; r < config.ratios.size(); ++r) {
    const std::size_t first_summary = report.summary.size();
    for (std::size_t li = 0; li < layers.size(); ++li) {
      CellSummary cs;
      cs.ratio = config.ratios[r];
      cs.layer = layers[li];
      cs.seeds = n_seeds;
      double rho_sum = 0.0, p_sum = 0.0;
      for (std::size_t k = 0; k < n_seeds; ++k) {
        const auto& cell = report.grid[(r * layers.size() + li) * n_seeds + k];
        if (!cell.rho) continue;
        rho_sum += *cell.rho;
        p_sum += cell.pvalue;
        ++cs.seeds_defined;
      }
      if (cs.seeds_defined > 0) {
        cs.mean_rho = rho_sum / static_cast<double>(cs.seeds_defined);
        cs.mean_pvalue = p_sum / static_cast<double>(cs.seeds_defined);
      }
      report.summary.push_back(cs);
    }
    // Best layer: highest mean rho, ties to the deeper (more negative) index.
    CellSummary* best = nullptr;
    for (std::size_t i = first_summary; i < report.summary.size(); ++i) {
      auto& cs = report.summary[i];
      if (!cs.mean_rho) continue;
      if (best == nullptr || *cs.mean_rho > *best->mean_rho ||
          (*cs.mean_rho == *best->mean_rho && cs.layer < best->layer)) {
        best = &cs;
      }
    }
    if (best == nullptr) continue;
    best->best = true;

    const auto li = static_cast<std::size_t>(
        std::find(layers.begin(), layers.end(), best->layer) - layers.begin());
    const auto& s = report.splits[r];
    MetricsBundle bundle;
    bundle.ratio = config.ratios[r];
    bundle.layer = best->layer;
    bundle.test_ids = s.test_ids;
    std::vector<double> per_seed(n_seeds);
    for (std::size_t i = 0; i < s.test_ids.size(); ++i) {
      for (std::size_t k = 0; k < n_seeds; ++k) {
        per_seed[k] = report.grid[(r * layers.size() + li) * n_seeds + k].test_predictions[i];
      }
      bundle.predictions.push_back(mean_of(per_seed));
    }
    std::vector<std::optional<std::string>> domains;
    std::map<std::string, double> prediction_map;
    for (std::size_t i = 0; i < s.test_ids.size(); ++i) {
      bundle.labels.push_back(labels.at(s.test_ids[i]));
      domains.push_back(corpus.at(s.test_ids[i]).domain);
      prediction_map.emplace(s.test_ids[i], bundle.predictions[i]);
    }
    bundle.bins = abs_error_bins(bundle.predictions, bundle.labels);
    bundle.within_two = fraction_within(bundle.predictions, bundle.labels, 2.0);
    bundle.human_histogram = score_histogram(bundle.labels, config.histogram_bin_width);
    bundle.predicted_histogram = score_histogram(bundle.predictions, config.histogram_bin_width);
    bundle.domains = domain_stats(bundle.predictions, bundle.labels, domains);
    if (prediction_map.size() >= 2) {
      try {
        bundle.closest_human = closest_human_corr(prediction_map, corpus, config.criterion);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::ConstantInput) throw;
      }
    }
    report.bundles.push_back(std::move(bundle));
  }
  return report;
}

Report run_experiment(const ExperimentConfig& config) {
  check_config_values(config);
  auto corpus = load_manifest(config.manifest);
  if (config.tei_dir) corpus = attach_tei_sections(corpus, *config.tei_dir);
  const auto ids = eligible_ids(corpus, config.criterion);
  std::vector<std::string> missing;
  const auto reps = load_reps_dir(config.reps_dir, ids, &missing);
  if (!missing.empty()) {
    throw Error(ErrorKind::MissingReps,
                fmt::format("missing representation files for: {}", join_ids(missing)));
  }
  return run_experiment(config, corpus, reps);
}

std::vector<std::string> validate_setup(const ExperimentConfig& config, const Corpus& corpus,
                                        const RepStore& reps) {
  std::vector<std::string> diagnostics;
  try {
    check_config_values(config);
  } catch (const Error& e) {
    diagnostics.push_back(fmt::format("config: {}", e.what()));
  }
  if (!corpus.has_criterion(config.criterion)) {
    diagnostics.push_back(fmt::format("criterion '{}' is not present in any manuscript", config.criterion));
    return diagnostics;
  }
  const auto ids = eligible_ids(corpus, config.criterion);
  std::vector<std::string> present;
  for (const auto& id : ids) {
    if (!reps.contains(id)) {
      diagnostics.push_back(fmt::format("missing representation file for manuscript '{}'", id));
    } else {
      present.push_back(id);
    }
  }
  if (present.empty()) return diagnostics;

  const auto& ref = reps.find(present.front())->second;
  for (const auto& id : present) {
    const auto& t = reps.find(id)->second;
    if (t.num_layers != ref.num_layers || t.hidden_dim != ref.hidden_dim) {
      diagnostics.push_back(fmt::format("'{}' has shape L={} m={} but '{}' has L={} m={}", id,
                                        t.num_layers, t.hidden_dim, present.front(), ref.num_layers,
                                        ref.hidden_dim));
    }
    if (!supports_strategy(t.vector_labels, config.strategy)) {
      diagnostics.push_back(fmt::format("strategy {} needs label '{}' missing from '{}'",
                                        to_string(config.strategy), required_label(config.strategy), id));
    }
  }
  if (!config.layers.all) {
    for (int k : config.layers.indices) {
      if (-static_cast<long long>(k) > static_cast<long long>(ref.num_layers)) {
        diagnostics.push_back(fmt::format("layer {} out of range for {}-block representations", k,
                                          ref.num_layers));
      }
    }
  }
  if (diagnostics.empty()) {
    // Composite strategies need identical vector counts corpus-wide.
    try {
      assemble_features(present, reps, -1, config.strategy);
    } catch (const Error& e) {
      diagnostics.push_back(e.what());
    }
    for (double r : config.ratios) {
      try {
        split(std::vector<std::string>(ids.size(), ""), r);
      } catch (const Error& e) {
        diagnostics.push_back(fmt::format("ratio {}: {}", r, e.what()));
      }
    }
  }
  return diagnostics;
}

std::vector<std::string> validate_setup(const ExperimentConfig& config) {
  std::vector<std::string> diagnostics;
  if (!std::filesystem::exists(config.manifest)) {
    diagnostics.push_back(fmt::format("manifest '{}' does not exist", config.manifest.string()));
  }
  if (!std::filesystem::is_directory(config.reps_dir)) {
    diagnostics.push_back(fmt::format("reps dir '{}' is not a directory", config.reps_dir.string()));
  }
  if (config.tei_dir && !std::filesystem::is_directory(*config.tei_dir)) {
    diagnostics.push_back(fmt::format("TEI dir '{}' is not a directory", config.tei_dir->string()));
  }
  if (!diagnostics.empty()) return diagnostics;

  Corpus corpus;
  try {
    corpus = load_manifest(config.manifest);
    if (config.tei_dir) corpus = attach_tei_sections(corpus, *config.tei_dir);
  } catch (const Error& e) {
    diagnostics.push_back(fmt::format("manifest: {}", e.what()));
    return diagnostics;
  }
  RepStore reps;
  for (const auto& m : corpus.manuscripts()) {
    const auto path = config.reps_dir / (m.id + ".idrp");
    if (!std::filesystem::exists(path)) continue;
    try {
      reps.emplace(m.id, read_reps(path));
    } catch (const Error& e) {
      diagnostics.push_back(e.what());
    }
  }
  auto more = validate_setup(config, corpus, reps);
  diagnostics.insert(diagnostics.end(), more.begin(), more.end());
  return diagnostics;
}

std::vector<std::string> verify_reps(const std::filesystem::path& reps_dir, const Corpus& corpus) {
  std::vector<std::string> diagnostics;
  std::optional<std::pair<std::string, RepTensor>> ref;
  for (const auto& m : corpus.manuscripts()) {
    const auto path = reps_dir / (m.id + ".idrp");
    if (!std::filesystem::exists(path)) {
      diagnostics.push_back(fmt::format("{}: missing", path.string()));
      continue;
    }
    RepTensor t;
    try {
      t = read_reps(path);
    } catch (const Error& e) {
      diagnostics.push_back(fmt::format("{}: {} ({})", path.string(), e.what(), to_string(e.kind())));
      continue;
    }
    if (t.manuscript_id != m.id) {
      diagnostics.push_back(fmt::format("{}: header id '{}' does not match manifest id '{}'",
                                        path.string(), t.manuscript_id, m.id));
    }
    if (!ref) {
      ref.emplace(path.string(), std::move(t));
      continue;
    }
    const auto& [ref_path, r] = *ref;
    if (t.hidden_dim != r.hidden_dim) {
      diagnostics.push_back(fmt::format("{}: hidden dim {} differs from {} in {}", path.string(),
                                        t.hidden_dim, r.hidden_dim, ref_path));
    }
    if (t.num_layers != r.num_layers) {
      diagnostics.push_back(fmt::format("{}: {} layers differs from {} in {}", path.string(),
                                        t.num_layers, r.num_layers, ref_path));
    }
    if (t.model_name != r.model_name) {
      diagnostics.push_back(fmt::format("{}: model '{}' differs from '{}' in {}", path.string(),
                                        t.model_name, r.model_name, ref_path));
    }
    for (std::string_view label : {"last", "middle", "cls"}) {
      const bool has = std::find(t.vector_labels.begin(), t.vector_labels.end(), label) != t.vector_labels.end();
      const bool ref_has = std::find(r.vector_labels.begin(), r.vector_labels.end(), label) != r.vector_labels.end();
      if (has != ref_has) {
        diagnostics.push_back(fmt::format("{}: label '{}' {} but {} in {}", path.string(), label,
                                          has ? "present" : "absent", ref_has ? "present" : "absent",
                                          ref_path));
      }
    }
  }
  return diagnostics;
}

}  // namespace idea_eval
