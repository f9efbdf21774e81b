// SPDX-License-Identifier: Apache-2.0
// idea-eval: command-line front end for the idea-evaluation pipeline.
//
// Exit codes: 0 success, 1 diagnostics or validation failure, 2 runtime error.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "idea_eval/corpus.hpp"
#include "idea_eval/error.hpp"
#include "idea_eval/evaluator.hpp"
#include "idea_eval/metrics.hpp"
#include "idea_eval/partition.hpp"
#include "idea_eval/reptensor.hpp"
#include "idea_eval/runner.hpp"

namespace {

using namespace idea_eval;

constexpr int kExitOk = 0;
constexpr int kExitDiagnostics = 1;
constexpr int kExitRuntime = 2;

struct CommonFlags {
  std::string config;
  std::string manifest;
  std::string reps_dir;
  std::string tei_dir;
  std::string criterion;
  std::vector<double> ratios;
  std::string layers;
  std::string strategy;
  std::vector<std::uint64_t> seeds;
  std::size_t jobs = 0;
  std::string out;
  bool clamp = false;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "JSON experiment config");
  cmd->add_option("--manifest", f.manifest, "JSON-lines manuscript manifest");
  cmd->add_option("--reps-dir", f.reps_dir, "directory of <id>.idrp files");
  cmd->add_option("--tei-dir", f.tei_dir, "directory of <id>.tei.xml files");
  cmd->add_option("--criterion", f.criterion, "review criterion, e.g. overall_quality");
  cmd->add_option("--train-ratio", f.ratios, "training ratio(s) in (0,1)")->delimiter(',');
  cmd->add_option("--layers", f.layers, "'all' or comma-separated negative indices");
  cmd->add_option("--strategy", f.strategy,
                  "last | middle_plus_last | section_last | segment_last[:len] | first_cls");
  cmd->add_option("--seeds", f.seeds, "comma-separated training seeds")->delimiter(',');
  cmd->add_option("--jobs", f.jobs, "parallel grid cells");
  cmd->add_option("--out", f.out, "output file or directory");
  cmd->add_flag("--clamp", f.clamp, "clamp predictions to [1, 10]");
}

// Config file first, then explicit flags on top.
ExperimentConfig build_config(const CommonFlags& f) {
  ExperimentConfig c = f.config.empty() ? ExperimentConfig{} : load_config(f.config);
  if (!f.manifest.empty()) c.manifest = f.manifest;
  if (!f.reps_dir.empty()) c.reps_dir = f.reps_dir;
  if (!f.tei_dir.empty()) c.tei_dir = f.tei_dir;
  if (!f.criterion.empty()) c.criterion = f.criterion;
  if (!f.ratios.empty()) c.ratios = f.ratios;
  if (!f.layers.empty()) c.layers = LayerSelection::parse(f.layers);
  if (!f.strategy.empty()) c.strategy = parse_token_strategy(f.strategy);
  if (!f.seeds.empty()) c.seeds = f.seeds;
  if (f.jobs != 0) c.jobs = f.jobs;
  if (!f.out.empty()) c.output_dir = f.out;
  if (f.clamp) c.clamp = true;
  return c;
}

Corpus load_corpus(const ExperimentConfig& c) {
  if (c.manifest.empty()) throw Error(ErrorKind::InvalidConfig, "no manifest given (--manifest or config)");
  auto corpus = load_manifest(c.manifest);
  if (c.tei_dir) corpus = attach_tei_sections(corpus, *c.tei_dir);
  return corpus;
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, fmt::format("cannot write '{}'", path));
  out << text;
}

int print_diagnostics(const std::vector<std::string>& diagnostics) {
  for (const auto& d : diagnostics) std::cout << "diagnostic: " << d << '\n';
  if (diagnostics.empty()) {
    std::cout << "ok\n";
    return kExitOk;
  }
  return kExitDiagnostics;
}

int cmd_validate(const CommonFlags& f) { return print_diagnostics(validate_setup(build_config(f))); }

int cmd_verify(const CommonFlags& f) {
  const auto c = build_config(f);
  return print_diagnostics(verify_reps(c.reps_dir, load_corpus(c)));
}

int cmd_split(const CommonFlags& f) {
  const auto c = build_config(f);
  if (c.ratios.size() != 1) throw Error(ErrorKind::InvalidConfig, "split takes exactly one --train-ratio");
  const auto corpus = load_corpus(c);
  const auto s = consistency_split(corpus, c.criterion, c.ratios.front());
  write_text(f.out, split_to_json(s));
  std::cerr << fmt::format("split: {} train, {} test\n", s.train_ids.size(), s.test_ids.size());
  return kExitOk;
}

int cmd_train(const CommonFlags& f) {
  auto c = build_config(f);
  const auto corpus = load_corpus(c);
  const auto s = consistency_split(corpus, c.criterion, c.ratios.front());
  std::vector<std::string> ids = s.train_ids;
  ids.insert(ids.end(), s.test_ids.begin(), s.test_ids.end());
  const auto reps = load_reps_dir(c.reps_dir, ids);
  const auto layers = c.layers.resolve(reps.begin()->second.num_layers);
  const LayerIndex layer(c.layers.all ? -1 : layers.front());

  const auto features = [&](const std::vector<std::string>& which) {
    std::vector<FeatureVector> out;
    for (const auto& id : which) {
      const auto& t = reps.at(id);
      out.push_back(select_tokens(select_layer(t, layer), t.vector_labels, c.strategy));
    }
    return out;
  };
  const auto labels = [&](const std::vector<std::string>& which) {
    std::vector<double> out;
    for (const auto& id : which) out.push_back(mean_label(corpus.at(id), c.criterion));
    return out;
  };
  auto cfg = c.evaluator;
  cfg.seed = c.seeds.front();
  const auto fit = train(features(s.train_ids), labels(s.train_ids), cfg);

  std::vector<double> preds;
  for (const auto& x : features(s.test_ids)) preds.push_back(predict(fit.evaluator, x, c.clamp));
  const auto test_y = labels(s.test_ids);
  const auto corr = test_y.size() >= 2 ? try_spearman(preds, test_y) : std::nullopt;
  std::cout << fmt::format("layer {} seed {} selected_epoch {} test_rho {} test_pvalue {}\n", layer.value(),
                           cfg.seed, fit.history.selected_epoch,
                           format_number(corr ? std::optional(corr->rho) : std::nullopt),
                           format_number(corr ? std::optional(corr->pvalue) : std::nullopt));
  if (!f.out.empty()) {
    save_evaluator({fit.evaluator, cfg, fit.history.selected_epoch}, f.out);
    std::cerr << "wrote " << f.out << '\n';
  }
  return kExitOk;
}

int cmd_sweep(const CommonFlags& f) {
  const auto c = build_config(f);
  const auto diagnostics = validate_setup(c);
  if (!diagnostics.empty()) return print_diagnostics(diagnostics);
  const auto report = run_experiment(c);
  for (const auto& path : emit_report(report, c.output_dir)) std::cerr << "wrote " << path.string() << '\n';
  for (const auto& s : report.summary) {
    if (s.best) {
      std::cout << fmt::format("ratio {} best layer {} mean rho {}\n", format_number(s.ratio), s.layer,
                               format_number(s.mean_rho));
    }
  }
  return kExitOk;
}

int cmd_report(const CommonFlags& f, std::size_t trials, std::uint64_t seed) {
  const auto c = build_config(f);
  const auto corpus = load_corpus(c);
  std::ostringstream out;
  out << "criterion,papers,mean,std,min,max,human_baseline_rho\n";
  const auto criteria = f.criterion.empty() ? corpus.criteria() : std::vector<std::string>{c.criterion};
  for (const auto& criterion : criteria) {
    const auto stats = review_stats(corpus, criterion);
    std::optional<double> baseline;
    try {
      baseline = human_baseline(corpus, criterion, trials, seed).mean_rho;
    } catch (const Error&) {
    }
    out << fmt::format("{},{},{},{},{},{},{}\n", criterion, stats.count, format_number(stats.mean),
                       format_number(stats.std), format_number(stats.min), format_number(stats.max),
                       format_number(baseline));
  }
  write_text(f.out, out.str());
  return kExitOk;
}

int cmd_synth(const CommonFlags& f, const SynthOptions& options) {
  if (f.out.empty()) throw Error(ErrorKind::InvalidConfig, "synth needs --out DIR");
  const std::filesystem::path dir = f.out;
  std::filesystem::create_directories(dir / "reps");
  const auto synth = synth_corpus(options);
  save_manifest(synth.corpus, dir / "manifest.jsonl");
  for (const auto& [id, tensor] : synth.reps) write_reps(tensor, dir / "reps" / (id + ".idrp"));

  ExperimentConfig c;
  c.manifest = "manifest.jsonl";
  c.reps_dir = "reps";
  c.criterion = options.criterion;
  c.output_dir = "report";
  write_text((dir / "config.json").string(), config_to_json(c));
  std::cerr << fmt::format("wrote {} manuscripts to {}\n", synth.corpus.size(), dir.string());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Quantitative idea evaluation from LLM hidden-state representations"};
  app.require_subcommand(1);

  CommonFlags flags;
  auto* validate = app.add_subcommand("validate", "check manifest/representation consistency");
  auto* verify = app.add_subcommand("verify", "re-read every representation file and check headers");
  auto* split_cmd = app.add_subcommand("split", "emit the consistency-sorted train/test split");
  auto* train_cmd = app.add_subcommand("train", "train one evaluator and save a snapshot");
  auto* sweep = app.add_subcommand("sweep", "run the ratio x layer x seed grid and emit reports");
  auto* report = app.add_subcommand("report", "corpus review statistics and human baseline");
  auto* synth = app.add_subcommand("synth", "generate a planted-signal corpus");
  for (auto* cmd : {validate, verify, split_cmd, train_cmd, sweep, report, synth}) add_common(cmd, flags);

  std::size_t trials = 1000;
  std::uint64_t baseline_seed = 0;
  report->add_option("--trials", trials, "human-baseline draws");
  report->add_option("--baseline-seed", baseline_seed, "human-baseline RNG seed");

  SynthOptions synth_options;
  int informative = synth_options.informative_layer;
  synth->add_option("--n", synth_options.n, "manuscripts");
  synth->add_option("--num-layers", synth_options.num_layers, "blocks per tensor");
  synth->add_option("--dim", synth_options.hidden_dim, "hidden width m");
  synth->add_option("--informative-layer", informative, "negative index of the planted layer");
  synth->add_option("--noise", synth_options.noise_std, "score noise std");
  synth->add_option("--synth-seed", synth_options.seed, "generator seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitRuntime;
  }

  try {
    if (*validate) return cmd_validate(flags);
    if (*verify) return cmd_verify(flags);
    if (*split_cmd) return cmd_split(flags);
    if (*train_cmd) return cmd_train(flags);
    if (*sweep) return cmd_sweep(flags);
    if (*report) return cmd_report(flags, trials, baseline_seed);
    if (*synth) {
      synth_options.informative_layer = informative;
      if (!flags.criterion.empty()) synth_options.criterion = flags.criterion;
      return cmd_synth(flags, synth_options);
    }
  } catch (const Error& e) {
    std::cerr << "error (" << to_string(e.kind()) << "): " << e.what() << '\n';
    return kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitRuntime;
}
