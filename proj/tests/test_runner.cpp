// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <sstream>

#include "idea_eval/error.hpp"
#include "idea_eval/runner.hpp"

using namespace idea_eval;
namespace fs = std::filesystem;

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

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::size_t line_count(const std::string& text) { return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')); }

bool mentions(const std::vector<std::string>& diagnostics, std::string_view needle) {
  return std::any_of(diagnostics.begin(), diagnostics.end(),
                     [&](const std::string& d) { return d.find(needle) != std::string::npos; });
}

SynthCorpus small_synth(std::uint64_t seed = 0, std::size_t n = 40) {
  SynthOptions o;
  o.n = n;
  o.hidden_dim = 8;
  o.seed = seed;
  return synth_corpus(o);
}

ExperimentConfig fast_config() {
  ExperimentConfig c;
  c.evaluator.hidden_dim = 16;
  c.evaluator.epochs = 4;
  c.evaluator.batch_size = 8;
  return c;
}

fs::path fresh_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// Writes manifest + reps for a synthetic corpus and returns a config pointing at them.
ExperimentConfig on_disk(const SynthCorpus& synth, const fs::path& dir) {
  save_manifest(synth.corpus, dir / "manifest.jsonl");
  fs::create_directories(dir / "reps");
  for (const auto& [id, t] : synth.reps) write_reps(t, dir / "reps" / (id + ".idrp"));
  auto c = fast_config();
  c.manifest = dir / "manifest.jsonl";
  c.reps_dir = dir / "reps";
  c.output_dir = dir / "out";
  return c;
}

}  // namespace

TEST_SUITE("runner") {

TEST_CASE("layer selection parsing") {
  CHECK(LayerSelection::parse("all").all);
  const auto some = LayerSelection::parse("-1,-3");
  CHECK_FALSE(some.all);
  CHECK(some.indices == std::vector<int>{-1, -3});
  CHECK(LayerSelection::parse("all").resolve(3) == std::vector<int>{-3, -2, -1});
  CHECK(some.to_string() == "-1,-3");
  CHECK_THROWS_AS(LayerSelection::parse("2"), Error);
  CHECK_THROWS_AS(LayerSelection::parse(""), Error);
}

TEST_CASE("config parsing") {
  const auto c = parse_config(R"({"criterion":"correctness","ratios":[0.05,0.3],"layers":[-1,-2],
    "strategy":"segment_last:256","seeds":[4],"evaluator":{"hidden_dim":64,"epochs":3},"jobs":2,"clamp":true})");
  CHECK(c.criterion == "correctness");
  CHECK(c.ratios == std::vector<double>{0.05, 0.3});
  CHECK(c.layers.indices == std::vector<int>{-1, -2});
  CHECK(c.strategy == TokenStrategy{TokenKind::SegmentLast, 256});
  CHECK(c.seeds == std::vector<std::uint64_t>{4});
  CHECK(c.evaluator.hidden_dim == 64);
  CHECK(c.evaluator.epochs == 3);
  CHECK(c.evaluator.batch_size == 32);
  CHECK(c.jobs == 2);
  CHECK(c.clamp);

  const auto defaults = parse_config("{}");
  CHECK(defaults.seeds == std::vector<std::uint64_t>{0, 1, 2});
  CHECK(defaults.ratios == std::vector<double>{0.3});
  CHECK(defaults.layers.all);

  CHECK(kind_of([] { parse_config(R"({"ratio":0.3})"); }) == ErrorKind::InvalidConfig);
  CHECK(kind_of([] { parse_config(R"({"evaluator":{"hidden":3}})"); }) == ErrorKind::InvalidConfig);
  CHECK(kind_of([] { parse_config(R"({"seeds":[]})"); }) == ErrorKind::InvalidConfig);
  CHECK(kind_of([] { parse_config("{oops"); }) == ErrorKind::InvalidConfig);

  const auto again = parse_config(config_to_json(c));
  CHECK(config_to_json(again) == config_to_json(c));
}

TEST_CASE("number formatting") {
  CHECK(format_number(0.5) == "0.500000");
  CHECK(format_number(-0.1234567) == "-0.123457");
  CHECK(format_number(std::nullopt) == "NA");
  CHECK(format_number(std::nan("")) == "NA");
}

TEST_CASE("grid shape and aggregation") {
  const auto synth = small_synth();
  auto c = fast_config();
  c.ratios = {0.3, 0.5};
  c.layers = LayerSelection::parse("-1,-2");
  const auto report = run_experiment(c, synth.corpus, synth.reps);
  REQUIRE(report.grid.size() == 2 * 2 * 3);
  REQUIRE(report.summary.size() == 4);
  CHECK(report.splits.size() == 2);
  CHECK(report.grid[0].ratio == 0.3);
  CHECK(report.grid[0].layer == -1);
  CHECK(report.grid[1].seed == 1);
  CHECK(report.grid[3].layer == -2);
  CHECK(report.grid[6].ratio == 0.5);

  for (std::size_t k = 0; k < report.summary.size(); ++k) {
    double sum = 0.0;
    for (std::size_t s = 0; s < 3; ++s) sum += *report.grid[k * 3 + s].rho;
    CHECK(*report.summary[k].mean_rho == doctest::Approx(sum / 3.0).epsilon(1e-12));
    CHECK(report.summary[k].seeds == 3);
  }
  for (double r : c.ratios) {
    const auto best = report.best_layer(r);
    REQUIRE(best);
    std::optional<double> best_rho;
    for (const auto& s : report.summary)
      if (s.ratio == r && s.layer == *best) {
        best_rho = s.mean_rho;
        CHECK(s.best);
      }
    for (const auto& s : report.summary)
      if (s.ratio == r) CHECK(*s.mean_rho <= *best_rho);
  }
  REQUIRE(report.bundles.size() == 2);
  const auto& bundle = report.bundles[0];
  CHECK(bundle.test_ids == report.splits[0].test_ids);
  CHECK(bundle.predictions.size() == bundle.test_ids.size());
  CHECK(bundle.closest_human.has_value());
}

TEST_CASE("repeated seeds average to the single-seed value") {
  const auto synth = small_synth(1);
  auto c = fast_config();
  c.layers = LayerSelection::parse("-2");
  c.seeds = {0};
  const auto one = run_experiment(c, synth.corpus, synth.reps);
  c.seeds = {0, 0, 0};
  const auto three = run_experiment(c, synth.corpus, synth.reps);
  CHECK(*one.summary[0].mean_rho == *three.summary[0].mean_rho);
  CHECK(one.bundles[0].predictions == three.bundles[0].predictions);
}

TEST_CASE("jobs do not change results") {
  const auto synth = small_synth(2);
  auto c = fast_config();
  const auto serial = run_experiment(c, synth.corpus, synth.reps);
  c.jobs = 4;
  const auto parallel = run_experiment(c, synth.corpus, synth.reps);
  REQUIRE(serial.grid.size() == parallel.grid.size());
  for (std::size_t i = 0; i < serial.grid.size(); ++i) {
    CHECK(serial.grid[i].rho == parallel.grid[i].rho);
    CHECK(serial.grid[i].test_predictions == parallel.grid[i].test_predictions);
  }
}

TEST_CASE("end-to-end determinism and file contents") {
  const auto synth = small_synth(3);
  const auto dir = fresh_dir("idea_eval_runner_e2e");
  auto c = on_disk(synth, dir);
  c.ratios = {0.3};
  const auto first = emit_report(run_experiment(c), dir / "a");
  const auto second = emit_report(run_experiment(c), dir / "b");
  REQUIRE(first.size() == second.size());
  for (std::size_t i = 0; i < first.size(); ++i) {
    CHECK(first[i].filename() == second[i].filename());
    CHECK(slurp(first[i]) == slurp(second[i]));
  }
  const auto grid = slurp(dir / "a" / "grid.csv");
  CHECK(grid.rfind("ratio,layer,seed,rho,pvalue,selected_epoch\n", 0) == 0);
  CHECK(line_count(grid) == 1 + 4 * 3);
  CHECK(fs::exists(dir / "a" / "layers_0.3.svg"));
  const auto svg = slurp(dir / "a" / "layers_0.3.svg");
  CHECK(svg.find("<svg") != std::string::npos);
  CHECK(svg.find("href") == std::string::npos);
  for (const char* name : {"summary.csv", "bins.csv", "hist.csv", "domains.csv", "closest.csv"})
    CHECK(fs::exists(dir / "a" / name));

  // Re-emitting the same report gives the same bytes.
  const auto report = run_experiment(c);
  emit_report(report, dir / "c");
  emit_report(report, dir / "d");
  CHECK(slurp(dir / "c" / "summary.csv") == slurp(dir / "d" / "summary.csv"));
  fs::remove_all(dir);
}

TEST_CASE("one-cell grid") {
  const auto synth = small_synth(4);
  auto c = fast_config();
  c.layers = LayerSelection::parse("-1");
  c.seeds = {7};
  const auto dir = fresh_dir("idea_eval_runner_one");
  emit_report(run_experiment(c, synth.corpus, synth.reps), dir);
  const auto grid = slurp(dir / "grid.csv");
  CHECK(line_count(grid) == 2);
  std::istringstream lines(grid);
  std::string header, row;
  std::getline(lines, header);
  std::getline(lines, row);
  CHECK(row.rfind("0.300000,-1,7,", 0) == 0);
  fs::remove_all(dir);
}

TEST_CASE("undefined correlations are written as NA") {
  auto synth = small_synth(5);
  std::vector<Manuscript> flat;
  for (auto m : synth.corpus.manuscripts()) {
    m.reviews["overall_quality"] = {5.0, 5.0};
    flat.push_back(m);
  }
  const Corpus corpus(flat);
  auto c = fast_config();
  c.layers = LayerSelection::parse("-1");
  const auto report = run_experiment(c, corpus, synth.reps);
  for (const auto& cell : report.grid) CHECK_FALSE(cell.rho.has_value());
  CHECK_FALSE(report.summary[0].mean_rho.has_value());
  CHECK_FALSE(report.best_layer(0.3).has_value());
  const auto dir = fresh_dir("idea_eval_runner_na");
  emit_report(report, dir);
  const auto grid = slurp(dir / "grid.csv");
  CHECK(grid.find(",NA,") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("setup validation") {
  const auto synth = small_synth(6, 12);
  auto c = fast_config();
  CHECK(validate_setup(c, synth.corpus, synth.reps).empty());

  SUBCASE("missing representation") {
    auto reps = synth.reps;
    std::vector<Manuscript> ms = synth.corpus.manuscripts();
    auto q = ms.front();
    q.id = "q";
    ms.push_back(q);
    const auto d = validate_setup(c, Corpus(ms), reps);
    CHECK(mentions(d, "'q'"));
    CHECK(kind_of([&] { run_experiment(c, Corpus(ms), reps); }) == ErrorKind::MissingReps);
  }
  SUBCASE("strategy without its labels") {
    c.strategy = parse_token_strategy("section_last");
    CHECK(mentions(validate_setup(c, synth.corpus, synth.reps), "section_last"));
  }
  SUBCASE("unknown criterion") {
    c.criterion = "technical_novelty";
    CHECK(mentions(validate_setup(c, synth.corpus, synth.reps), "technical_novelty"));
  }
  SUBCASE("layer out of range") {
    c.layers = LayerSelection::parse("-9");
    CHECK_FALSE(validate_setup(c, synth.corpus, synth.reps).empty());
  }
  SUBCASE("missing paths") {
    c.manifest = "/nonexistent/manifest.jsonl";
    c.reps_dir = "/nonexistent/reps";
    CHECK(validate_setup(c).size() == 2);
  }
}

TEST_CASE("verify representation files") {
  const auto synth = small_synth(7, 6);
  const auto dir = fresh_dir("idea_eval_runner_verify");
  const auto c = on_disk(synth, dir);
  CHECK(verify_reps(c.reps_dir, synth.corpus).empty());
  CHECK(validate_setup(c).empty());

  const auto ids = synth.corpus.manuscripts();
  {
    std::ofstream corrupt(c.reps_dir / (ids[0].id + ".idrp"), std::ios::binary);
    corrupt << "XXXX garbage";
  }
  auto other = synth.reps.at(ids[1].id);
  other.hidden_dim = 4;
  other.data.resize(std::size_t{other.num_layers} * other.num_vectors * 4);
  write_reps(other, c.reps_dir / (ids[1].id + ".idrp"));
  fs::remove(c.reps_dir / (ids[2].id + ".idrp"));

  const auto d = verify_reps(c.reps_dir, synth.corpus);
  CHECK(mentions(d, ids[0].id + ".idrp"));
  CHECK(mentions(d, "bad-magic"));
  CHECK(mentions(d, "hidden dim"));
  CHECK(mentions(d, ids[2].id + ".idrp: missing"));
  fs::remove_all(dir);
}

}  // TEST_SUITE
