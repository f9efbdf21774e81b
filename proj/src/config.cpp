// SPDX-License-Identifier: Apache-2.0
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "idea_eval/error.hpp"
#include "idea_eval/runner.hpp"

namespace idea_eval {

using nlohmann::json;

std::vector<int> LayerSelection::resolve(std::uint32_t num_layers) const {
  if (!all) return indices;
  std::vector<int> out;
  for (int k = -static_cast<int>(num_layers); k <= -1; ++k) out.push_back(k);
  return out;
}

LayerSelection LayerSelection::parse(std::string_view text) {
  LayerSelection s;
  if (text == "all") return s;
  s.all = false;
  std::string item;
  std::istringstream in{std::string(text)};
  while (std::getline(in, item, ',')) {
    std::size_t used = 0;
    int value = 0;
    try {
      value = std::stoi(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size()) {
      throw Error(ErrorKind::InvalidConfig, fmt::format("bad layer index '{}'", item));
    }
    s.indices.push_back(LayerIndex(value).value());
  }
  if (s.indices.empty()) throw Error(ErrorKind::InvalidConfig, "empty layer list");
  return s;
}

std::string LayerSelection::to_string() const {
  if (all) return "all";
  std::string out;
  for (int k : indices) out += (out.empty() ? "" : ",") + std::to_string(k);
  return out;
}

namespace {

void read_evaluator(const json& j, EvaluatorConfig& c) {
  static const std::set<std::string> known = {"hidden_dim", "learning_rate", "batch_size",
                                              "dropout",    "epochs",        "seed",
                                              "adam_beta1", "adam_beta2",    "adam_eps"};
  for (const auto& [key, _] : j.items()) {
    if (!known.contains(key)) {
      throw Error(ErrorKind::InvalidConfig, fmt::format("unknown evaluator key '{}'", key));
    }
  }
  c.hidden_dim = j.value("hidden_dim", c.hidden_dim);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.dropout = j.value("dropout", c.dropout);
  c.epochs = j.value("epochs", c.epochs);
  c.seed = j.value("seed", c.seed);
  c.adam_beta1 = j.value("adam_beta1", c.adam_beta1);
  c.adam_beta2 = j.value("adam_beta2", c.adam_beta2);
  c.adam_eps = j.value("adam_eps", c.adam_eps);
}

}  // namespace

ExperimentConfig parse_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::InvalidConfig, fmt::format("config is not valid JSON: {}", e.what()));
  }
  if (!j.is_object()) throw Error(ErrorKind::InvalidConfig, "config must be a JSON object");

  static const std::set<std::string> known = {
      "manifest", "reps_dir", "tei_dir",    "criterion", "ratios", "layers", "strategy",
      "seeds",    "evaluator", "output_dir", "clamp",     "jobs",   "histogram_bin_width"};
  for (const auto& [key, _] : j.items()) {
    if (!known.contains(key)) throw Error(ErrorKind::InvalidConfig, fmt::format("unknown config key '{}'", key));
  }

  ExperimentConfig c;
  try {
    if (j.contains("manifest")) c.manifest = j["manifest"].get<std::string>();
    if (j.contains("reps_dir")) c.reps_dir = j["reps_dir"].get<std::string>();
    if (j.contains("tei_dir") && !j["tei_dir"].is_null()) c.tei_dir = j["tei_dir"].get<std::string>();
    c.criterion = j.value("criterion", c.criterion);
    if (j.contains("ratios")) {
      const auto& r = j["ratios"];
      c.ratios = r.is_array() ? r.get<std::vector<double>>() : std::vector<double>{r.get<double>()};
    }
    if (j.contains("layers")) {
      const auto& l = j["layers"];
      if (l.is_string()) {
        c.layers = LayerSelection::parse(l.get<std::string>());
      } else {
        c.layers.all = false;
        c.layers.indices.clear();
        for (int k : l.get<std::vector<int>>()) c.layers.indices.push_back(LayerIndex(k).value());
      }
    }
    if (j.contains("strategy")) c.strategy = parse_token_strategy(j["strategy"].get<std::string>());
    if (j.contains("seeds")) c.seeds = j["seeds"].get<std::vector<std::uint64_t>>();
    if (j.contains("evaluator")) read_evaluator(j["evaluator"], c.evaluator);
    if (j.contains("output_dir")) c.output_dir = j["output_dir"].get<std::string>();
    c.clamp = j.value("clamp", c.clamp);
    c.jobs = j.value("jobs", c.jobs);
    c.histogram_bin_width = j.value("histogram_bin_width", c.histogram_bin_width);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::InvalidConfig, fmt::format("config value has the wrong type: {}", e.what()));
  } catch (const Error& e) {
    throw Error(ErrorKind::InvalidConfig, e.what());
  }
  if (c.ratios.empty()) throw Error(ErrorKind::InvalidConfig, "ratios must not be empty");
  if (c.seeds.empty()) throw Error(ErrorKind::InvalidConfig, "seeds must not be empty");
  if (!c.layers.all && c.layers.indices.empty()) throw Error(ErrorKind::InvalidConfig, "layers must not be empty");
  if (c.jobs == 0) throw Error(ErrorKind::InvalidConfig, "jobs must be at least 1");
  if (!(c.histogram_bin_width > 0)) throw Error(ErrorKind::InvalidConfig, "histogram_bin_width must be positive");
  c.evaluator.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, fmt::format("cannot open config '{}'", path.string()));
  std::ostringstream buffer;
  buffer << in.rdbuf();
  auto c = parse_config(buffer.str());
  // Relative paths are taken relative to the config file.
  const auto base = path.parent_path();
  const auto rebase = [&](std::filesystem::path& p) {
    if (!p.empty() && p.is_relative()) p = base / p;
  };
  rebase(c.manifest);
  rebase(c.reps_dir);
  rebase(c.output_dir);
  if (c.tei_dir) rebase(*c.tei_dir);
  return c;
}

std::string config_to_json(const ExperimentConfig& c) {
  nlohmann::ordered_json j;
  j["manifest"] = c.manifest.string();
  j["reps_dir"] = c.reps_dir.string();
  j["tei_dir"] = c.tei_dir ? json(c.tei_dir->string()) : json(nullptr);
  j["criterion"] = c.criterion;
  j["ratios"] = c.ratios;
  if (c.layers.all) j["layers"] = "all";
  else j["layers"] = c.layers.indices;
  j["strategy"] = to_string(c.strategy);
  j["seeds"] = c.seeds;
  j["evaluator"] = {{"hidden_dim", c.evaluator.hidden_dim},
                    {"learning_rate", c.evaluator.learning_rate},
                    {"batch_size", c.evaluator.batch_size},
                    {"dropout", c.evaluator.dropout},
                    {"epochs", c.evaluator.epochs},
                    {"seed", c.evaluator.seed},
                    {"adam_beta1", c.evaluator.adam_beta1},
                    {"adam_beta2", c.evaluator.adam_beta2},
                    {"adam_eps", c.evaluator.adam_eps}};
  j["output_dir"] = c.output_dir.string();
  j["clamp"] = c.clamp;
  j["jobs"] = c.jobs;
  j["histogram_bin_width"] = c.histogram_bin_width;
  return j.dump(2) + "\n";
}

}  // namespace idea_eval
