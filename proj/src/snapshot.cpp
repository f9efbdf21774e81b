// SPDX-License-Identifier: Apache-2.0
// Evaluator snapshot layout:
//   line 1: compact JSON header terminated by '\n'
//   then:   little-endian float64 values in header["layout"] order
//           (w1 row-major hidden x input, b1, w2, b2, feat_mean, feat_std)
#include <bit>
#include <fstream>
#include <iterator>

#include <fmt/format.h>
#include <json.hpp>

#include "idea_eval/error.hpp"
#include "idea_eval/evaluator.hpp"

namespace idea_eval {

namespace {

constexpr const char* kFormat = "idea-eval-evaluator";
constexpr int kVersion = 1;

void put_f64(std::string& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
}

double get_f64(const std::string& in, std::size_t offset) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) {
    bits |= std::uint64_t{static_cast<unsigned char>(in[offset + i])} << (8 * i);
  }
  return std::bit_cast<double>(bits);
}

}  // namespace

void save_evaluator(const EvaluatorSnapshot& snapshot, const std::filesystem::path& path) {
  const auto& e = snapshot.evaluator;
  const auto& c = snapshot.config;
  nlohmann::ordered_json header;
  header["format"] = kFormat;
  header["version"] = kVersion;
  header["input_dim"] = e.input_dim;
  header["hidden_dim"] = e.hidden_dim;
  header["selected_epoch"] = snapshot.selected_epoch;
  header["config"] = {{"hidden_dim", c.hidden_dim},       {"learning_rate", c.learning_rate},
                      {"batch_size", c.batch_size},       {"dropout", c.dropout},
                      {"epochs", c.epochs},               {"seed", c.seed},
                      {"adam_beta1", c.adam_beta1},       {"adam_beta2", c.adam_beta2},
                      {"adam_eps", c.adam_eps}};
  header["layout"] = {"w1", "b1", "w2", "b2", "feat_mean", "feat_std"};

  std::string payload;
  payload.reserve((e.w1.size() + e.b1.size() + e.w2.size() + 1 + 2 * e.input_dim) * 8);
  for (const auto* block : {&e.w1, &e.b1, &e.w2}) {
    for (double v : *block) put_f64(payload, v);
  }
  put_f64(payload, e.b2);
  for (const auto* block : {&e.feat_mean, &e.feat_std}) {
    for (double v : *block) put_f64(payload, v);
  }
  header["payload_values"] = payload.size() / 8;

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, fmt::format("cannot write '{}'", path.string()));
  out << header.dump() << '\n';
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  if (!out) throw Error(ErrorKind::Io, fmt::format("write failed for '{}'", path.string()));
}

EvaluatorSnapshot load_evaluator(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, fmt::format("cannot open '{}'", path.string()));
  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto newline = content.find('\n');
  if (newline == std::string::npos) {
    throw Error(ErrorKind::TruncatedFile, fmt::format("{}: missing snapshot header", path.string()));
  }

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(content.substr(0, newline));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Parse, fmt::format("{}: bad snapshot header: {}", path.string(), e.what()));
  }
  EvaluatorSnapshot s;
  try {
    if (header.at("format") != kFormat) {
      throw Error(ErrorKind::BadMagic, fmt::format("{}: not an evaluator snapshot", path.string()));
    }
    if (header.at("version") != kVersion) {
      throw Error(ErrorKind::UnsupportedVersion,
                  fmt::format("{}: unsupported snapshot version", path.string()));
    }
    s.evaluator.input_dim = header.at("input_dim").get<std::size_t>();
    s.evaluator.hidden_dim = header.at("hidden_dim").get<std::size_t>();
    s.selected_epoch = header.at("selected_epoch").get<std::size_t>();
    const auto& c = header.at("config");
    s.config.hidden_dim = c.at("hidden_dim").get<std::size_t>();
    s.config.learning_rate = c.at("learning_rate").get<double>();
    s.config.batch_size = c.at("batch_size").get<std::size_t>();
    s.config.dropout = c.at("dropout").get<double>();
    s.config.epochs = c.at("epochs").get<std::size_t>();
    s.config.seed = c.at("seed").get<std::uint64_t>();
    s.config.adam_beta1 = c.at("adam_beta1").get<double>();
    s.config.adam_beta2 = c.at("adam_beta2").get<double>();
    s.config.adam_eps = c.at("adam_eps").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::MissingField, fmt::format("{}: {}", path.string(), e.what()));
  }

  auto& e = s.evaluator;
  const std::size_t in_dim = e.input_dim, hid = e.hidden_dim;
  const std::size_t expected = hid * in_dim + 2 * hid + 1 + 2 * in_dim;
  const std::size_t offset = newline + 1;
  const std::size_t available = content.size() - offset;
  if (available < expected * 8) {
    throw Error(ErrorKind::TruncatedFile,
                fmt::format("{}: payload has {} bytes, expected {}", path.string(), available, expected * 8));
  }
  if (available != expected * 8) {
    throw Error(ErrorKind::LengthMismatch,
                fmt::format("{}: payload has {} bytes, expected {}", path.string(), available, expected * 8));
  }
  std::size_t cursor = offset;
  const auto take = [&](std::size_t count) {
    std::vector<double> v(count);
    for (auto& x : v) {
      x = get_f64(content, cursor);
      cursor += 8;
    }
    return v;
  };
  e.w1 = take(hid * in_dim);
  e.b1 = take(hid);
  e.w2 = take(hid);
  e.b2 = take(1).front();
  e.feat_mean = take(in_dim);
  e.feat_std = take(in_dim);
  return s;
}

}  // namespace idea_eval
