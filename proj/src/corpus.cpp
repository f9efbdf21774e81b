// SPDX-License-Identifier: Apache-2.0
#include "idea_eval/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "idea_eval/error.hpp"
#include "idea_eval/stats.hpp"

namespace idea_eval {

using nlohmann::json;

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::Parse: return "parse";
    case ErrorKind::MissingField: return "missing-field";
    case ErrorKind::DuplicateId: return "duplicate-id";
    case ErrorKind::InvalidRecord: return "invalid-record";
    case ErrorKind::UnknownCriterion: return "unknown-criterion";
    case ErrorKind::MalformedXml: return "malformed-xml";
    case ErrorKind::BadMagic: return "bad-magic";
    case ErrorKind::UnsupportedVersion: return "unsupported-version";
    case ErrorKind::TruncatedFile: return "truncated-file";
    case ErrorKind::LengthMismatch: return "length-mismatch";
    case ErrorKind::InvalidTensor: return "invalid-tensor";
    case ErrorKind::LayerOutOfRange: return "layer-out-of-range";
    case ErrorKind::MissingLabel: return "missing-label";
    case ErrorKind::RatioOutOfRange: return "ratio-out-of-range";
    case ErrorKind::EmptyInput: return "empty-input";
    case ErrorKind::AllTrain: return "all-train";
    case ErrorKind::DimMismatch: return "dim-mismatch";
    case ErrorKind::NanLoss: return "nan-loss";
    case ErrorKind::ConstantInput: return "constant-input";
    case ErrorKind::InsufficientReviews: return "insufficient-reviews";
    case ErrorKind::MissingReps: return "missing-reps";
    case ErrorKind::InvalidConfig: return "invalid-config";
    case ErrorKind::Io: return "io";
  }
  return "unknown";
}

bool Manuscript::has_criterion(std::string_view criterion) const {
  return reviews.find(std::string(criterion)) != reviews.end();
}

const std::vector<double>& Manuscript::scores(std::string_view criterion) const {
  auto it = reviews.find(std::string(criterion));
  if (it == reviews.end()) {
    throw Error(ErrorKind::UnknownCriterion,
                fmt::format("manuscript '{}' has no reviews for criterion '{}'", id, criterion));
  }
  return it->second;
}

namespace {

void validate(const Manuscript& m) {
  if (m.id.empty()) throw Error(ErrorKind::InvalidRecord, "manuscript id is empty");
  if (m.abstract.empty()) {
    throw Error(ErrorKind::InvalidRecord, fmt::format("manuscript '{}' has an empty abstract", m.id));
  }
  for (const auto& [criterion, scores] : m.reviews) {
    if (scores.empty()) {
      throw Error(ErrorKind::InvalidRecord,
                  fmt::format("manuscript '{}': review list for '{}' is empty", m.id, criterion));
    }
    for (double s : scores) {
      if (!std::isfinite(s)) {
        throw Error(ErrorKind::InvalidRecord,
                    fmt::format("manuscript '{}': non-finite score for '{}'", m.id, criterion));
      }
    }
  }
}

}  // namespace

Corpus::Corpus(std::vector<Manuscript> manuscripts) : manuscripts_(std::move(manuscripts)) {
  std::set<std::string_view> seen;
  for (const auto& m : manuscripts_) {
    validate(m);
    if (!seen.insert(m.id).second) {
      throw Error(ErrorKind::DuplicateId, fmt::format("duplicate manuscript id '{}'", m.id));
    }
  }
}

const Manuscript* Corpus::find(std::string_view id) const {
  auto it = std::find_if(manuscripts_.begin(), manuscripts_.end(),
                         [&](const Manuscript& m) { return m.id == id; });
  return it == manuscripts_.end() ? nullptr : &*it;
}

const Manuscript& Corpus::at(std::string_view id) const {
  if (const auto* m = find(id)) return *m;
  throw Error(ErrorKind::InvalidRecord, fmt::format("no manuscript with id '{}'", id));
}

std::vector<std::string> Corpus::criteria() const {
  std::set<std::string> names;
  for (const auto& m : manuscripts_) {
    for (const auto& [name, _] : m.reviews) names.insert(name);
  }
  return {names.begin(), names.end()};
}

bool Corpus::has_criterion(std::string_view criterion) const {
  return std::any_of(manuscripts_.begin(), manuscripts_.end(),
                     [&](const Manuscript& m) { return m.has_criterion(criterion); });
}

Corpus Corpus::with_sections(const std::map<std::string, std::vector<Section>>& sections_by_id) const {
  auto copy = manuscripts_;
  for (auto& m : copy) {
    if (auto it = sections_by_id.find(m.id); it != sections_by_id.end()) m.sections = it->second;
  }
  return Corpus(std::move(copy));
}

std::string normalize_whitespace(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(c);
  }
  return out;
}

namespace {

const json& required(const json& record, const char* key, std::size_t line) {
  auto it = record.find(key);
  if (it == record.end()) {
    throw Error(ErrorKind::MissingField,
                fmt::format("line {}: missing required field '{}'", line, key));
  }
  return *it;
}

std::string required_string(const json& record, const char* key, std::size_t line) {
  const auto& value = required(record, key, line);
  if (!value.is_string()) {
    throw Error(ErrorKind::Parse, fmt::format("line {}: field '{}' must be a string", line, key));
  }
  return value.get<std::string>();
}

Manuscript parse_record(const json& record, std::size_t line) {
  if (!record.is_object()) {
    throw Error(ErrorKind::Parse, fmt::format("line {}: record is not a JSON object", line));
  }
  Manuscript m;
  m.id = required_string(record, "id", line);
  m.title = required_string(record, "title", line);
  m.abstract = required_string(record, "abstract", line);

  const auto& reviews = required(record, "reviews", line);
  if (!reviews.is_object()) {
    throw Error(ErrorKind::Parse, fmt::format("line {}: field 'reviews' must be an object", line));
  }
  for (const auto& [criterion, scores] : reviews.items()) {
    if (!scores.is_array()) {
      throw Error(ErrorKind::Parse,
                  fmt::format("line {}: reviews['{}'] must be an array of numbers", line, criterion));
    }
    std::vector<double> values;
    for (const auto& s : scores) {
      if (!s.is_number()) {
        throw Error(ErrorKind::Parse,
                    fmt::format("line {}: reviews['{}'] holds a non-numeric score", line, criterion));
      }
      values.push_back(s.get<double>());
    }
    m.reviews.emplace(criterion, std::move(values));
  }

  if (auto it = record.find("sections"); it != record.end() && !it->is_null()) {
    if (!it->is_array()) {
      throw Error(ErrorKind::Parse, fmt::format("line {}: field 'sections' must be an array", line));
    }
    for (const auto& s : *it) {
      if (!s.is_object()) {
        throw Error(ErrorKind::Parse, fmt::format("line {}: section entry is not an object", line));
      }
      m.sections.push_back({normalize_whitespace(required_string(s, "heading", line)),
                            required_string(s, "text", line)});
    }
  }
  if (auto it = record.find("domain"); it != record.end() && !it->is_null()) {
    if (!it->is_string()) {
      throw Error(ErrorKind::Parse, fmt::format("line {}: field 'domain' must be a string", line));
    }
    m.domain = it->get<std::string>();
  }

  try {
    validate(m);
  } catch (const Error& e) {
    throw Error(e.kind(), fmt::format("line {}: {}", line, e.what()));
  }
  return m;
}

}  // namespace

Corpus parse_manifest(std::istream& in) {
  std::vector<Manuscript> manuscripts;
  std::set<std::string> seen;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (normalize_whitespace(text).empty()) continue;
    json record;
    try {
      record = json::parse(text);
    } catch (const json::parse_error& e) {
      throw Error(ErrorKind::Parse, fmt::format("line {}: {}", line, e.what()));
    }
    auto m = parse_record(record, line);
    if (!seen.insert(m.id).second) {
      throw Error(ErrorKind::DuplicateId, fmt::format("line {}: duplicate manuscript id '{}'", line, m.id));
    }
    manuscripts.push_back(std::move(m));
  }
  return Corpus(std::move(manuscripts));
}

Corpus load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, fmt::format("cannot open manifest '{}'", path.string()));
  return parse_manifest(in);
}

void write_manifest(const Corpus& corpus, std::ostream& out) {
  for (const auto& m : corpus.manuscripts()) {
    json record;
    record["id"] = m.id;
    record["title"] = m.title;
    record["abstract"] = m.abstract;
    record["reviews"] = json::object();
    for (const auto& [criterion, scores] : m.reviews) record["reviews"][criterion] = scores;
    if (!m.sections.empty()) {
      record["sections"] = json::array();
      for (const auto& s : m.sections) {
        record["sections"].push_back({{"heading", s.heading}, {"text", s.text}});
      }
    }
    if (m.domain) record["domain"] = *m.domain;
    out << record.dump() << '\n';
  }
}

void save_manifest(const Corpus& corpus, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, fmt::format("cannot write manifest '{}'", path.string()));
  write_manifest(corpus, out);
  if (!out) throw Error(ErrorKind::Io, fmt::format("write failed for '{}'", path.string()));
}

ScoreStats review_stats(const Corpus& corpus, std::string_view criterion, StdConvention convention) {
  std::vector<double> paper_means;
  for (const auto& m : corpus.manuscripts()) {
    if (!m.has_criterion(criterion)) continue;
    paper_means.push_back(mean_of(m.scores(criterion)));
  }
  if (paper_means.empty()) {
    throw Error(ErrorKind::UnknownCriterion,
                fmt::format("criterion '{}' not present in any manuscript", criterion));
  }
  std::sort(paper_means.begin(), paper_means.end());
  ScoreStats stats;
  stats.count = paper_means.size();
  stats.mean = mean_of(paper_means);
  stats.std = stddev_of(paper_means, convention == StdConvention::Sample);
  stats.min = paper_means.front();
  stats.max = paper_means.back();
  return stats;
}

}  // namespace idea_eval
