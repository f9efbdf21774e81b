// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace idea_eval {

struct Section {
  std::string heading;
  std::string text;

  bool operator==(const Section&) const = default;
};

/// One manuscript (idea) with its human review scores keyed by criterion.
struct Manuscript {
  std::string id;
  std::string title;
  std::string abstract;
  std::vector<Section> sections;
  std::map<std::string, std::vector<double>> reviews;
  std::optional<std::string> domain;

  bool has_criterion(std::string_view criterion) const;
  /// Review list for a criterion; throws UnknownCriterion when absent.
  const std::vector<double>& scores(std::string_view criterion) const;

  bool operator==(const Manuscript&) const = default;
};

/// Manuscripts in manifest order. Immutable once loaded.
class Corpus {
 public:
  Corpus() = default;
  /// Validates invariants (unique nonempty ids, nonempty abstracts and
  /// review lists, finite scores).
  explicit Corpus(std::vector<Manuscript> manuscripts);

  const std::vector<Manuscript>& manuscripts() const noexcept { return manuscripts_; }
  std::size_t size() const noexcept { return manuscripts_.size(); }
  bool empty() const noexcept { return manuscripts_.empty(); }

  const Manuscript* find(std::string_view id) const;
  const Manuscript& at(std::string_view id) const;

  /// Sorted union of criterion names across manuscripts.
  std::vector<std::string> criteria() const;
  bool has_criterion(std::string_view criterion) const;

  /// Copy with sections replaced for manuscripts present in `sections_by_id`.
  Corpus with_sections(const std::map<std::string, std::vector<Section>>& sections_by_id) const;

  bool operator==(const Corpus&) const = default;

 private:
  std::vector<Manuscript> manuscripts_;
};

enum class StdConvention { Population, Sample };

struct ScoreStats {
  std::size_t count = 0;
  double mean = 0.0;
  double std = 0.0;
  double min = 0.0;
  double max = 0.0;
};

Corpus load_manifest(const std::filesystem::path& path);
Corpus parse_manifest(std::istream& in);
void save_manifest(const Corpus& corpus, const std::filesystem::path& path);
void write_manifest(const Corpus& corpus, std::ostream& out);

/// Sections of a GROBID TEI document, one per top-level body division.
std::vector<Section> parse_tei_sections(const std::string& tei_document);

/// Replaces sections of every manuscript that has `<id>.tei.xml` in `tei_dir`.
Corpus attach_tei_sections(const Corpus& corpus, const std::filesystem::path& tei_dir);

/// Stats over per-paper mean scores; papers lacking the criterion are skipped.
ScoreStats review_stats(const Corpus& corpus, std::string_view criterion,
                        StdConvention convention = StdConvention::Population);

/// Trim and collapse internal whitespace runs to one space.
std::string normalize_whitespace(std::string_view text);

}  // namespace idea_eval
