// SPDX-License-Identifier: Apache-2.0
#include <fstream>
#include <sstream>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>
#include <fmt/format.h>

#include "idea_eval/corpus.hpp"
#include "idea_eval/error.hpp"

namespace idea_eval {

namespace pt = boost::property_tree;

namespace {

constexpr std::string_view kTextKey = "<xmltext>";
constexpr std::string_view kAttrKey = "<xmlattr>";
constexpr std::string_view kCommentKey = "<xmlcomment>";

// "tei:div" and "div" name the same element.
std::string_view local_name(std::string_view key) {
  auto colon = key.rfind(':');
  return colon == std::string_view::npos ? key : key.substr(colon + 1);
}

const pt::ptree* find_element(const pt::ptree& node, std::string_view name) {
  for (const auto& [key, child] : node) {
    if (key == kTextKey || key == kAttrKey || key == kCommentKey) continue;
    if (local_name(key) == name) return &child;
    if (const auto* found = find_element(child, name)) return found;
  }
  return nullptr;
}

void collect_text(const pt::ptree& node, std::vector<std::string>& pieces,
                  std::string_view skip_child = {}) {
  for (const auto& [key, child] : node) {
    if (key == kAttrKey || key == kCommentKey) continue;
    if (key == kTextKey) {
      auto piece = normalize_whitespace(child.data());
      if (!piece.empty()) pieces.push_back(std::move(piece));
      continue;
    }
    if (!skip_child.empty() && local_name(key) == skip_child) continue;
    collect_text(child, pieces);
  }
}

std::string join(const std::vector<std::string>& pieces) {
  std::string out;
  for (const auto& p : pieces) {
    if (!out.empty()) out.push_back(' ');
    out += p;
  }
  return out;
}

}  // namespace

std::vector<Section> parse_tei_sections(const std::string& tei_document) {
  pt::ptree doc;
  std::istringstream in(tei_document);
  try {
    pt::read_xml(in, doc, pt::xml_parser::no_concat_text);
  } catch (const pt::xml_parser_error& e) {
    throw Error(ErrorKind::MalformedXml, fmt::format("malformed TEI document: {}", e.what()));
  }

  std::vector<Section> sections;
  const auto* body = find_element(doc, "body");
  if (body == nullptr) return sections;

  std::size_t position = 0;
  for (const auto& [key, div] : *body) {
    if (key == kTextKey || key == kAttrKey || key == kCommentKey) continue;
    if (local_name(key) != "div") continue;
    ++position;

    std::string heading;
    for (const auto& [child_key, child] : div) {
      if (local_name(child_key) == "head") {
        std::vector<std::string> head_pieces;
        collect_text(child, head_pieces);
        heading = join(head_pieces);
        break;
      }
    }
    if (heading.empty()) heading = fmt::format("unnamed-{}", position);

    std::vector<std::string> pieces;
    collect_text(div, pieces, "head");
    sections.push_back({std::move(heading), join(pieces)});
  }
  return sections;
}

Corpus attach_tei_sections(const Corpus& corpus, const std::filesystem::path& tei_dir) {
  std::map<std::string, std::vector<Section>> by_id;
  for (const auto& m : corpus.manuscripts()) {
    const auto path = tei_dir / (m.id + ".tei.xml");
    if (!std::filesystem::exists(path)) continue;
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::Io, fmt::format("cannot open '{}'", path.string()));
    std::ostringstream buffer;
    buffer << in.rdbuf();
    try {
      by_id.emplace(m.id, parse_tei_sections(buffer.str()));
    } catch (const Error& e) {
      throw Error(e.kind(), fmt::format("{}: {}", path.string(), e.what()));
    }
  }
  return corpus.with_sections(by_id);
}

}  // namespace idea_eval
