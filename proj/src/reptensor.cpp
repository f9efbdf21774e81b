// SPDX-License-Identifier: Apache-2.0
#include "idea_eval/reptensor.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <set>

#include <fmt/format.h>

#include "idea_eval/error.hpp"

namespace idea_eval {

void RepTensor::validate() const {
  if (num_layers == 0 || hidden_dim == 0 || num_vectors == 0) {
    throw Error(ErrorKind::InvalidTensor,
                fmt::format("tensor '{}': L, m and v must be positive (got {}, {}, {})",
                            manuscript_id, num_layers, hidden_dim, num_vectors));
  }
  if (vector_labels.size() != num_vectors) {
    throw Error(ErrorKind::InvalidTensor,
                fmt::format("tensor '{}': {} labels for {} vectors", manuscript_id,
                            vector_labels.size(), num_vectors));
  }
  std::set<std::string_view> seen;
  for (const auto& label : vector_labels) {
    if (!seen.insert(label).second) {
      throw Error(ErrorKind::InvalidTensor,
                  fmt::format("tensor '{}': duplicate vector label '{}'", manuscript_id, label));
    }
  }
  const auto expected = std::size_t{num_layers} * num_vectors * hidden_dim;
  if (data.size() != expected) {
    throw Error(ErrorKind::LengthMismatch,
                fmt::format("tensor '{}': data holds {} values, expected {}", manuscript_id,
                            data.size(), expected));
  }
}

LayerIndex::LayerIndex(int index) : index_(index) {
  if (index >= 0) {
    throw Error(ErrorKind::LayerOutOfRange,
                fmt::format("layer index must be negative, got {}", index));
  }
}

std::size_t LayerIndex::block(std::uint32_t num_layers) const {
  const auto depth = -static_cast<long long>(index_);
  if (depth > static_cast<long long>(num_layers)) {
    throw Error(ErrorKind::LayerOutOfRange,
                fmt::format("layer {} out of range for a {}-block model", index_, num_layers));
  }
  return static_cast<std::size_t>(static_cast<long long>(num_layers) - depth);
}

TokenStrategy parse_token_strategy(std::string_view text) {
  if (text == "last") return {TokenKind::Last};
  if (text == "middle_plus_last") return {TokenKind::MiddlePlusLast};
  if (text == "section_last") return {TokenKind::SectionLast};
  if (text == "first_cls") return {TokenKind::FirstCls};
  if (text == "segment_last") return {TokenKind::SegmentLast};
  constexpr std::string_view prefix = "segment_last:";
  if (text.starts_with(prefix)) {
    const auto digits = text.substr(prefix.size());
    std::uint32_t len = 0;
    bool ok = !digits.empty() && digits.size() < 10;
    for (char c : digits) {
      if (c < '0' || c > '9') ok = false;
      else len = len * 10 + static_cast<std::uint32_t>(c - '0');
    }
    if (ok && len >= 1) return {TokenKind::SegmentLast, len};
  }
  throw Error(ErrorKind::InvalidConfig, fmt::format("unknown token strategy '{}'", text));
}

std::string to_string(const TokenStrategy& strategy) {
  switch (strategy.kind) {
    case TokenKind::Last: return "last";
    case TokenKind::MiddlePlusLast: return "middle_plus_last";
    case TokenKind::SectionLast: return "section_last";
    case TokenKind::SegmentLast:
      return strategy.segment_len == 512 ? "segment_last"
                                         : fmt::format("segment_last:{}", strategy.segment_len);
    case TokenKind::FirstCls: return "first_cls";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------
// .idrp encoding. All integers and floats are little-endian.

namespace {

class ByteWriter {
 public:
  void u16(std::uint16_t v) { put(v, 2); }
  void u32(std::uint32_t v) { put(v, 4); }
  void f32(float v) { put(std::bit_cast<std::uint32_t>(v), 4); }
  void raw(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    bytes_.insert(bytes_.end(), b, b + n);
  }
  void str(const std::string& s) {
    if (s.size() > std::numeric_limits<std::uint32_t>::max()) {
      throw Error(ErrorKind::InvalidTensor, "string field too long for .idrp");
    }
    u32(static_cast<std::uint32_t>(s.size()));
    raw(s.data(), s.size());
  }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }
  void reserve(std::size_t n) { bytes_.reserve(n); }

 private:
  void put(std::uint64_t v, int width) {
    for (int i = 0; i < width; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t> bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::size_t remaining() const { return bytes_.size() - pos_; }

  void need(std::size_t n, std::string_view what) const {
    if (remaining() < n) {
      throw Error(ErrorKind::TruncatedFile,
                  fmt::format("truncated .idrp: {} needs {} bytes, {} left", what, n, remaining()));
    }
  }
  std::uint64_t uint(int width, std::string_view what) {
    need(static_cast<std::size_t>(width), what);
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) v |= std::uint64_t{bytes_[pos_ + i]} << (8 * i);
    pos_ += static_cast<std::size_t>(width);
    return v;
  }
  std::uint16_t u16(std::string_view what) { return static_cast<std::uint16_t>(uint(2, what)); }
  std::uint32_t u32(std::string_view what) { return static_cast<std::uint32_t>(uint(4, what)); }
  float f32() { return std::bit_cast<float>(static_cast<std::uint32_t>(uint(4, "payload"))); }
  std::string str(std::string_view what) {
    const auto len = u32(what);
    need(len, what);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), len);
    pos_ += len;
    return s;
  }
  std::span<const std::uint8_t> peek(std::size_t n) const { return bytes_.subspan(pos_, n); }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_reps(const RepTensor& tensor) {
  tensor.validate();
  ByteWriter w;
  w.reserve(64 + tensor.data.size() * 4);
  w.raw(kIdrpMagic, 4);
  w.u16(kIdrpVersion);
  w.u16(0);
  w.str(tensor.model_name);
  w.str(tensor.manuscript_id);
  w.u32(tensor.num_layers);
  w.u32(tensor.hidden_dim);
  w.u32(tensor.num_vectors);
  for (const auto& label : tensor.vector_labels) w.str(label);
  for (float v : tensor.data) w.f32(v);
  return w.take();
}

RepTensor decode_reps(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  r.need(4, "magic");
  if (std::memcmp(r.peek(4).data(), kIdrpMagic, 4) != 0) {
    throw Error(ErrorKind::BadMagic, "not an .idrp file (bad magic)");
  }
  r.uint(4, "magic");
  const auto version = r.u16("version");
  if (version != kIdrpVersion) {
    throw Error(ErrorKind::UnsupportedVersion, fmt::format("unsupported .idrp version {}", version));
  }
  const auto flags = r.u16("flags");
  if (flags != 0) {
    throw Error(ErrorKind::UnsupportedVersion, fmt::format("unsupported .idrp flags {:#x}", flags));
  }

  RepTensor t;
  t.model_name = r.str("model_name");
  t.manuscript_id = r.str("manuscript_id");
  t.num_layers = r.u32("num_layers");
  t.hidden_dim = r.u32("hidden_dim");
  t.num_vectors = r.u32("num_vectors");
  if (t.num_layers == 0 || t.hidden_dim == 0 || t.num_vectors == 0) {
    throw Error(ErrorKind::InvalidTensor,
                fmt::format("tensor '{}': L, m and v must be positive", t.manuscript_id));
  }
  // Each label costs at least its 4-byte length prefix.
  r.need(std::size_t{t.num_vectors} * 4, "vector labels");
  t.vector_labels.reserve(t.num_vectors);
  for (std::uint32_t k = 0; k < t.num_vectors; ++k) t.vector_labels.push_back(r.str("vector label"));

  // Validate the payload length before allocating it.
  const std::uint64_t max_values = std::numeric_limits<std::uint64_t>::max() / 4;
  std::uint64_t count = t.num_layers;
  bool overflow = false;
  for (std::uint64_t factor : {std::uint64_t{t.num_vectors}, std::uint64_t{t.hidden_dim}}) {
    if (count > max_values / factor) overflow = true;
    else count *= factor;
  }
  const std::uint64_t available = r.remaining();
  if (overflow || count * 4 > available) {
    throw Error(ErrorKind::TruncatedFile,
                fmt::format("truncated .idrp: header declares {}x{}x{} floats, payload has {} bytes",
                            t.num_layers, t.num_vectors, t.hidden_dim, available));
  }
  if (count * 4 != available) {
    throw Error(ErrorKind::LengthMismatch,
                fmt::format(".idrp payload has {} bytes, header declares {}", available, count * 4));
  }
  t.data.resize(static_cast<std::size_t>(count));
  for (auto& v : t.data) v = r.f32();
  t.validate();
  return t;
}

void write_reps(const RepTensor& tensor, const std::filesystem::path& path) {
  const auto bytes = encode_reps(tensor);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, fmt::format("cannot open '{}' for writing", path.string()));
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorKind::Io, fmt::format("write failed for '{}'", path.string()));
}

RepTensor read_reps(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, fmt::format("cannot open '{}'", path.string()));
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return decode_reps(bytes);
  } catch (const Error& e) {
    throw Error(e.kind(), fmt::format("{}: {}", path.string(), e.what()));
  }
}

RepStore load_reps_dir(const std::filesystem::path& dir, std::span<const std::string> ids,
                       std::vector<std::string>* missing) {
  RepStore store;
  std::vector<std::string> absent;
  for (const auto& id : ids) {
    const auto path = dir / (id + ".idrp");
    if (!std::filesystem::exists(path)) {
      absent.push_back(id);
      continue;
    }
    store.emplace(id, read_reps(path));
  }
  if (missing != nullptr) {
    *missing = std::move(absent);
  } else if (!absent.empty()) {
    std::string list;
    for (const auto& id : absent) list += (list.empty() ? "" : ", ") + id;
    throw Error(ErrorKind::MissingReps, fmt::format("missing representation files for: {}", list));
  }
  return store;
}

LayerSlice select_layer(const RepTensor& tensor, LayerIndex layer) {
  const auto block = layer.block(tensor.num_layers);
  const std::size_t stride = std::size_t{tensor.num_vectors} * tensor.hidden_dim;
  return {std::span<const float>(tensor.data).subspan(block * stride, stride), tensor.num_vectors,
          tensor.hidden_dim};
}

namespace {

std::ptrdiff_t find_label(std::span<const std::string> labels, std::string_view label) {
  auto it = std::find(labels.begin(), labels.end(), label);
  return it == labels.end() ? -1 : it - labels.begin();
}

std::vector<std::size_t> prefixed(std::span<const std::string> labels, std::string_view prefix) {
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < labels.size(); ++k) {
    if (labels[k].starts_with(prefix)) out.push_back(k);
  }
  return out;
}

std::vector<std::size_t> strategy_vectors(std::span<const std::string> labels,
                                          const TokenStrategy& strategy) {
  auto single = [&](std::string_view label) -> std::size_t {
    const auto k = find_label(labels, label);
    if (k < 0) {
      throw Error(ErrorKind::MissingLabel,
                  fmt::format("strategy {} needs vector label '{}'", to_string(strategy), label));
    }
    return static_cast<std::size_t>(k);
  };
  auto all_with = [&](std::string_view prefix) {
    auto ks = prefixed(labels, prefix);
    if (ks.empty()) {
      throw Error(ErrorKind::MissingLabel,
                  fmt::format("strategy {} needs vector label '{}*'", to_string(strategy), prefix));
    }
    return ks;
  };
  switch (strategy.kind) {
    case TokenKind::Last: return {single("last")};
    case TokenKind::MiddlePlusLast: {
      const auto middle = single("middle");
      return {middle, single("last")};
    }
    case TokenKind::SectionLast: return all_with("sec:");
    case TokenKind::SegmentLast: return all_with("seg:");
    case TokenKind::FirstCls: return {single("cls")};
  }
  return {};
}

}  // namespace

std::string required_label(const TokenStrategy& strategy) {
  switch (strategy.kind) {
    case TokenKind::Last: return "last";
    case TokenKind::MiddlePlusLast: return "middle+last";
    case TokenKind::SectionLast: return "sec:*";
    case TokenKind::SegmentLast: return "seg:*";
    case TokenKind::FirstCls: return "cls";
  }
  return {};
}

bool supports_strategy(std::span<const std::string> labels, const TokenStrategy& strategy) {
  try {
    strategy_vectors(labels, strategy);
    return true;
  } catch (const Error&) {
    return false;
  }
}

FeatureVector select_tokens(const LayerSlice& slice, std::span<const std::string> labels,
                            const TokenStrategy& strategy) {
  if (labels.size() != slice.num_vectors) {
    throw Error(ErrorKind::InvalidTensor,
                fmt::format("{} labels for a slice of {} vectors", labels.size(), slice.num_vectors));
  }
  const auto picks = strategy_vectors(labels, strategy);
  FeatureVector out;
  out.reserve(picks.size() * slice.hidden_dim);
  for (auto k : picks) {
    for (float v : slice.vector(k)) out.push_back(static_cast<double>(v));
  }
  return out;
}

}  // namespace idea_eval
