#pragma once

#include <splatstream/error.hpp>
#include <splatstream/gaussians.hpp>

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace splatstream {

static_assert(std::endian::native == std::endian::little,
              "PLY reader assumes a little-endian host");

namespace detail {

inline std::size_t ply_type_size(std::string_view type) {
  static const std::unordered_map<std::string_view, std::size_t> sizes = {
      {"char", 1},   {"int8", 1},   {"uchar", 1},  {"uint8", 1},   {"short", 2},
      {"int16", 2},  {"ushort", 2}, {"uint16", 2}, {"int", 4},     {"int32", 4},
      {"uint", 4},   {"uint32", 4}, {"float", 4},  {"float32", 4}, {"double", 8},
      {"float64", 8}};
  auto it = sizes.find(type);
  return it == sizes.end() ? 0 : it->second;
}

inline bool is_float32(std::string_view type) { return type == "float" || type == "float32"; }

struct PlyProperty {
  std::string name;
  std::string type;
  std::size_t offset = 0;
};

struct PlyElement {
  std::string name;
  std::size_t count = 0;
  std::size_t stride = 0;
  std::vector<PlyProperty> properties;
};

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  return s;
}

inline std::vector<std::string_view> split_words(std::string_view s) {
  std::vector<std::string_view> words;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && s[i] == ' ') ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ') ++j;
    if (j > i) words.push_back(s.substr(i, j - i));
    i = j;
  }
  return words;
}

}  // namespace detail

/// Parses a binary little-endian 3DGS PLY. Rejects the whole file on any
/// problem; there are no partial loads.
inline GaussianPrimitiveSet parse_ply(std::span<const std::uint8_t> bytes) {
  using detail::PlyElement;
  const std::string_view text(reinterpret_cast<const char*>(bytes.data()), bytes.size());

  constexpr std::string_view kEnd = "end_header";
  std::size_t pos = 0;
  std::size_t line_no = 0;
  bool saw_format = false;
  bool saw_end = false;
  std::vector<PlyElement> elements;

  auto next_line = [&]() -> std::optional<std::string_view> {
    if (pos >= text.size()) return std::nullopt;
    const std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) return std::nullopt;
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    return detail::trim(line);
  };

  auto first = next_line();
  if (!first || *first != "ply") {
    throw Error(ErrorKind::MalformedHeader, "missing 'ply' magic");
  }
  while (auto line = next_line()) {
    if (*line == kEnd) {
      saw_end = true;
      break;
    }
    const auto words = detail::split_words(*line);
    if (words.empty() || words[0] == "comment" || words[0] == "obj_info") continue;
    if (words[0] == "format") {
      if (words.size() != 3 || words[1] != "binary_little_endian" || words[2] != "1.0") {
        throw Error(ErrorKind::MalformedHeader,
                    "unsupported format line '" + std::string(*line) + "'");
      }
      saw_format = true;
    } else if (words[0] == "element") {
      if (words.size() != 3) {
        throw Error(ErrorKind::MalformedHeader, "bad element line " + std::to_string(line_no));
      }
      PlyElement el;
      el.name = std::string(words[1]);
      try {
        el.count = std::stoull(std::string(words[2]));
      } catch (const std::exception&) {
        throw Error(ErrorKind::MalformedHeader, "bad element count on line " + std::to_string(line_no));
      }
      elements.push_back(std::move(el));
    } else if (words[0] == "property") {
      if (elements.empty()) {
        throw Error(ErrorKind::MalformedHeader, "property before any element");
      }
      if (words.size() >= 2 && words[1] == "list") {
        throw Error(ErrorKind::MalformedHeader, "list properties are not supported");
      }
      if (words.size() != 3) {
        throw Error(ErrorKind::MalformedHeader, "bad property line " + std::to_string(line_no));
      }
      const std::size_t size = detail::ply_type_size(words[1]);
      if (size == 0) {
        throw Error(ErrorKind::MalformedHeader, "unknown property type '" + std::string(words[1]) + "'");
      }
      auto& el = elements.back();
      el.properties.push_back({std::string(words[2]), std::string(words[1]), el.stride});
      el.stride += size;
    } else {
      throw Error(ErrorKind::MalformedHeader, "unexpected header line " + std::to_string(line_no));
    }
  }
  if (!saw_end) throw Error(ErrorKind::MalformedHeader, "missing end_header");
  if (!saw_format) throw Error(ErrorKind::MalformedHeader, "missing format line");

  std::size_t body_offset = pos;
  const PlyElement* vertex = nullptr;
  for (const auto& el : elements) {
    if (el.name == "vertex") {
      vertex = &el;
      break;
    }
    body_offset += el.count * el.stride;
  }
  if (vertex == nullptr) throw Error(ErrorKind::MalformedHeader, "no vertex element");

  std::unordered_map<std::string, const detail::PlyProperty*> by_name;
  for (const auto& p : vertex->properties) by_name.emplace(p.name, &p);

  auto require = [&](const std::string& name) -> std::size_t {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw Error(ErrorKind::MissingProperty, "vertex property '" + name + "'");
    if (!detail::is_float32(it->second->type)) {
      throw Error(ErrorKind::MalformedHeader, "property '" + name + "' must be float32");
    }
    return it->second->offset;
  };

  std::array<std::size_t, 3> off_pos{}, off_scale{}, off_dc{};
  std::array<std::size_t, 4> off_rot{};
  const char* xyz[] = {"x", "y", "z"};
  for (int k = 0; k < 3; ++k) {
    off_pos[k] = require(xyz[k]);
    off_scale[k] = require("scale_" + std::to_string(k));
    off_dc[k] = require("f_dc_" + std::to_string(k));
  }
  for (int k = 0; k < 4; ++k) off_rot[k] = require("rot_" + std::to_string(k));
  const std::size_t off_opacity = require("opacity");

  // f_rest is all-or-nothing; 3DGS writes it channel-major (45 = 3 x 15)
  std::optional<std::array<std::size_t, 45>> off_rest;
  if (by_name.count("f_rest_0")) {
    std::array<std::size_t, 45> r{};
    for (int k = 0; k < 45; ++k) r[k] = require("f_rest_" + std::to_string(k));
    off_rest = r;
  }

  const std::size_t n = vertex->count;
  const std::size_t stride = vertex->stride;
  if (body_offset > bytes.size() || (bytes.size() - body_offset) / (stride ? stride : 1) < n) {
    throw Error(ErrorKind::TruncatedBody,
                "expected " + std::to_string(n) + " vertices of " + std::to_string(stride) +
                    " bytes, body has " +
                    std::to_string(bytes.size() > body_offset ? bytes.size() - body_offset : 0));
  }

  GaussianPrimitiveSet set;
  set.resize(n);
  const std::uint8_t* base = bytes.data() + body_offset;
  auto read = [](const std::uint8_t* p) {
    float f;
    std::memcpy(&f, p, sizeof f);
    return f;
  };
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint8_t* rec = base + i * stride;
    for (int k = 0; k < 3; ++k) {
      set.means[i * 3 + k] = read(rec + off_pos[k]);
      set.log_scales[i * 3 + k] = read(rec + off_scale[k]);
      set.sh(i, 0, k) = read(rec + off_dc[k]);
    }
    for (int k = 0; k < 4; ++k) set.quaternions[i * 4 + k] = read(rec + off_rot[k]);
    set.opacity_logits[i] = read(rec + off_opacity);
    if (off_rest) {
      for (std::size_t c = 0; c < 3; ++c) {
        for (std::size_t k = 1; k < kShCoeffs; ++k) {
          set.sh(i, k, c) = read(rec + (*off_rest)[c * 15 + (k - 1)]);
        }
      }
    }
  }

  if (!detail::all_finite(set.means) || !detail::all_finite(set.log_scales) ||
      !detail::all_finite(set.quaternions) || !detail::all_finite(set.opacity_logits) ||
      !detail::all_finite(set.sh_coeffs)) {
    throw Error(ErrorKind::NonFiniteAttribute, "PLY body contains NaN or Inf");
  }
  return set;
}

inline GaussianPrimitiveSet parse_ply(std::string_view bytes) {
  return parse_ply(std::span(reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size()));
}

inline std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline GaussianPrimitiveSet load_ply(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  return parse_ply(std::span<const std::uint8_t>(bytes));
}

/// Serializes in the layout produced by the reference 3DGS trainer
/// (normals included and zeroed). `with_rest` controls the f_rest block.
inline std::string write_ply(const GaussianPrimitiveSet& set, bool with_rest = true) {
  std::ostringstream out;
  out << "ply\nformat binary_little_endian 1.0\n";
  out << "element vertex " << set.count << "\n";
  for (const char* p : {"x", "y", "z", "nx", "ny", "nz", "f_dc_0", "f_dc_1", "f_dc_2"}) {
    out << "property float " << p << "\n";
  }
  if (with_rest) {
    for (int k = 0; k < 45; ++k) out << "property float f_rest_" << k << "\n";
  }
  out << "property float opacity\n";
  for (int k = 0; k < 3; ++k) out << "property float scale_" << k << "\n";
  for (int k = 0; k < 4; ++k) out << "property float rot_" << k << "\n";
  out << "end_header\n";

  std::string body;
  const std::size_t floats = 9 + (with_rest ? 45 : 0) + 1 + 3 + 4;
  body.reserve(set.count * floats * 4);
  auto put = [&body](float f) {
    char raw[4];
    std::memcpy(raw, &f, 4);
    body.append(raw, 4);
  };
  for (std::size_t i = 0; i < set.count; ++i) {
    for (int k = 0; k < 3; ++k) put(set.means[i * 3 + k]);
    for (int k = 0; k < 3; ++k) put(0.0f);
    for (int k = 0; k < 3; ++k) put(set.sh(i, 0, k));
    if (with_rest) {
      for (std::size_t c = 0; c < 3; ++c) {
        for (std::size_t k = 1; k < kShCoeffs; ++k) put(set.sh(i, k, c));
      }
    }
    put(set.opacity_logits[i]);
    for (int k = 0; k < 3; ++k) put(set.log_scales[i * 3 + k]);
    for (int k = 0; k < 4; ++k) put(set.quaternions[i * 4 + k]);
  }
  return out.str() + body;
}

}  // namespace splatstream
