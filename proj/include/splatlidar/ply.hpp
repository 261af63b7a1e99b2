// Copyright Contributors to the splatlidar Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Header-driven PLY reader/writer shared by the Gaussian, mesh and point-cloud
// loaders. Only the requested properties are decoded; everything else is
// skipped by stride (binary) or by token count (ascii).

#include "splatlidar/error.hpp"
#include "splatlidar/geometry.hpp"

#include <bit>
#include <cctype>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace splatlidar::ply {

enum class Format { kAscii, kBinaryLittleEndian, kBinaryBigEndian };

enum class Type { kInt8, kUInt8, kInt16, kUInt16, kInt32, kUInt32, kFloat32, kFloat64 };

inline std::size_t type_size(Type t) {
  switch (t) {
    case Type::kInt8:
    case Type::kUInt8:
      return 1;
    case Type::kInt16:
    case Type::kUInt16:
      return 2;
    case Type::kInt32:
    case Type::kUInt32:
    case Type::kFloat32:
      return 4;
    case Type::kFloat64:
      return 8;
  }
  return 0;
}

inline std::optional<Type> parse_type(std::string_view s) {
  static const std::map<std::string_view, Type> kNames{
      {"char", Type::kInt8},     {"int8", Type::kInt8},       {"uchar", Type::kUInt8},    {"uint8", Type::kUInt8},
      {"short", Type::kInt16},   {"int16", Type::kInt16},     {"ushort", Type::kUInt16},  {"uint16", Type::kUInt16},
      {"int", Type::kInt32},     {"int32", Type::kInt32},     {"uint", Type::kUInt32},    {"uint32", Type::kUInt32},
      {"float", Type::kFloat32}, {"float32", Type::kFloat32}, {"double", Type::kFloat64}, {"float64", Type::kFloat64}};
  auto it = kNames.find(s);
  if (it == kNames.end()) return std::nullopt;
  return it->second;
}

struct Property {
  std::string name;
  Type type = Type::kFloat32;
  bool is_list = false;
  Type count_type = Type::kUInt8;
};

struct Element {
  std::string name;
  std::size_t count = 0;
  std::vector<Property> properties;

  const Property* find(std::string_view prop) const {
    for (const auto& p : properties)
      if (p.name == prop) return &p;
    return nullptr;
  }
};

struct Header {
  Format format = Format::kBinaryLittleEndian;
  std::vector<Element> elements;
  std::size_t data_offset = 0;  // first byte after "end_header\n"

  const Element* find(std::string_view name) const {
    for (const auto& e : elements)
      if (e.name == name) return &e;
    return nullptr;
  }
};

[[noreturn]] inline void parse_error(std::size_t offset, const std::string& msg) {
  fail(ErrorKind::kParse, "PLY parse error at byte " + std::to_string(offset) + ": " + msg);
}

/// Parses the ascii header at the start of `bytes`.
inline Header parse_header(std::string_view bytes) {
  Header h;
  std::size_t pos = 0;
  auto next_line = [&](std::size_t& line_start) -> std::string_view {
    line_start = pos;
    const std::size_t nl = bytes.find('\n', pos);
    if (nl == std::string_view::npos) parse_error(pos, "unterminated header (missing end_header)");
    std::string_view line = bytes.substr(pos, nl - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    pos = nl + 1;
    return line;
  };
  auto split = [](std::string_view line) {
    std::vector<std::string_view> tok;
    std::size_t i = 0;
    while (i < line.size()) {
      while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
      std::size_t j = i;
      while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
      if (j > i) tok.push_back(line.substr(i, j - i));
      i = j;
    }
    return tok;
  };

  std::size_t at = 0;
  if (next_line(at) != "ply") parse_error(0, "missing 'ply' magic");
  bool have_format = false;
  for (;;) {
    const std::string_view line = next_line(at);
    const auto tok = split(line);
    if (tok.empty()) continue;
    if (tok[0] == "end_header") break;
    if (tok[0] == "comment" || tok[0] == "obj_info") continue;
    if (tok[0] == "format") {
      if (tok.size() < 2) parse_error(at, "format line without a format name");
      if (tok[1] == "ascii")
        h.format = Format::kAscii;
      else if (tok[1] == "binary_little_endian")
        h.format = Format::kBinaryLittleEndian;
      else if (tok[1] == "binary_big_endian")
        h.format = Format::kBinaryBigEndian;
      else
        parse_error(at, "unknown format '" + std::string(tok[1]) + "'");
      have_format = true;
    } else if (tok[0] == "element") {
      if (tok.size() != 3) parse_error(at, "element line needs a name and a count");
      Element e;
      e.name = std::string(tok[1]);
      std::uint64_t n = 0;
      auto [p, ec] = std::from_chars(tok[2].data(), tok[2].data() + tok[2].size(), n);
      if (ec != std::errc{} || p != tok[2].data() + tok[2].size()) parse_error(at, "bad element count");
      e.count = static_cast<std::size_t>(n);
      h.elements.push_back(std::move(e));
    } else if (tok[0] == "property") {
      if (h.elements.empty()) parse_error(at, "property before any element");
      Property prop;
      if (tok.size() >= 2 && tok[1] == "list") {
        if (tok.size() != 5) parse_error(at, "list property needs count type, item type and name");
        auto ct = parse_type(tok[2]);
        auto it = parse_type(tok[3]);
        if (!ct || !it) parse_error(at, "unknown list property type");
        prop.is_list = true;
        prop.count_type = *ct;
        prop.type = *it;
        prop.name = std::string(tok[4]);
      } else {
        if (tok.size() != 3) parse_error(at, "property line needs a type and a name");
        auto t = parse_type(tok[1]);
        if (!t) parse_error(at, "unknown property type '" + std::string(tok[1]) + "'");
        prop.type = *t;
        prop.name = std::string(tok[2]);
      }
      h.elements.back().properties.push_back(std::move(prop));
    } else {
      parse_error(at, "unexpected header keyword '" + std::string(tok[0]) + "'");
    }
  }
  if (!have_format) parse_error(0, "header has no format line");
  h.data_offset = pos;
  return h;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot open '" + path + "'");
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

/// Decoded columns for one element.
struct ElementData {
  std::size_t count = 0;
  std::map<std::string, std::vector<double>> scalars;
  // Flattened list values; item r spans [list_offsets[r], list_offsets[r+1]).
  std::map<std::string, std::vector<std::int64_t>> list_values;
  std::map<std::string, std::vector<std::size_t>> list_offsets;
};

struct Request {
  std::string element;
  std::vector<std::string> scalars;
  std::vector<std::string> lists;
};

namespace detail {

class Cursor {
 public:
  Cursor(std::string_view bytes, std::size_t pos, Format fmt) : bytes_(bytes), pos_(pos), fmt_(fmt) {}

  double read(Type t) {
    if (fmt_ == Format::kAscii) {
      const double v = read_ascii();
      return t == Type::kFloat32 ? round_to_float(v) : v;
    }
    const std::size_t n = type_size(t);
    if (pos_ + n > bytes_.size()) parse_error(pos_, "unexpected end of data");
    unsigned char buf[8];
    std::memcpy(buf, bytes_.data() + pos_, n);
    const bool swap = (fmt_ == Format::kBinaryBigEndian) == (std::endian::native == std::endian::little);
    if (swap)
      for (std::size_t a = 0, b = n - 1; a < b; ++a, --b) std::swap(buf[a], buf[b]);
    pos_ += n;
    switch (t) {
      case Type::kInt8: { std::int8_t v; std::memcpy(&v, buf, 1); return v; }
      case Type::kUInt8: { std::uint8_t v; std::memcpy(&v, buf, 1); return v; }
      case Type::kInt16: { std::int16_t v; std::memcpy(&v, buf, 2); return v; }
      case Type::kUInt16: { std::uint16_t v; std::memcpy(&v, buf, 2); return v; }
      case Type::kInt32: { std::int32_t v; std::memcpy(&v, buf, 4); return v; }
      case Type::kUInt32: { std::uint32_t v; std::memcpy(&v, buf, 4); return v; }
      case Type::kFloat32: { float v; std::memcpy(&v, buf, 4); return v; }
      case Type::kFloat64: { double v; std::memcpy(&v, buf, 8); return v; }
    }
    return 0.0;
  }

  void skip(Type t) {
    if (fmt_ == Format::kAscii) {
      read_ascii();
      return;
    }
    const std::size_t n = type_size(t);
    if (pos_ + n > bytes_.size()) parse_error(pos_, "unexpected end of data");
    pos_ += n;
  }

 private:
  double read_ascii() {
    while (pos_ < bytes_.size() && std::isspace(static_cast<unsigned char>(bytes_[pos_]))) ++pos_;
    if (pos_ >= bytes_.size()) parse_error(pos_, "unexpected end of ascii data");
    std::size_t end = pos_;
    while (end < bytes_.size() && !std::isspace(static_cast<unsigned char>(bytes_[end]))) ++end;
    double v = 0.0;
    auto [p, ec] = std::from_chars(bytes_.data() + pos_, bytes_.data() + end, v);
    if (ec != std::errc{} || p != bytes_.data() + end) parse_error(pos_, "bad ascii number");
    pos_ = end;
    return v;
  }

  std::string_view bytes_;
  std::size_t pos_;
  Format fmt_;
};

}  // namespace detail

/// Decodes the requested properties of the requested elements. Missing
/// elements or properties are format errors that name the culprit.
inline std::map<std::string, ElementData> read(std::string_view bytes, const Header& h,
                                               const std::vector<Request>& requests) {
  for (const auto& r : requests) {
    const Element* e = h.find(r.element);
    if (!e) fail(ErrorKind::kFormat, "PLY has no element '" + r.element + "'");
    for (const auto& s : r.scalars) {
      const Property* p = e->find(s);
      if (!p || p->is_list) fail(ErrorKind::kFormat, "PLY element '" + r.element + "' is missing property '" + s + "'");
    }
    for (const auto& s : r.lists) {
      const Property* p = e->find(s);
      if (!p || !p->is_list)
        fail(ErrorKind::kFormat, "PLY element '" + r.element + "' is missing list property '" + s + "'");
    }
  }

  std::map<std::string, ElementData> out;
  detail::Cursor cur(bytes, h.data_offset, h.format);
  for (const auto& e : h.elements) {
    const Request* req = nullptr;
    for (const auto& r : requests)
      if (r.element == e.name) req = &r;
    // Elements after the last requested one need not be walked.
    bool later_needed = false;
    for (const auto& r : requests) {
      if (out.count(r.element) == 0) later_needed = true;
    }
    if (!later_needed) break;

    // Column slots per property (nullptr = skip).
    std::vector<std::vector<double>*> scalar_slot(e.properties.size(), nullptr);
    std::vector<std::vector<std::int64_t>*> list_slot(e.properties.size(), nullptr);
    std::vector<std::vector<std::size_t>*> offset_slot(e.properties.size(), nullptr);
    ElementData* data = nullptr;
    if (req) {
      data = &out[e.name];
      data->count = e.count;
      for (std::size_t p = 0; p < e.properties.size(); ++p) {
        const auto& prop = e.properties[p];
        for (const auto& s : req->scalars)
          if (!prop.is_list && prop.name == s) {
            scalar_slot[p] = &data->scalars[s];
            scalar_slot[p]->reserve(e.count);
          }
        for (const auto& s : req->lists)
          if (prop.is_list && prop.name == s) {
            list_slot[p] = &data->list_values[s];
            offset_slot[p] = &data->list_offsets[s];
            offset_slot[p]->reserve(e.count + 1);
            offset_slot[p]->push_back(0);
          }
      }
    }
    for (std::size_t row = 0; row < e.count; ++row) {
      for (std::size_t p = 0; p < e.properties.size(); ++p) {
        const auto& prop = e.properties[p];
        if (prop.is_list) {
          const double n_items = cur.read(prop.count_type);
          if (n_items < 0) parse_error(0, "negative list length in element '" + e.name + "'");
          const auto n = static_cast<std::size_t>(n_items);
          for (std::size_t q = 0; q < n; ++q) {
            if (list_slot[p])
              list_slot[p]->push_back(static_cast<std::int64_t>(cur.read(prop.type)));
            else
              cur.skip(prop.type);
          }
          if (offset_slot[p]) offset_slot[p]->push_back(list_slot[p]->size());
        } else if (scalar_slot[p]) {
          scalar_slot[p]->push_back(cur.read(prop.type));
        } else {
          cur.skip(prop.type);
        }
      }
    }
  }
  return out;
}

/// Little-endian binary writer. Values are appended row by row by the caller.
class Writer {
 public:
  explicit Writer(std::string comment = {}) : comment_(std::move(comment)) {}

  void element(const std::string& name, std::size_t count, const std::vector<std::pair<std::string, Type>>& props,
               std::optional<std::pair<Type, Type>> list = std::nullopt, const std::string& list_name = {}) {
    header_ << "element " << name << " " << count << "\n";
    for (const auto& [pn, pt] : props) header_ << "property " << type_name(pt) << " " << pn << "\n";
    if (list) header_ << "property list " << type_name(list->first) << " " << type_name(list->second) << " " << list_name << "\n";
  }

  template <typename T>
  void put(T value) {
    static_assert(std::is_trivially_copyable_v<T>);
    char buf[sizeof(T)];
    std::memcpy(buf, &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big)
      for (std::size_t a = 0, b = sizeof(T) - 1; a < b; ++a, --b) std::swap(buf[a], buf[b]);
    body_.append(buf, sizeof(T));
  }

  std::string str() const {
    std::string out = "ply\nformat binary_little_endian 1.0\n";
    if (!comment_.empty()) out += "comment " + comment_ + "\n";
    out += header_.str();
    out += "end_header\n";
    out += body_;
    return out;
  }

  void save(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) fail(ErrorKind::kIo, "cannot write '" + path + "'");
    const std::string s = str();
    f.write(s.data(), static_cast<std::streamsize>(s.size()));
    if (!f) fail(ErrorKind::kIo, "write failed for '" + path + "'");
  }

  static const char* type_name(Type t) {
    switch (t) {
      case Type::kInt8: return "char";
      case Type::kUInt8: return "uchar";
      case Type::kInt16: return "short";
      case Type::kUInt16: return "ushort";
      case Type::kInt32: return "int";
      case Type::kUInt32: return "uint";
      case Type::kFloat32: return "float";
      case Type::kFloat64: return "double";
    }
    return "float";
  }

 private:
  std::string comment_;
  std::ostringstream header_;
  std::string body_;
};

}  // namespace splatlidar::ply
