// Copyright Contributors to the splatlidar Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "splatlidar/error.hpp"
#include "splatlidar/mesh.hpp"
#include "splatlidar/ply.hpp"

#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

namespace splatlidar {

namespace detail {

inline bool ends_with(const std::string& s, const std::string& suffix) {
  if (s.size() < suffix.size()) return false;
  for (std::size_t i = 0; i < suffix.size(); ++i)
    if (std::tolower(static_cast<unsigned char>(s[s.size() - suffix.size() + i])) != suffix[i]) return false;
  return true;
}

// Text that round-trips the float32 value.
inline std::string format_float(double v) {
  char buf[32];
  const float f = static_cast<float>(v);
  std::snprintf(buf, sizeof buf, "%.9g", static_cast<double>(f));
  return buf;
}

}  // namespace detail

/// Ascii OBJ with v / vn / f records (1-based, f a//a b//b c//c when normals
/// are present). Coordinates are written at float32 precision.
inline std::string serialize_obj(const TriangleMesh& m) {
  std::string out;
  out.reserve(m.vertex_count() * 40 + m.face_count() * 24);
  out += "# splatlidar mesh\n";
  for (const auto& v : m.vertices)
    out += "v " + detail::format_float(v.x()) + " " + detail::format_float(v.y()) + " " + detail::format_float(v.z()) + "\n";
  const bool normals = m.normals.size() == m.vertex_count() && !m.normals.empty();
  if (normals)
    for (const auto& n : m.normals)
      out += "vn " + detail::format_float(n.x()) + " " + detail::format_float(n.y()) + " " + detail::format_float(n.z()) + "\n";
  for (const auto& t : m.triangles) {
    out += "f";
    for (auto v : t) {
      const std::string idx = std::to_string(v + 1);
      out += " " + idx;
      if (normals) out += "//" + idx;
    }
    out += "\n";
  }
  return out;
}

inline TriangleMesh parse_obj(const std::string& text) {
  TriangleMesh m;
  std::vector<Vec3> normals;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag) || tag[0] == '#') continue;
    if (tag == "v" || tag == "vn") {
      Vec3 p;
      if (!(ls >> p.x() >> p.y() >> p.z()))
        fail(ErrorKind::kFormat, "OBJ line " + std::to_string(line_no) + ": bad " + tag + " record");
      (tag == "v" ? m.vertices : normals).push_back(p);
    } else if (tag == "f") {
      std::vector<std::uint32_t> poly;
      std::string tok;
      while (ls >> tok) {
        const long idx = std::stol(tok.substr(0, tok.find('/')));
        const long resolved = idx < 0 ? static_cast<long>(m.vertices.size()) + idx : idx - 1;
        if (resolved < 0 || resolved >= static_cast<long>(m.vertices.size()))
          fail(ErrorKind::kFormat, "OBJ line " + std::to_string(line_no) + ": vertex index out of range");
        poly.push_back(static_cast<std::uint32_t>(resolved));
      }
      if (poly.size() < 3) fail(ErrorKind::kFormat, "OBJ line " + std::to_string(line_no) + ": face with < 3 vertices");
      for (std::size_t k = 1; k + 1 < poly.size(); ++k) m.triangles.push_back({poly[0], poly[k], poly[k + 1]});
    }
  }
  if (normals.size() == m.vertices.size()) m.normals = std::move(normals);
  return m;
}

/// Binary little-endian PLY: float32 x,y,z (+ nx,ny,nz), int32 face indices.
inline std::string serialize_mesh_ply(const TriangleMesh& m) {
  using ply::Type;
  const bool normals = m.normals.size() == m.vertex_count() && !m.normals.empty();
  ply::Writer w("splatlidar mesh");
  std::vector<std::pair<std::string, Type>> props{{"x", Type::kFloat32}, {"y", Type::kFloat32}, {"z", Type::kFloat32}};
  if (normals) {
    props.push_back({"nx", Type::kFloat32});
    props.push_back({"ny", Type::kFloat32});
    props.push_back({"nz", Type::kFloat32});
  }
  w.element("vertex", m.vertex_count(), props);
  w.element("face", m.face_count(), {}, std::make_pair(Type::kUInt8, Type::kInt32), "vertex_indices");
  for (std::size_t v = 0; v < m.vertex_count(); ++v) {
    for (int a = 0; a < 3; ++a) w.put(static_cast<float>(m.vertices[v][a]));
    if (normals)
      for (int a = 0; a < 3; ++a) w.put(static_cast<float>(m.normals[v][a]));
  }
  for (const auto& t : m.triangles) {
    w.put(static_cast<std::uint8_t>(3));
    for (auto v : t) w.put(static_cast<std::int32_t>(v));
  }
  return w.str();
}

inline TriangleMesh parse_mesh_ply(std::string_view bytes) {
  const ply::Header h = ply::parse_header(bytes);
  const ply::Element* vertex = h.find("vertex");
  const ply::Element* face = h.find("face");
  if (!vertex) fail(ErrorKind::kFormat, "mesh PLY has no 'vertex' element");
  if (!face) fail(ErrorKind::kFormat, "mesh PLY has no 'face' element");
  std::string list_name = face->find("vertex_indices") ? "vertex_indices" : "vertex_index";
  const bool has_normals = vertex->find("nx") && vertex->find("ny") && vertex->find("nz");
  std::vector<std::string> vprops{"x", "y", "z"};
  if (has_normals) vprops.insert(vprops.end(), {"nx", "ny", "nz"});
  auto data = ply::read(bytes, h, {{"vertex", vprops, {}}, {"face", {}, {list_name}}});
  const auto& vc = data.at("vertex").scalars;
  TriangleMesh m;
  m.vertices.resize(vertex->count);
  for (std::size_t i = 0; i < vertex->count; ++i) m.vertices[i] = {vc.at("x")[i], vc.at("y")[i], vc.at("z")[i]};
  if (has_normals) {
    m.normals.resize(vertex->count);
    for (std::size_t i = 0; i < vertex->count; ++i) m.normals[i] = {vc.at("nx")[i], vc.at("ny")[i], vc.at("nz")[i]};
  }
  const auto& fd = data.at("face");
  const auto& vals = fd.list_values.at(list_name);
  const auto& offs = fd.list_offsets.at(list_name);
  for (std::size_t f = 0; f + 1 < offs.size(); ++f) {
    const std::size_t n = offs[f + 1] - offs[f];
    if (n < 3) fail(ErrorKind::kFormat, "mesh PLY face " + std::to_string(f) + " has fewer than 3 vertices");
    for (std::size_t k = offs[f]; k < offs[f + 1]; ++k)
      if (vals[k] < 0 || static_cast<std::size_t>(vals[k]) >= m.vertices.size())
        fail(ErrorKind::kFormat, "mesh PLY face " + std::to_string(f) + " indexes a missing vertex");
    for (std::size_t k = 1; k + 1 < n; ++k)
      m.triangles.push_back({static_cast<std::uint32_t>(vals[offs[f]]), static_cast<std::uint32_t>(vals[offs[f] + k]),
                             static_cast<std::uint32_t>(vals[offs[f] + k + 1])});
  }
  return m;
}

inline void save_mesh(const std::string& path, const TriangleMesh& m) {
  const std::string bytes = detail::ends_with(path, ".obj") ? serialize_obj(m) : serialize_mesh_ply(m);
  std::ofstream f(path, std::ios::binary);
  if (!f) fail(ErrorKind::kIo, "cannot write '" + path + "'");
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) fail(ErrorKind::kIo, "write failed for '" + path + "'");
}

inline TriangleMesh load_mesh(const std::string& path) {
  const std::string bytes = ply::read_file(path);
  if (detail::ends_with(path, ".obj")) return parse_obj(bytes);
  return parse_mesh_ply(bytes);
}

}  // namespace splatlidar
