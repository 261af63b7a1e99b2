// Copyright Contributors to the splatlidar Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Scan outputs and sensor descriptions.
//
// Range image ("FGRI", little-endian):
//   char[4] "FGRI" | u32 channels | u32 azimuth_steps | f32 sentinel (+inf)
// followed by channels * azimuth_steps float32 ranges, row-major by channel.
// Misses store the sentinel.

#include "splatlidar/error.hpp"
#include "splatlidar/lidar.hpp"
#include "splatlidar/mesh_io.hpp"
#include "splatlidar/ply.hpp"
#include "splatlidar/volume_io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace splatlidar {

inline std::string serialize_range_image(const ScanFrame& f) {
  std::string out("FGRI", 4);
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(f.channels));
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(f.azimuth_steps));
  detail::put_le<float>(out, std::numeric_limits<float>::infinity());
  out.reserve(out.size() + 4 * f.ranges.size());
  for (std::size_t j = 0; j < f.ranges.size(); ++j)
    detail::put_le<float>(out, f.hit_mask[j] ? static_cast<float>(f.ranges[j]) : std::numeric_limits<float>::infinity());
  return out;
}

struct RangeImage {
  std::uint32_t channels = 0;
  std::uint32_t azimuth_steps = 0;
  float sentinel = 0.0f;
  std::vector<float> ranges;
};

inline RangeImage parse_range_image(const std::string& bytes) {
  if (bytes.size() < 16 || bytes.compare(0, 4, "FGRI") != 0) fail(ErrorKind::kFormat, "not an FGRI range image");
  std::size_t pos = 4;
  RangeImage r;
  r.channels = detail::get_le<std::uint32_t>(bytes, pos);
  r.azimuth_steps = detail::get_le<std::uint32_t>(bytes, pos);
  r.sentinel = detail::get_le<float>(bytes, pos);
  const std::size_t n = static_cast<std::size_t>(r.channels) * r.azimuth_steps;
  if (bytes.size() != pos + 4 * n) fail(ErrorKind::kFormat, "FGRI payload size does not match its header");
  r.ranges.resize(n);
  for (auto& v : r.ranges) v = detail::get_le<float>(bytes, pos);
  return r;
}

inline void save_range_image(const std::string& path, const ScanFrame& f) {
  detail::write_bytes(path, serialize_range_image(f));
}

inline std::string serialize_points_ply(const std::vector<Vec3>& pts) {
  ply::Writer w;
  w.element("vertex", pts.size(), {{"x", ply::Type::kFloat32}, {"y", ply::Type::kFloat32}, {"z", ply::Type::kFloat32}});
  for (const auto& p : pts)
    for (int a = 0; a < 3; ++a) w.put(static_cast<float>(p[a]));
  return w.str();
}

inline std::string serialize_points_xyz(const std::vector<Vec3>& pts) {
  std::string out;
  char buf[96];
  for (const auto& p : pts) {
    const int n = std::snprintf(buf, sizeof buf, "%.9g %.9g %.9g\n", round_to_float(p.x()),
                                round_to_float(p.y()), round_to_float(p.z()));
    out.append(buf, static_cast<std::size_t>(n));
  }
  return out;
}

/// Writes .xyz as ascii, anything else as binary PLY.
inline void save_points(const std::string& path, const std::vector<Vec3>& pts) {
  detail::write_bytes(path, detail::ends_with(path, ".xyz") ? serialize_points_xyz(pts) : serialize_points_ply(pts));
}

inline std::vector<Vec3> parse_points_xyz(std::string_view text) {
  std::vector<Vec3> pts;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ls(line);
    Vec3 p;
    if (!(ls >> p.x() >> p.y() >> p.z())) fail(ErrorKind::kParse, "XYZ line " + std::to_string(lineno) + " needs three numbers");
    pts.push_back(p);
  }
  return pts;
}

inline std::vector<Vec3> parse_points_ply(std::string_view bytes) {
  const ply::Header h = ply::parse_header(bytes);
  auto data = ply::read(bytes, h, {{"vertex", {"x", "y", "z"}, {}}});
  const auto& c = data.at("vertex").scalars;
  std::vector<Vec3> pts(data.at("vertex").count);
  for (std::size_t i = 0; i < pts.size(); ++i) pts[i] = {c.at("x")[i], c.at("y")[i], c.at("z")[i]};
  return pts;
}

inline std::vector<Vec3> load_points(const std::string& path) {
  const std::string bytes = ply::read_file(path);
  return detail::ends_with(path, ".xyz") ? parse_points_xyz(bytes) : parse_points_ply(bytes);
}

namespace detail {

inline std::vector<double> parse_numbers(std::string_view s, ErrorKind kind, const std::string& what) {
  std::vector<double> out;
  std::string tok;
  auto flush = [&] {
    if (tok.empty()) return;
    double v = 0.0;
    const auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || p != tok.data() + tok.size()) fail(kind, what + ": '" + tok + "' is not a number");
    out.push_back(v);
    tok.clear();
  };
  for (char c : s) {
    if (c == ',' || c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == ';') flush();
    else tok.push_back(c);
  }
  flush();
  return out;
}

inline std::string trim(std::string_view s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string_view::npos) return {};
  const auto b = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(a, b - a + 1));
}

/// key=value lines; '#' starts a comment. Duplicate keys are an error.
inline std::vector<std::pair<std::string, std::string>> parse_key_values(std::string_view text, const std::string& what) {
  std::vector<std::pair<std::string, std::string>> kv;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  std::map<std::string, bool> seen;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) fail(ErrorKind::kParse, what + " line " + std::to_string(lineno) + ": expected key=value");
    std::string key = trim(t.substr(0, eq));
    if (key.empty()) fail(ErrorKind::kParse, what + " line " + std::to_string(lineno) + ": empty key");
    if (seen[key]) fail(ErrorKind::kParse, what + " line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
    seen[key] = true;
    kv.emplace_back(std::move(key), trim(t.substr(eq + 1)));
  }
  return kv;
}

inline double parse_scalar(const std::string& s, ErrorKind kind, const std::string& what) {
  auto v = parse_numbers(s, kind, what);
  if (v.size() != 1) fail(kind, what + " expects a single number, got '" + s + "'");
  return v[0];
}

inline int parse_int(const std::string& s, ErrorKind kind, const std::string& what) {
  const double v = parse_scalar(s, kind, what);
  if (v != std::floor(v) || std::abs(v) > 2e9) fail(kind, what + " expects an integer, got '" + s + "'");
  return static_cast<int>(v);
}

}  // namespace detail

/// Sensor description file. Keys: preset (optional base), name, channels,
/// elevations (list, degrees) or elevation_min / elevation_max, azimuth_steps,
/// t_min, t_max.
inline ScanPattern parse_sensor_config(std::string_view text) {
  const auto kv = detail::parse_key_values(text, "sensor config");
  std::map<std::string, std::string> m(kv.begin(), kv.end());
  for (const auto& [k, v] : kv)
    if (k != "preset" && k != "name" && k != "channels" && k != "elevations" && k != "elevation_min" &&
        k != "elevation_max" && k != "azimuth_steps" && k != "t_min" && k != "t_max")
      fail(ErrorKind::kParse, "sensor config: unknown key '" + k + "'");
  ScanPattern p;
  if (m.count("preset")) p = make_pattern(m["preset"]);
  if (m.count("name")) p.name = m["name"];
  const auto kind = ErrorKind::kValidation;
  if (m.count("elevations")) {
    if (m.count("elevation_min") || m.count("elevation_max"))
      fail(ErrorKind::kParse, "sensor config: give either elevations or elevation_min/elevation_max");
    p.elevation_deg = detail::parse_numbers(m["elevations"], ErrorKind::kParse, "sensor config elevations");
    if (m.count("channels") && detail::parse_int(m["channels"], kind, "channels") != p.channels())
      fail(kind, "sensor config: channels does not match the number of elevations");
  } else if (m.count("elevation_min") || m.count("elevation_max") || m.count("channels")) {
    if (!m.count("elevation_min") || !m.count("elevation_max") || !m.count("channels"))
      fail(ErrorKind::kParse, "sensor config: channels, elevation_min and elevation_max go together");
    p.elevation_deg = uniform_elevations(detail::parse_int(m["channels"], kind, "channels"),
                                         detail::parse_scalar(m["elevation_min"], ErrorKind::kParse, "elevation_min"),
                                         detail::parse_scalar(m["elevation_max"], ErrorKind::kParse, "elevation_max"));
  }
  if (m.count("azimuth_steps")) p.azimuth_steps = detail::parse_int(m["azimuth_steps"], kind, "azimuth_steps");
  if (m.count("t_min")) p.t_min = detail::parse_scalar(m["t_min"], ErrorKind::kParse, "t_min");
  if (m.count("t_max")) p.t_max = detail::parse_scalar(m["t_max"], ErrorKind::kParse, "t_max");
  p.validate();
  return p;
}

inline std::string serialize_sensor_config(const ScanPattern& p) {
  std::ostringstream o;
  o.precision(17);
  o << "name=" << p.name << "\nchannels=" << p.channels() << "\nelevations=";
  for (int c = 0; c < p.channels(); ++c) o << (c ? "," : "") << p.elevation_deg[c];
  o << "\nazimuth_steps=" << p.azimuth_steps << "\nt_min=" << p.t_min << "\nt_max=" << p.t_max << "\n";
  return o.str();
}

/// Preset name or path to a sensor config file.
inline ScanPattern resolve_pattern(const std::string& name) {
  if (name == "HDL64" || name == "OS128" || name == "VLP32") return make_pattern(name);
  std::ifstream probe(name);
  if (!probe) fail(ErrorKind::kUsage, "'" + name + "' is neither a preset (HDL64, OS128, VLP32) nor a readable sensor config");
  return parse_sensor_config(ply::read_file(name));
}

/// "tx,ty,tz,qw,qx,qy,qz" or sixteen numbers of a row-major 4x4 matrix.
inline SensorPose parse_pose(std::string_view text) {
  const std::vector<double> v = detail::parse_numbers(text, ErrorKind::kUsage, "pose");
  SensorPose pose;
  for (double x : v)
    if (!std::isfinite(x)) fail(ErrorKind::kUsage, "pose contains a non-finite value");
  if (v.size() == 7) {
    Eigen::Quaterniond q(v[3], v[4], v[5], v[6]);
    if (q.norm() < 1e-12) fail(ErrorKind::kUsage, "pose quaternion has zero norm");
    pose.rotation = q.normalized().toRotationMatrix();
    pose.translation = {v[0], v[1], v[2]};
  } else if (v.size() == 16) {
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) pose.rotation(r, c) = v[4 * r + c];
    pose.translation = {v[3], v[7], v[11]};
    if (v[12] != 0.0 || v[13] != 0.0 || v[14] != 0.0 || v[15] != 1.0)
      fail(ErrorKind::kUsage, "pose matrix bottom row must be 0 0 0 1");
  } else {
    fail(ErrorKind::kUsage, "pose needs 7 numbers (tx,ty,tz,qw,qx,qy,qz) or 16 (row-major 4x4), got " +
                                std::to_string(v.size()));
  }
  pose.validate();
  return pose;
}

inline std::string format_pose(const SensorPose& p) {
  const Eigen::Quaterniond q(p.rotation);
  std::ostringstream o;
  o.precision(17);
  o << p.translation.x() << "," << p.translation.y() << "," << p.translation.z() << "," << q.w() << "," << q.x() << ","
    << q.y() << "," << q.z();
  return o.str();
}

}  // namespace splatlidar
