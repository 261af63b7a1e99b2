// Copyright Contributors to the splatlidar Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Raw volume dumps. 48-byte little-endian header:
//   char[4] magic ("FGVX" occupancy bits, "FGSD" float32 signed distance)
//   u32 version (1) | u32 dims[3] | f32 spacing[3] | f32 origin[3] | u32 reserved
// followed by the payload in x-fastest order. Occupancy is packed LSB-first,
// ceil(n/8) bytes; distances are one float32 per voxel.

#include "splatlidar/error.hpp"
#include "splatlidar/volume.hpp"

#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

namespace splatlidar {

inline constexpr std::size_t kVolumeHeaderBytes = 48;

namespace detail {

template <typename T>
void put_le(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big)
    for (std::size_t a = 0, b = sizeof(T) - 1; a < b; ++a, --b) std::swap(buf[a], buf[b]);
  out.append(buf, sizeof(T));
}

template <typename T>
T get_le(const std::string& in, std::size_t& pos) {
  if (pos + sizeof(T) > in.size()) fail(ErrorKind::kFormat, "truncated volume dump");
  char buf[sizeof(T)];
  std::memcpy(buf, in.data() + pos, sizeof(T));
  if constexpr (std::endian::native == std::endian::big)
    for (std::size_t a = 0, b = sizeof(T) - 1; a < b; ++a, --b) std::swap(buf[a], buf[b]);
  pos += sizeof(T);
  T v;
  std::memcpy(&v, buf, sizeof(T));
  return v;
}

inline std::string volume_header(const char magic[4], const VoxelGrid& g) {
  std::string h(magic, 4);
  put_le<std::uint32_t>(h, 1);
  for (int a = 0; a < 3; ++a) put_le<std::uint32_t>(h, static_cast<std::uint32_t>(g.dims[a]));
  for (int a = 0; a < 3; ++a) put_le<float>(h, static_cast<float>(g.spacing[a]));
  for (int a = 0; a < 3; ++a) put_le<float>(h, static_cast<float>(g.origin[a]));
  put_le<std::uint32_t>(h, 0);
  return h;
}

inline VoxelGrid parse_volume_header(const std::string& bytes, const char magic[4], std::size_t& pos) {
  if (bytes.size() < kVolumeHeaderBytes || std::memcmp(bytes.data(), magic, 4) != 0)
    fail(ErrorKind::kFormat, std::string("not a ") + std::string(magic, 4) + " volume dump");
  pos = 4;
  if (get_le<std::uint32_t>(bytes, pos) != 1) fail(ErrorKind::kFormat, "unsupported volume dump version");
  VoxelGrid g;
  for (int a = 0; a < 3; ++a) g.dims[a] = static_cast<int>(get_le<std::uint32_t>(bytes, pos));
  for (int a = 0; a < 3; ++a) g.spacing[a] = get_le<float>(bytes, pos);
  for (int a = 0; a < 3; ++a) g.origin[a] = get_le<float>(bytes, pos);
  get_le<std::uint32_t>(bytes, pos);
  return g;
}

inline void write_bytes(const std::string& path, const std::string& bytes) {
  std::ofstream f(path, std::ios::binary);
  if (!f) fail(ErrorKind::kIo, "cannot write '" + path + "'");
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) fail(ErrorKind::kIo, "write failed for '" + path + "'");
}

inline std::string read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot open '" + path + "'");
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace detail

inline std::string serialize_occupancy(const VoxelGrid& grid, const BitVolume& bits) {
  std::string out = detail::volume_header("FGVX", grid);
  const std::size_t n = grid.count();
  std::string payload((n + 7) / 8, '\0');
  for (std::size_t idx = 0; idx < n; ++idx) {
    const Index3 c = grid.coords(idx);
    if (bits.get(c[0], c[1], c[2])) payload[idx >> 3] = static_cast<char>(payload[idx >> 3] | (1 << (idx & 7)));
  }
  return out + payload;
}

struct OccupancyDump {
  VoxelGrid grid;
  BitVolume bits;
};

inline OccupancyDump parse_occupancy(const std::string& bytes) {
  std::size_t pos = 0;
  OccupancyDump d;
  d.grid = detail::parse_volume_header(bytes, "FGVX", pos);
  const std::size_t n = d.grid.count();
  if (bytes.size() != kVolumeHeaderBytes + (n + 7) / 8) fail(ErrorKind::kFormat, "occupancy dump has the wrong size");
  d.bits = BitVolume(d.grid.dims);
  for (std::size_t idx = 0; idx < n; ++idx) {
    if ((static_cast<unsigned char>(bytes[kVolumeHeaderBytes + (idx >> 3)]) >> (idx & 7)) & 1u) {
      const Index3 c = d.grid.coords(idx);
      d.bits.set(c[0], c[1], c[2], true);
    }
  }
  return d;
}

inline void save_occupancy(const std::string& path, const VoxelGrid& grid, const BitVolume& bits) {
  detail::write_bytes(path, serialize_occupancy(grid, bits));
}

inline OccupancyDump load_occupancy(const std::string& path) { return parse_occupancy(detail::read_bytes(path)); }

inline std::string serialize_distance(const VoxelGrid& grid, const std::vector<float>& phi) {
  std::string out = detail::volume_header("FGSD", grid);
  out.reserve(out.size() + phi.size() * 4);
  for (float v : phi) detail::put_le<float>(out, v);
  return out;
}

inline void save_distance(const std::string& path, const VoxelGrid& grid, const std::vector<float>& phi) {
  detail::write_bytes(path, serialize_distance(grid, phi));
}

struct DistanceDump {
  VoxelGrid grid;
  std::vector<float> phi;
};

inline DistanceDump parse_distance(const std::string& bytes) {
  std::size_t pos = 0;
  DistanceDump d;
  d.grid = detail::parse_volume_header(bytes, "FGSD", pos);
  const std::size_t n = d.grid.count();
  if (bytes.size() != kVolumeHeaderBytes + 4 * n) fail(ErrorKind::kFormat, "distance dump has the wrong size");
  d.phi.resize(n);
  for (std::size_t i = 0; i < n; ++i) d.phi[i] = detail::get_le<float>(bytes, pos);
  return d;
}

}  // namespace splatlidar
