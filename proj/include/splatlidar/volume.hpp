// Copyright Contributors to the splatlidar Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "splatlidar/error.hpp"
#include "splatlidar/geometry.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace splatlidar {

using Index3 = std::array<int, 3>;

/// Regular lattice; voxel (i,j,k) is centred at origin + (idx + 1/2) * spacing.
struct VoxelGrid {
  Vec3 origin = Vec3::Zero();
  Vec3 spacing = Vec3::Ones();
  Index3 dims{0, 0, 0};

  std::size_t count() const {
    return static_cast<std::size_t>(dims[0]) * static_cast<std::size_t>(dims[1]) *
           static_cast<std::size_t>(dims[2]);
  }
  std::size_t index(int i, int j, int k) const {
    return static_cast<std::size_t>(i) +
           static_cast<std::size_t>(dims[0]) *
               (static_cast<std::size_t>(j) + static_cast<std::size_t>(dims[1]) * static_cast<std::size_t>(k));
  }
  Index3 coords(std::size_t idx) const {
    const std::size_t nx = dims[0], ny = dims[1];
    return {static_cast<int>(idx % nx), static_cast<int>((idx / nx) % ny), static_cast<int>(idx / (nx * ny))};
  }
  bool inside(int i, int j, int k) const {
    return i >= 0 && j >= 0 && k >= 0 && i < dims[0] && j < dims[1] && k < dims[2];
  }
  Vec3 center(int i, int j, int k) const {
    return origin + Vec3((i + 0.5) * spacing.x(), (j + 0.5) * spacing.y(), (k + 0.5) * spacing.z());
  }
  double min_spacing() const { return spacing.minCoeff(); }
  Aabb bounds() const {
    return {origin, origin + Vec3(dims[0] * spacing.x(), dims[1] * spacing.y(), dims[2] * spacing.z())};
  }
  bool on_frame(int i, int j, int k) const {
    return i == 0 || j == 0 || k == 0 || i == dims[0] - 1 || j == dims[1] - 1 || k == dims[2] - 1;
  }

  friend bool operator==(const VoxelGrid& a, const VoxelGrid& b) {
    return a.origin == b.origin && a.spacing == b.spacing && a.dims == b.dims;
  }
};

/// Grid covering `bounds` with cubic cells of edge `spacing`, plus one free
/// voxel of padding on every side.
inline VoxelGrid make_padded_grid(const Aabb& bounds, double spacing) {
  if (!(spacing > 0.0)) fail(ErrorKind::kValidation, "voxel spacing must be positive");
  if (bounds.empty()) fail(ErrorKind::kValidation, "cannot build a grid over an empty box");
  VoxelGrid g;
  g.spacing = Vec3::Constant(spacing);
  const Vec3 ext = bounds.extent();
  for (int a = 0; a < 3; ++a) {
    const double cells = std::ceil(ext[a] / spacing);
    g.dims[a] = static_cast<int>(std::max(1.0, cells)) + 2;
    // Centre the (slightly larger) lattice on the box.
    const double span = g.dims[a] * spacing;
    g.origin[a] = bounds.min[a] - 0.5 * (span - ext[a]);
  }
  return g;
}

/// Dense 3-array in x-fastest order.
template <typename T>
class Volume {
 public:
  Volume() = default;
  explicit Volume(Index3 dims, T fill = T{})
      : dims_(dims), data_(static_cast<std::size_t>(dims[0]) * dims[1] * dims[2], fill) {}

  const Index3& dims() const { return dims_; }
  std::size_t size() const { return data_.size(); }
  std::size_t index(int i, int j, int k) const {
    return static_cast<std::size_t>(i) +
           static_cast<std::size_t>(dims_[0]) * (static_cast<std::size_t>(j) + static_cast<std::size_t>(dims_[1]) * k);
  }

  T& operator()(int i, int j, int k) { return data_[index(i, j, k)]; }
  const T& operator()(int i, int j, int k) const { return data_[index(i, j, k)]; }
  T& operator[](std::size_t idx) { return data_[idx]; }
  const T& operator[](std::size_t idx) const { return data_[idx]; }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

  friend bool operator==(const Volume& a, const Volume& b) { return a.dims_ == b.dims_ && a.data_ == b.data_; }

 private:
  Index3 dims_{0, 0, 0};
  std::vector<T> data_;
};

/// Bit-packed binary volume. Every x-row starts on a fresh 64-bit word, so
/// writers that own disjoint (j,k) rows never share a word.
class BitVolume {
 public:
  BitVolume() = default;
  explicit BitVolume(Index3 dims)
      : dims_(dims),
        row_words_((static_cast<std::size_t>(dims[0]) + 63) / 64),
        words_(row_words_ * static_cast<std::size_t>(dims[1]) * static_cast<std::size_t>(dims[2]), 0) {}

  const Index3& dims() const { return dims_; }
  std::size_t size() const { return static_cast<std::size_t>(dims_[0]) * dims_[1] * dims_[2]; }

  bool get(int i, int j, int k) const {
    return (words_[word(j, k) + (static_cast<std::size_t>(i) >> 6)] >> (i & 63)) & 1u;
  }
  /// Out-of-grid reads are free (0).
  bool get_or_free(int i, int j, int k) const {
    if (i < 0 || j < 0 || k < 0 || i >= dims_[0] || j >= dims_[1] || k >= dims_[2]) return false;
    return get(i, j, k);
  }
  void set(int i, int j, int k, bool v) {
    std::uint64_t& w = words_[word(j, k) + (static_cast<std::size_t>(i) >> 6)];
    const std::uint64_t bit = std::uint64_t{1} << (i & 63);
    w = v ? (w | bit) : (w & ~bit);
  }

  bool get(std::size_t linear) const {
    const std::size_t nx = dims_[0], ny = dims_[1];
    return get(static_cast<int>(linear % nx), static_cast<int>((linear / nx) % ny), static_cast<int>(linear / (nx * ny)));
  }
  void set(std::size_t linear, bool v) {
    const std::size_t nx = dims_[0], ny = dims_[1];
    set(static_cast<int>(linear % nx), static_cast<int>((linear / nx) % ny), static_cast<int>(linear / (nx * ny)), v);
  }

  std::size_t count() const {
    std::size_t n = 0;
    for (auto w : words_) n += static_cast<std::size_t>(std::popcount(w));
    return n;
  }

  friend bool operator==(const BitVolume& a, const BitVolume& b) {
    return a.dims_ == b.dims_ && a.words_ == b.words_;
  }

 private:
  std::size_t word(int j, int k) const {
    return row_words_ * (static_cast<std::size_t>(j) + static_cast<std::size_t>(dims_[1]) * static_cast<std::size_t>(k));
  }

  Index3 dims_{0, 0, 0};
  std::size_t row_words_ = 0;
  std::vector<std::uint64_t> words_;
};

inline constexpr std::array<Index3, 6> kFaceNeighbors{{{-1, 0, 0}, {1, 0, 0}, {0, -1, 0}, {0, 1, 0}, {0, 0, -1}, {0, 0, 1}}};

}  // namespace splatlidar
