// Copyright Contributors to the splatlidar Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Narrow-band truncated signed distance from a binary occupancy volume:
// outside flood fill for the sign, layered 6-connected propagation from the
// occupancy boundary for the unsigned distance, clipping to the band.

#include "splatlidar/error.hpp"
#include "splatlidar/parallel.hpp"
#include "splatlidar/voxelizer.hpp"
#include "splatlidar/volume.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

namespace splatlidar {

struct Rethreshold {
  enum class Mode { kFixed, kQuantile };
  Mode mode = Mode::kFixed;
  double value = 0.5;  // tau for kFixed, q for kQuantile; both in (0,1)

  static Rethreshold fixed(double tau) { return {Mode::kFixed, tau}; }
  static Rethreshold quantile(double q) { return {Mode::kQuantile, q}; }
};

namespace detail {

inline std::vector<double> gaussian_taps(double sigma_vox) {
  const int radius = static_cast<int>(std::ceil(3.0 * sigma_vox));
  std::vector<double> taps(2 * radius + 1);
  double sum = 0.0;
  for (int k = -radius; k <= radius; ++k) {
    taps[k + radius] = std::exp(-0.5 * k * k / (sigma_vox * sigma_vox));
    sum += taps[k + radius];
  }
  for (auto& t : taps) t /= sum;
  return taps;
}

// One separable pass along `axis`, zero padded.
inline Volume<float> convolve_axis(const Volume<float>& in, int axis, const std::vector<double>& taps, unsigned workers) {
  const Index3 d = in.dims();
  Volume<float> out(d, 0.0f);
  const int radius = static_cast<int>(taps.size() / 2);
  const std::size_t lines = static_cast<std::size_t>(d[(axis + 1) % 3]) * d[(axis + 2) % 3];
  parallel_for(lines, workers, [&](std::size_t begin, std::size_t end) {
    for (std::size_t line = begin; line < end; ++line) {
      Index3 base{0, 0, 0};
      base[(axis + 1) % 3] = static_cast<int>(line % d[(axis + 1) % 3]);
      base[(axis + 2) % 3] = static_cast<int>(line / d[(axis + 1) % 3]);
      for (int x = 0; x < d[axis]; ++x) {
        double acc = 0.0;
        for (int k = -radius; k <= radius; ++k) {
          const int y = x + k;
          if (y < 0 || y >= d[axis]) continue;
          Index3 p = base;
          p[axis] = y;
          acc += taps[k + radius] * in(p[0], p[1], p[2]);
        }
        Index3 p = base;
        p[axis] = x;
        out(p[0], p[1], p[2]) = static_cast<float>(acc);
      }
    }
  });
  return out;
}

// Box dilation of a 0/1 volume by `radius[a]` cells along each axis.
inline Volume<std::uint8_t> dilate(const BitVolume& v, const Index3& radius) {
  const Index3 d = v.dims();
  Volume<std::uint8_t> cur(d, 0);
  for (int k = 0; k < d[2]; ++k)
    for (int j = 0; j < d[1]; ++j)
      for (int i = 0; i < d[0]; ++i) cur(i, j, k) = v.get(i, j, k) ? 1 : 0;
  for (int axis = 0; axis < 3; ++axis) {
    Volume<std::uint8_t> next(d, 0);
    for (int k = 0; k < d[2]; ++k)
      for (int j = 0; j < d[1]; ++j)
        for (int i = 0; i < d[0]; ++i) {
          if (!cur(i, j, k)) continue;
          Index3 p{i, j, k};
          const int c = p[axis];
          for (int x = std::max(0, c - radius[axis]); x <= std::min(d[axis] - 1, c + radius[axis]); ++x) {
            p[axis] = x;
            next(p[0], p[1], p[2]) = 1;
          }
        }
    cur = std::move(next);
  }
  return cur;
}

}  // namespace detail

/// Gaussian blur of V (sigma in metres, per-axis voxel units via the grid
/// spacing, taps truncated at 3 sigma and renormalised), then re-threshold.
/// The quantile is taken over voxels in the dilated support of V.
inline OccupancyVolume denoise_rethreshold(const OccupancyVolume& vol, double sigma_m, Rethreshold mode,
                                           unsigned workers = 0) {
  if (!(sigma_m >= 0.0)) fail(ErrorKind::kValidation, "denoise sigma must be >= 0");
  if (!(mode.value > 0.0 && mode.value < 1.0)) fail(ErrorKind::kValidation, "re-threshold value must be in (0,1)");
  const VoxelGrid& grid = vol.grid;
  const Index3 d = grid.dims;

  Volume<float> smoothed(d, 0.0f);
  for (int k = 0; k < d[2]; ++k)
    for (int j = 0; j < d[1]; ++j)
      for (int i = 0; i < d[0]; ++i) smoothed(i, j, k) = vol.occupancy.get(i, j, k) ? 1.0f : 0.0f;

  Index3 radius{0, 0, 0};
  if (sigma_m > 0.0) {
    for (int a = 0; a < 3; ++a) {
      const double sigma_vox = sigma_m / grid.spacing[a];
      const auto taps = detail::gaussian_taps(sigma_vox);
      radius[a] = static_cast<int>(taps.size() / 2);
      if (static_cast<int>(taps.size()) > d[a])
        fail(ErrorKind::kDegenerate, "denoise kernel (" + std::to_string(taps.size()) + " taps) is wider than the grid");
    }
    for (int a = 0; a < 3; ++a)
      smoothed = detail::convolve_axis(smoothed, a, detail::gaussian_taps(sigma_m / grid.spacing[a]), workers);
  }

  double threshold = mode.value;
  if (mode.mode == Rethreshold::Mode::kQuantile) {
    const auto support = detail::dilate(vol.occupancy, radius);
    std::vector<float> values;
    for (std::size_t idx = 0; idx < support.size(); ++idx)
      if (support[idx]) values.push_back(smoothed[idx]);
    if (values.empty()) {
      threshold = std::numeric_limits<double>::infinity();
    } else {
      const auto pos = static_cast<std::size_t>(std::floor(mode.value * static_cast<double>(values.size() - 1)));
      std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(pos), values.end());
      threshold = values[pos];
    }
  }

  OccupancyVolume out;
  out.grid = grid;
  out.occupancy = BitVolume(d);
  for (int k = 0; k < d[2]; ++k)
    for (int j = 0; j < d[1]; ++j)
      for (int i = 0; i < d[0]; ++i) {
        const float v = smoothed(i, j, k);
        if (v > 0.0f && v >= threshold) out.occupancy.set(i, j, k, true);
      }
  return out;
}

/// +1 for free voxels 6-connected to the grid frame, -1 for everything else
/// (occupied voxels and enclosed free cavities).
inline Volume<std::int8_t> flood_fill_sign(const OccupancyVolume& vol) {
  const Index3 d = vol.grid.dims;
  const auto& occ = vol.occupancy;
  Volume<std::int8_t> sign(d, -1);
  std::vector<Index3> queue;
  for (int k = 0; k < d[2]; ++k)
    for (int j = 0; j < d[1]; ++j)
      for (int i = 0; i < d[0]; ++i)
        if (vol.grid.on_frame(i, j, k) && !occ.get(i, j, k)) {
          sign(i, j, k) = 1;
          queue.push_back({i, j, k});
        }
  for (std::size_t head = 0; head < queue.size(); ++head) {
    const Index3 p = queue[head];
    for (const auto& n : kFaceNeighbors) {
      const int x = p[0] + n[0], y = p[1] + n[1], z = p[2] + n[2];
      if (!vol.grid.inside(x, y, z) || occ.get(x, y, z) || sign(x, y, z) == 1) continue;
      sign(x, y, z) = 1;
      queue.push_back({x, y, z});
    }
  }
  return sign;
}

inline constexpr std::int32_t kUnreachedShell = -1;

/// Voxels with at least one in-grid face neighbour of opposite occupancy.
inline BitVolume boundary_set(const OccupancyVolume& vol) {
  const Index3 d = vol.grid.dims;
  const auto& occ = vol.occupancy;
  BitVolume s0(d);
  for (int k = 0; k < d[2]; ++k)
    for (int j = 0; j < d[1]; ++j)
      for (int i = 0; i < d[0]; ++i) {
        const bool v = occ.get(i, j, k);
        for (const auto& n : kFaceNeighbors) {
          const int x = i + n[0], y = j + n[1], z = k + n[2];
          if (vol.grid.inside(x, y, z) && occ.get(x, y, z) != v) {
            s0.set(i, j, k, true);
            break;
          }
        }
      }
  return s0;
}

/// First-arrival shell index of a multi-source 6-connected BFS from the
/// boundary set (shell 0). Shells stop growing once kappa * v_min exceeds
/// `band_radius`; voxels never reached hold kUnreachedShell.
inline Volume<std::int32_t> layered_distance(const OccupancyVolume& vol,
                                             double band_radius = std::numeric_limits<double>::infinity()) {
  const Index3 d = vol.grid.dims;
  const double v_min = vol.grid.min_spacing();
  Volume<std::int32_t> shell(d, kUnreachedShell);
  const BitVolume s0 = boundary_set(vol);

  std::vector<Index3> current, next;
  for (int k = 0; k < d[2]; ++k)
    for (int j = 0; j < d[1]; ++j)
      for (int i = 0; i < d[0]; ++i)
        if (s0.get(i, j, k)) {
          shell(i, j, k) = 0;
          current.push_back({i, j, k});
        }
  if (current.empty())
    fail(ErrorKind::kDegenerate, "occupancy volume is all occupied or all free; distance is undefined");

  for (std::int32_t kappa = 1; !current.empty(); ++kappa) {
    if (static_cast<double>(kappa) * v_min > band_radius) break;
    next.clear();
    for (const auto& p : current)
      for (const auto& n : kFaceNeighbors) {
        const int x = p[0] + n[0], y = p[1] + n[1], z = p[2] + n[2];
        if (!vol.grid.inside(x, y, z) || shell(x, y, z) != kUnreachedShell) continue;
        shell(x, y, z) = kappa;
        next.push_back({x, y, z});
      }
    std::swap(current, next);
  }
  return shell;
}

/// Truncated signed distance phi = clip(s * kappa * v_min, -r, r), plus the
/// flood-fill sign it was assembled from.
struct SignedField {
  VoxelGrid grid;
  std::vector<float> phi;
  double band_radius = 0.0;
  std::vector<std::int8_t> sign;  // empty for analytic fields

  double v_min() const { return grid.min_spacing(); }

  /// Value the mesher contours. For shell-distance fields the boundary set
  /// holds phi = 0 on both sides of the interface, so each side is moved half
  /// a shell away from it: the zero crossing then sits midway between the
  /// last occupied and first free voxel centres. Analytic fields pass through.
  double level(std::size_t idx) const {
    if (sign.empty()) return phi[idx];
    return static_cast<double>(phi[idx]) + 0.5 * v_min() * sign[idx];
  }
  double level(int i, int j, int k) const { return level(grid.index(i, j, k)); }
};

/// Builds a sign-free field from a callable phi(world position).
template <typename Fn>
SignedField sample_field(const VoxelGrid& grid, double band_radius, Fn&& phi) {
  SignedField f;
  f.grid = grid;
  f.band_radius = band_radius;
  f.phi.resize(grid.count());
  for (int k = 0; k < grid.dims[2]; ++k)
    for (int j = 0; j < grid.dims[1]; ++j)
      for (int i = 0; i < grid.dims[0]; ++i)
        f.phi[grid.index(i, j, k)] =
            static_cast<float>(std::clamp(static_cast<double>(phi(grid.center(i, j, k))), -band_radius, band_radius));
  return f;
}

inline SignedField assemble_tsdf(const OccupancyVolume& vol, double band_radius) {
  if (!(band_radius > 0.0)) fail(ErrorKind::kValidation, "TSDF band radius must be positive");
  const auto sign = flood_fill_sign(vol);
  const auto shell = layered_distance(vol, band_radius);
  const double v_min = vol.grid.min_spacing();
  SignedField f;
  f.grid = vol.grid;
  f.band_radius = band_radius;
  f.phi.resize(vol.grid.count());
  f.sign = sign.data();
  for (std::size_t idx = 0; idx < f.phi.size(); ++idx) {
    const double s = sign[idx];
    const double delta = shell[idx] == kUnreachedShell ? band_radius : shell[idx] * v_min;
    f.phi[idx] = static_cast<float>(std::clamp(s * delta, -band_radius, band_radius));
  }
  return f;
}

}  // namespace splatlidar
