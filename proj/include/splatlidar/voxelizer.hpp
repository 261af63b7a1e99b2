// Copyright Contributors to the splatlidar Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "splatlidar/error.hpp"
#include "splatlidar/gaussian.hpp"
#include "splatlidar/lbvh.hpp"
#include "splatlidar/parallel.hpp"
#include "splatlidar/volume.hpp"

#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace splatlidar {

struct OccupancyVolume {
  VoxelGrid grid;
  BitVolume occupancy;
  std::optional<Volume<float>> density;  // kept on request

  bool occupied(int i, int j, int k) const { return occupancy.get(i, j, k); }
};

using OpacityWeight = std::function<double(double)>;

struct VoxelizeOptions {
  double spacing = 0.0;  // <= 0: longest extent / 512
  double theta = 0.5;
  int tile = 8;
  double kappa = kDefaultKappa;
  bool keep_density = false;
  std::size_t cell_budget = std::size_t{1024} * 1024 * 1024;
  unsigned workers = 0;
  OpacityWeight opacity_weight;  // empty: identity on activated opacity
};

inline constexpr double kDefaultGridResolution = 512.0;

/// BVH over the kappa-sigma boxes of every Gaussian.
inline LinearBvh build_gaussian_bvh(const GaussianCloud& cloud, double kappa = kDefaultKappa,
                                    int bits = kDefaultMortonBits) {
  if (cloud.empty()) fail(ErrorKind::kEmptyAsset, "cannot build a BVH over an empty Gaussian cloud");
  std::vector<Aabb> boxes(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) boxes[i] = gaussian_aabb(cloud.gaussians[i], kappa);
  return LinearBvh::build(boxes, cloud.scene_box, bits);
}

/// Extent the voxel grid must cover: the scene box plus every Gaussian's
/// kappa-sigma support, so no nonzero density falls outside the grid.
inline Aabb voxelization_bounds(const GaussianCloud& cloud, const LinearBvh& bvh) {
  Aabb b = cloud.scene_box;
  for (std::size_t i = 0; i < bvh.primitive_count(); ++i) b.extend(bvh.primitive_box(static_cast<std::uint32_t>(i)));
  return b;
}

inline double default_spacing(const Aabb& bounds) { return bounds.extent().maxCoeff() / kDefaultGridResolution; }

inline VoxelGrid voxelization_grid(const GaussianCloud& cloud, const LinearBvh& bvh, double spacing,
                                   std::size_t cell_budget) {
  const Aabb bounds = voxelization_bounds(cloud, bvh);
  if (!(spacing > 0.0)) spacing = default_spacing(bounds);
  if (!(spacing > 0.0)) fail(ErrorKind::kValidation, "voxel spacing must be positive");
  for (int a = 0; a < 3; ++a) {
    const double cells = std::ceil(bounds.extent()[a] / spacing) + 2.0;
    if (cells > 2e9) fail(ErrorKind::kResource, "voxel grid too large; use a coarser spacing");
  }
  VoxelGrid grid = make_padded_grid(bounds, spacing);
  if (grid.count() > cell_budget)
    fail(ErrorKind::kResource, "voxel grid of " + std::to_string(grid.dims[0]) + "x" + std::to_string(grid.dims[1]) +
                                   "x" + std::to_string(grid.dims[2]) + " cells exceeds the budget of " +
                                   std::to_string(cell_budget) + "; use a coarser spacing");
  return grid;
}

/// Density at one point given an ascending candidate list, with
/// contributions beyond kappa-sigma truncated to zero.
inline double accumulate_density(const std::vector<GaussianKernel>& kernels, const std::vector<double>& weights,
                                 std::span<const std::uint32_t> candidates, const Vec3& x, double kappa_sq) {
  double d = 0.0;
  for (auto c : candidates) {
    const double m2 = kernels[c].mahalanobis_sq(x);
    if (m2 <= kappa_sq) d += std::exp(-0.5 * m2) * weights[c];
  }
  return d;
}

/// Occupancy test shared by the tiled path and reference implementations:
/// the accumulated density is rounded to the stored float precision first.
inline bool density_exceeds(double density, double theta) {
  return round_to_float(density) > theta;
}

inline std::vector<double> opacity_weights(const GaussianCloud& cloud, const OpacityWeight& f) {
  std::vector<double> w(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const double s = cloud.gaussians[i].opacity;
    w[i] = f ? f(s) : s;
  }
  return w;
}

/// Tile-parallel voxelization. For each B^3 tile the candidate set is the
/// BVH overlap of the tile's voxel-centre box; every voxel centre then sums
/// only those candidates, in ascending index order.
inline OccupancyVolume voxelize(const GaussianCloud& cloud, const LinearBvh& bvh, const VoxelizeOptions& opts) {
  if (cloud.empty()) fail(ErrorKind::kEmptyAsset, "cannot voxelize an empty Gaussian cloud");
  if (!(opts.theta > 0.0)) fail(ErrorKind::kValidation, "density threshold theta must be positive");
  if (opts.tile < 1) fail(ErrorKind::kValidation, "tile size must be >= 1");
  if (bvh.primitive_count() != cloud.size())
    fail(ErrorKind::kValidation, "Gaussian BVH does not match the cloud");

  OccupancyVolume vol;
  vol.grid = voxelization_grid(cloud, bvh, opts.spacing, opts.cell_budget);
  const VoxelGrid& grid = vol.grid;
  vol.occupancy = BitVolume(grid.dims);
  if (opts.keep_density) vol.density = Volume<float>(grid.dims, 0.0f);

  std::vector<GaussianKernel> kernels;
  kernels.reserve(cloud.size());
  for (const auto& g : cloud.gaussians) kernels.emplace_back(g);
  const std::vector<double> weights = opacity_weights(cloud, opts.opacity_weight);
  const double kappa_sq = opts.kappa * opts.kappa;

  const int b = opts.tile;
  const Index3 tiles{(grid.dims[0] + b - 1) / b, (grid.dims[1] + b - 1) / b, (grid.dims[2] + b - 1) / b};
  // One work item per (tile_y, tile_z) column: it owns whole x-rows.
  const std::size_t columns = static_cast<std::size_t>(tiles[1]) * tiles[2];
  parallel_for(columns, opts.workers, [&](std::size_t begin, std::size_t end) {
    std::vector<std::uint32_t> candidates;
    for (std::size_t c = begin; c < end; ++c) {
      const int tj = static_cast<int>(c % tiles[1]);
      const int tk = static_cast<int>(c / tiles[1]);
      for (int ti = 0; ti < tiles[0]; ++ti) {
        const Index3 lo{ti * b, tj * b, tk * b};
        const Index3 hi{std::min(lo[0] + b, grid.dims[0]), std::min(lo[1] + b, grid.dims[1]),
                        std::min(lo[2] + b, grid.dims[2])};
        const Aabb tile_box(grid.center(lo[0], lo[1], lo[2]), grid.center(hi[0] - 1, hi[1] - 1, hi[2] - 1));
        candidates = bvh.query_overlap(tile_box);
        if (candidates.empty()) continue;
        for (int k = lo[2]; k < hi[2]; ++k)
          for (int j = lo[1]; j < hi[1]; ++j)
            for (int i = lo[0]; i < hi[0]; ++i) {
              const double d = accumulate_density(kernels, weights, candidates, grid.center(i, j, k), kappa_sq);
              if (vol.density) (*vol.density)(i, j, k) = static_cast<float>(d);
              if (density_exceeds(d, opts.theta)) vol.occupancy.set(i, j, k, true);
            }
      }
    }
  });
  return vol;
}

/// Occupied voxels whose six face neighbours are all occupied. Neighbours
/// outside the grid count as free.
inline BitVolume interior_mask(const OccupancyVolume& vol) {
  const auto& v = vol.occupancy;
  const Index3 d = v.dims();
  BitVolume out(d);
  for (int k = 0; k < d[2]; ++k)
    for (int j = 0; j < d[1]; ++j)
      for (int i = 0; i < d[0]; ++i) {
        if (!v.get(i, j, k)) continue;
        bool all = true;
        for (const auto& n : kFaceNeighbors)
          if (!v.get_or_free(i + n[0], j + n[1], k + n[2])) {
            all = false;
            break;
          }
        if (all) out.set(i, j, k, true);
      }
  return out;
}

/// Occupied and not interior.
inline BitVolume surface_mask(const OccupancyVolume& vol) {
  const BitVolume interior = interior_mask(vol);
  const Index3 d = vol.occupancy.dims();
  BitVolume out(d);
  for (int k = 0; k < d[2]; ++k)
    for (int j = 0; j < d[1]; ++j)
      for (int i = 0; i < d[0]; ++i)
        if (vol.occupancy.get(i, j, k) && !interior.get(i, j, k)) out.set(i, j, k, true);
  return out;
}

}  // namespace splatlidar
