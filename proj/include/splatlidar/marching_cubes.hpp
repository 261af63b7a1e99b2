// Copyright Contributors to the splatlidar Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Marching cubes over a SignedField. The 256-case triangle table is derived
// at start-up from the cube's face structure: on every face, each
// outside->inside crossing (walking counter-clockwise about the outward face
// normal) is joined to the next crossing, which keeps inside corners
// separated on ambiguous faces. Neighbouring cells see the same face rule,
// so the extracted surface is closed wherever the field is.

#include "splatlidar/mesh.hpp"
#include "splatlidar/parallel.hpp"
#include "splatlidar/tsdf.hpp"

#include <array>
#include <cassert>
#include <cstdint>
#include <unordered_map>
#include <vector>

namespace splatlidar {

namespace mc {

// Corner c has offset (c & 1, (c >> 1) & 1, (c >> 2) & 1).
inline Index3 corner_offset(int c) { return {c & 1, (c >> 1) & 1, (c >> 2) & 1}; }

struct CubeTopology {
  std::array<std::array<int, 2>, 12> edge_corners{};
  std::array<int, 12> edge_axis{};
  int edge_between[8][8];
};

inline const CubeTopology& topology() {
  static const CubeTopology topo = [] {
    CubeTopology t;
    for (auto& row : t.edge_between)
      for (auto& e : row) e = -1;
    int e = 0;
    for (int axis = 0; axis < 3; ++axis)
      for (int c = 0; c < 8; ++c) {
        if (c & (1 << axis)) continue;
        const int d = c | (1 << axis);
        t.edge_corners[e] = {c, d};
        t.edge_axis[e] = axis;
        t.edge_between[c][d] = t.edge_between[d][c] = e;
        ++e;
      }
    return t;
  }();
  return topo;
}

// Triangulates a crossing loop without diagonals between two crossings on a
// common cube face. The neighbouring cell sees the same pair of crossings on
// that face, and a diagonal there would give the edge more than two faces.
inline bool triangulate_loop(const std::vector<int>& loop, const std::array<int, 12>& face_mask,
                             std::vector<std::uint8_t>& out) {
  const std::size_t n = loop.size();
  if (n < 3) return true;
  const auto mark = out.size();
  for (std::size_t k = 2; k < n; ++k) {
    if (k != 2 && (face_mask[loop[1]] & face_mask[loop[k]])) continue;
    if (k != n - 1 && (face_mask[loop[0]] & face_mask[loop[k]])) continue;
    out.push_back(static_cast<std::uint8_t>(loop[0]));
    out.push_back(static_cast<std::uint8_t>(loop[1]));
    out.push_back(static_cast<std::uint8_t>(loop[k]));
    std::vector<int> left(loop.begin() + 1, loop.begin() + static_cast<std::ptrdiff_t>(k) + 1);
    std::vector<int> right{loop[0]};
    right.insert(right.end(), loop.begin() + static_cast<std::ptrdiff_t>(k), loop.end());
    if (triangulate_loop(left, face_mask, out) && triangulate_loop(right, face_mask, out)) return true;
    out.resize(mark);
  }
  return false;
}

/// Triangles per configuration as lists of cube-edge ids, three per triangle.
/// Bit c of the case index is set when corner c is inside (value < iso).
inline const std::array<std::vector<std::uint8_t>, 256>& triangle_table() {
  static const std::array<std::vector<std::uint8_t>, 256> table = [] {
    const CubeTopology& topo = topology();
    // Corners of each face, counter-clockwise about the outward normal.
    std::array<std::array<int, 4>, 6> faces{};
    for (int axis = 0; axis < 3; ++axis)
      for (int side = 0; side < 2; ++side) {
        std::array<int, 4> f{};
        const int u = (axis + 1) % 3, v = (axis + 2) % 3;
        const int order[4][2] = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};
        for (int n = 0; n < 4; ++n)
          f[n] = (side << axis) | (order[n][0] << u) | (order[n][1] << v);
        // (u, v, axis) is right handed, so this order is CCW about +axis.
        if (side == 0) std::swap(f[1], f[3]);
        faces[2 * axis + side] = f;
      }

    // Faces (as a bitmask of 2 * axis + side) that contain each cube edge.
    std::array<int, 12> face_mask{};
    for (int e = 0; e < 12; ++e)
      for (int ax = 0; ax < 3; ++ax)
        if (ax != topo.edge_axis[e]) face_mask[e] |= 1 << (2 * ax + ((topo.edge_corners[e][0] >> ax) & 1));

    std::array<std::vector<std::uint8_t>, 256> out;
    for (int cfg = 0; cfg < 256; ++cfg) {
      auto inside = [&](int c) { return (cfg >> c) & 1; };
      std::array<int, 12> next_edge;
      next_edge.fill(-1);
      for (const auto& f : faces) {
        struct Crossing {
          int edge;
          bool into_inside;
        };
        std::vector<Crossing> xs;
        for (int n = 0; n < 4; ++n) {
          const int a = f[n], b = f[(n + 1) % 4];
          if (inside(a) != inside(b)) xs.push_back({topo.edge_between[a][b], !inside(a) && inside(b)});
        }
        for (std::size_t n = 0; n < xs.size(); ++n)
          if (xs[n].into_inside) next_edge[xs[n].edge] = xs[(n + 1) % xs.size()].edge;
      }
      std::array<bool, 12> used{};
      for (int start = 0; start < 12; ++start) {
        if (next_edge[start] < 0 || used[start]) continue;
        std::vector<int> loop;
        for (int e = start; !used[e]; e = next_edge[e]) {
          used[e] = true;
          loop.push_back(e);
        }
        const bool ok = triangulate_loop(loop, face_mask, out[cfg]);
        assert(ok);
        (void)ok;
      }
    }
    return out;
  }();
  return table;
}

}  // namespace mc

/// Contours `field.level()` at `iso` over the lattice of voxel centres taken
/// with stride `step`. Vertices are welded by lattice-edge identity; the
/// output is independent of the worker count.
inline TriangleMesh marching_cubes(const SignedField& field, double iso = 0.0, int step = 1, unsigned workers = 0) {
  if (step < 1) fail(ErrorKind::kValidation, "mc_step must be >= 1");
  if (field.band_radius > 0.0 && !(std::abs(iso) < field.band_radius))
    fail(ErrorKind::kValidation, "|iso| must be smaller than the band radius");
  const VoxelGrid& grid = field.grid;
  const Index3 lat{(grid.dims[0] - 1) / step + 1, (grid.dims[1] - 1) / step + 1, (grid.dims[2] - 1) / step + 1};
  TriangleMesh mesh;
  if (lat[0] < 2 || lat[1] < 2 || lat[2] < 2) return mesh;

  const auto& topo = mc::topology();
  const auto& table = mc::triangle_table();
  auto sample = [&](int i, int j, int k) { return field.level(i * step, j * step, k * step); };
  auto lattice_key = [&](int i, int j, int k, int axis) {
    return (static_cast<std::uint64_t>(i) +
            static_cast<std::uint64_t>(lat[0]) * (static_cast<std::uint64_t>(j) + static_cast<std::uint64_t>(lat[1]) * k)) *
               3 +
           static_cast<std::uint64_t>(axis);
  };
  auto edge_point = [&](int i, int j, int k, int axis) {
    Index3 b{i, j, k};
    b[axis] += 1;
    const double va = sample(i, j, k), vb = sample(b[0], b[1], b[2]);
    const double t = (iso - va) / (vb - va);
    const Vec3 pa = grid.center(i * step, j * step, k * step);
    const Vec3 pb = grid.center(b[0] * step, b[1] * step, b[2] * step);
    return Vec3(pa + t * (pb - pa));
  };

  // Per z-slab triangle lists in lattice-edge keys.
  std::vector<std::vector<std::array<std::uint64_t, 3>>> slabs(lat[2] - 1);
  parallel_for(slabs.size(), workers, [&](std::size_t begin, std::size_t end) {
    for (std::size_t kz = begin; kz < end; ++kz) {
      auto& tris = slabs[kz];
      const int k = static_cast<int>(kz);
      for (int j = 0; j + 1 < lat[1]; ++j)
        for (int i = 0; i + 1 < lat[0]; ++i) {
          int cfg = 0;
          for (int c = 0; c < 8; ++c) {
            const Index3 o = mc::corner_offset(c);
            if (sample(i + o[0], j + o[1], k + o[2]) < iso) cfg |= 1 << c;
          }
          const auto& tri = table[cfg];
          for (std::size_t n = 0; n < tri.size(); n += 3) {
            std::array<std::uint64_t, 3> keys;
            for (int v = 0; v < 3; ++v) {
              const int e = tri[n + v];
              const Index3 o = mc::corner_offset(topo.edge_corners[e][0]);
              keys[v] = lattice_key(i + o[0], j + o[1], k + o[2], topo.edge_axis[e]);
            }
            tris.push_back(keys);
          }
        }
    }
  });

  std::unordered_map<std::uint64_t, std::uint32_t> welded;
  auto vertex_for = [&](std::uint64_t key) {
    auto [it, inserted] = welded.emplace(key, static_cast<std::uint32_t>(mesh.vertices.size()));
    if (inserted) {
      const int axis = static_cast<int>(key % 3);
      std::uint64_t p = key / 3;
      const int i = static_cast<int>(p % lat[0]);
      p /= lat[0];
      const int j = static_cast<int>(p % lat[1]);
      const int k = static_cast<int>(p / lat[1]);
      mesh.vertices.push_back(edge_point(i, j, k, axis));
    }
    return it->second;
  };
  for (const auto& slab : slabs)
    for (const auto& t : slab) mesh.triangles.push_back({vertex_for(t[0]), vertex_for(t[1]), vertex_for(t[2])});
  return mesh;
}

/// Trilinearly interpolated central-difference gradient of field.level().
inline Vec3 field_gradient(const SignedField& field, const Vec3& p) {
  const VoxelGrid& g = field.grid;
  auto grad_at = [&](int i, int j, int k) {
    Vec3 out;
    const Index3 c{i, j, k};
    for (int a = 0; a < 3; ++a) {
      Index3 lo = c, hi = c;
      lo[a] = std::max(0, c[a] - 1);
      hi[a] = std::min(g.dims[a] - 1, c[a] + 1);
      const double span = (hi[a] - lo[a]) * g.spacing[a];
      out[a] = span > 0 ? (field.level(hi[0], hi[1], hi[2]) - field.level(lo[0], lo[1], lo[2])) / span : 0.0;
    }
    return out;
  };
  Vec3 u = (p - g.origin).cwiseQuotient(g.spacing) - Vec3::Constant(0.5);
  Index3 base;
  Vec3 frac;
  for (int a = 0; a < 3; ++a) {
    const double x = std::clamp(u[a], 0.0, static_cast<double>(g.dims[a] - 1));
    base[a] = std::min(static_cast<int>(std::floor(x)), std::max(0, g.dims[a] - 2));
    frac[a] = x - base[a];
  }
  Vec3 acc = Vec3::Zero();
  for (int c = 0; c < 8; ++c) {
    const Index3 o = mc::corner_offset(c);
    double w = 1.0;
    Index3 q;
    for (int a = 0; a < 3; ++a) {
      w *= o[a] ? frac[a] : 1.0 - frac[a];
      q[a] = std::min(base[a] + o[a], g.dims[a] - 1);
    }
    if (w != 0.0) acc += w * grad_at(q[0], q[1], q[2]);
  }
  return acc;
}

/// Unit outward normals (towards increasing field) at every vertex; vertices
/// with a vanishing gradient fall back to the area-weighted face normal.
inline TriangleMesh gradient_normals(const SignedField& field, TriangleMesh mesh, unsigned workers = 0) {
  mesh.normals.assign(mesh.vertex_count(), Vec3::Zero());
  std::vector<char> fallback(mesh.vertex_count(), 0);
  parallel_for(mesh.vertex_count(), workers, [&](std::size_t begin, std::size_t end) {
    for (std::size_t v = begin; v < end; ++v) {
      const Vec3 g = field_gradient(field, mesh.vertices[v]);
      const double n = g.norm();
      if (n > 1e-12 && std::isfinite(n))
        mesh.normals[v] = g / n;
      else
        fallback[v] = 1;
    }
  });
  if (std::find(fallback.begin(), fallback.end(), 1) != fallback.end()) {
    const auto face_n = face_weighted_normals(mesh);
    for (std::size_t v = 0; v < mesh.vertex_count(); ++v)
      if (fallback[v]) mesh.normals[v] = face_n[v];
  }
  return mesh;
}

}  // namespace splatlidar
