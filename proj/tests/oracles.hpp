// Copyright Contributors to the splatlidar Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Slow reference implementations used to check the library.

#include "splatlidar/gaussian.hpp"
#include "splatlidar/mesh.hpp"
#include "splatlidar/volume.hpp"
#include "splatlidar/voxelizer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <queue>
#include <random>
#include <vector>

namespace splatlidar::oracle {

/// Every voxel centre against every Gaussian with the same kappa cutoff.
inline BitVolume brute_force_voxelize(const GaussianCloud& cloud, const VoxelGrid& grid, double theta, double kappa) {
  std::vector<GaussianKernel> kernels;
  for (const auto& g : cloud.gaussians) kernels.emplace_back(g);
  BitVolume v(grid.dims);
  const double k2 = kappa * kappa;
  for (int k = 0; k < grid.dims[2]; ++k)
    for (int j = 0; j < grid.dims[1]; ++j)
      for (int i = 0; i < grid.dims[0]; ++i) {
        const Vec3 x = grid.center(i, j, k);
        double d = 0.0;
        for (std::size_t g = 0; g < kernels.size(); ++g) {
          const double m2 = kernels[g].mahalanobis_sq(x);
          if (m2 <= k2) d += std::exp(-0.5 * m2) * cloud.gaussians[g].opacity;
        }
        v.set(i, j, k, density_exceeds(d, theta));
      }
  return v;
}

/// Random blobby occupancy: union of a few random balls plus salt noise,
/// with the outer frame kept free.
inline OccupancyVolume random_blob_volume(int n, std::uint64_t seed, int balls = 6, double salt = 0.01) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> pos(3.0, n - 3.0), rad(1.5, n / 5.0), u(0.0, 1.0);
  OccupancyVolume vol;
  vol.grid.dims = {n, n, n};
  vol.grid.spacing = Vec3::Constant(1.0);
  vol.occupancy = BitVolume(vol.grid.dims);
  std::vector<std::pair<Vec3, double>> b;
  for (int i = 0; i < balls; ++i) b.push_back({Vec3(pos(rng), pos(rng), pos(rng)), rad(rng)});
  for (int k = 1; k < n - 1; ++k)
    for (int j = 1; j < n - 1; ++j)
      for (int i = 1; i < n - 1; ++i) {
        bool occ = u(rng) < salt;
        for (const auto& [c, r] : b) occ = occ || (Vec3(i, j, k) - c).norm() <= r;
        vol.occupancy.set(i, j, k, occ);
      }
  return vol;
}

/// Independently labelled S_0: a voxel with an in-grid face neighbour of the
/// opposite state.
inline std::vector<char> boundary_voxels(const OccupancyVolume& vol) {
  const auto& g = vol.grid;
  std::vector<char> s0(g.count(), 0);
  for (int k = 0; k < g.dims[2]; ++k)
    for (int j = 0; j < g.dims[1]; ++j)
      for (int i = 0; i < g.dims[0]; ++i) {
        const bool v = vol.occupancy.get(i, j, k);
        const int nb[6][3] = {{i - 1, j, k}, {i + 1, j, k}, {i, j - 1, k}, {i, j + 1, k}, {i, j, k - 1}, {i, j, k + 1}};
        for (const auto& q : nb)
          if (g.inside(q[0], q[1], q[2]) && vol.occupancy.get(q[0], q[1], q[2]) != v) s0[g.index(i, j, k)] = 1;
      }
  return s0;
}

/// Unit-weight Dijkstra from S_0 over face edges. -1 where unreachable.
inline std::vector<long> dijkstra_shells(const OccupancyVolume& vol) {
  const auto& g = vol.grid;
  const auto s0 = boundary_voxels(vol);
  std::vector<long> dist(g.count(), std::numeric_limits<long>::max());
  using Item = std::pair<long, std::size_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
  for (std::size_t i = 0; i < s0.size(); ++i)
    if (s0[i]) {
      dist[i] = 0;
      pq.push({0, i});
    }
  while (!pq.empty()) {
    auto [d, idx] = pq.top();
    pq.pop();
    if (d != dist[idx]) continue;
    const Index3 c = g.coords(idx);
    for (int a = 0; a < 3; ++a)
      for (int s = -1; s <= 1; s += 2) {
        Index3 q = c;
        q[a] += s;
        if (!g.inside(q[0], q[1], q[2])) continue;
        const std::size_t qi = g.index(q[0], q[1], q[2]);
        if (d + 1 < dist[qi]) {
          dist[qi] = d + 1;
          pq.push({d + 1, qi});
        }
      }
  }
  for (auto& d : dist)
    if (d == std::numeric_limits<long>::max()) d = -1;
  return dist;
}

/// Exact Euclidean distance from every voxel centre to the nearest S_0 voxel
/// centre, by exhaustive search (metres).
inline std::vector<double> exact_edt(const OccupancyVolume& vol) {
  const auto& g = vol.grid;
  const auto s0 = boundary_voxels(vol);
  std::vector<Vec3> pts;
  for (std::size_t i = 0; i < s0.size(); ++i)
    if (s0[i]) {
      const Index3 c = g.coords(i);
      pts.push_back(g.center(c[0], c[1], c[2]));
    }
  std::vector<double> out(g.count(), std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const Index3 c = g.coords(i);
    const Vec3 x = g.center(c[0], c[1], c[2]);
    double best = std::numeric_limits<double>::infinity();
    for (const auto& p : pts) best = std::min(best, (p - x).squaredNorm());
    out[i] = std::sqrt(best);
  }
  return out;
}

/// Connected components of free voxels (face adjacency, union-find); the
/// components touching the frame are "outside" (+1), the rest -1.
inline std::vector<int> component_signs(const OccupancyVolume& vol) {
  const auto& g = vol.grid;
  const std::size_t n = g.count();
  std::vector<std::size_t> parent(n);
  for (std::size_t i = 0; i < n; ++i) parent[i] = i;
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  auto free_at = [&](int i, int j, int k) { return !vol.occupancy.get(i, j, k); };
  for (int k = 0; k < g.dims[2]; ++k)
    for (int j = 0; j < g.dims[1]; ++j)
      for (int i = 0; i < g.dims[0]; ++i) {
        if (!free_at(i, j, k)) continue;
        const std::size_t a = g.index(i, j, k);
        if (i + 1 < g.dims[0] && free_at(i + 1, j, k)) parent[find(a)] = find(g.index(i + 1, j, k));
        if (j + 1 < g.dims[1] && free_at(i, j + 1, k)) parent[find(a)] = find(g.index(i, j + 1, k));
        if (k + 1 < g.dims[2] && free_at(i, j, k + 1)) parent[find(a)] = find(g.index(i, j, k + 1));
      }
  std::vector<char> outside_root(n, 0);
  for (int k = 0; k < g.dims[2]; ++k)
    for (int j = 0; j < g.dims[1]; ++j)
      for (int i = 0; i < g.dims[0]; ++i)
        if (g.on_frame(i, j, k) && free_at(i, j, k)) outside_root[find(g.index(i, j, k))] = 1;
  std::vector<int> sign(n, -1);
  for (std::size_t i = 0; i < n; ++i) {
    const Index3 c = g.coords(i);
    if (free_at(c[0], c[1], c[2]) && outside_root[find(i)]) sign[i] = 1;
  }
  return sign;
}

inline double brute_nearest(const Vec3& q, const std::vector<Vec3>& cloud) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& p : cloud) best = std::min(best, (p - q).squaredNorm());
  return std::sqrt(best);
}

inline double brute_chamfer(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
  double sa = 0.0, sb = 0.0;
  for (const auto& p : a) sa += brute_nearest(p, b);
  for (const auto& q : b) sb += brute_nearest(q, a);
  return 0.5 * (sa / a.size() + sb / b.size());
}

struct BruteScore {
  double precision, recall, fscore;
};

inline BruteScore brute_fscore(const std::vector<Vec3>& a, const std::vector<Vec3>& b, double tau) {
  std::size_t pa = 0, rb = 0;
  for (const auto& p : a) pa += brute_nearest(p, b) <= tau;
  for (const auto& q : b) rb += brute_nearest(q, a) <= tau;
  const double p = double(pa) / a.size(), r = double(rb) / b.size();
  return {p, r, p + r > 0 ? 2 * p * r / (p + r) : 0.0};
}

/// Dense (non-separable) 3-D Gaussian convolution of a binary volume with
/// taps truncated at 3 sigma and renormalised, zero outside the grid.
inline std::vector<double> dense_blur(const BitVolume& v, double sigma_vox) {
  const Index3 d = v.dims();
  const int r = static_cast<int>(std::ceil(3.0 * sigma_vox));
  std::vector<double> w1(2 * r + 1);
  double s = 0.0;
  for (int t = -r; t <= r; ++t) s += w1[t + r] = std::exp(-0.5 * t * t / (sigma_vox * sigma_vox));
  for (auto& x : w1) x /= s;
  std::vector<double> out(static_cast<std::size_t>(d[0]) * d[1] * d[2], 0.0);
  for (int k = 0; k < d[2]; ++k)
    for (int j = 0; j < d[1]; ++j)
      for (int i = 0; i < d[0]; ++i) {
        double acc = 0.0;
        for (int c = -r; c <= r; ++c)
          for (int b = -r; b <= r; ++b)
            for (int a = -r; a <= r; ++a)
              if (v.get_or_free(i + a, j + b, k + c)) acc += w1[a + r] * w1[b + r] * w1[c + r];
        out[i + static_cast<std::size_t>(d[0]) * (j + static_cast<std::size_t>(d[1]) * k)] = acc;
      }
  return out;
}

/// Exact point to triangle distance by projection onto the plane, then the
/// three edges when the projection falls outside.
inline double point_triangle_distance(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 n = (b - a).cross(c - a);
  const double nn = n.squaredNorm();
  if (nn > 0.0) {
    const Vec3 q = p - n * ((p - a).dot(n) / nn);
    const double w0 = (b - q).cross(c - q).dot(n), w1 = (c - q).cross(a - q).dot(n), w2 = (a - q).cross(b - q).dot(n);
    if (w0 >= 0 && w1 >= 0 && w2 >= 0) return (p - q).norm();
  }
  auto seg = [&](const Vec3& u, const Vec3& v) {
    const Vec3 d = v - u;
    const double len = d.squaredNorm();
    const double t = len > 0 ? std::clamp((p - u).dot(d) / len, 0.0, 1.0) : 0.0;
    return (p - (u + t * d)).norm();
  };
  return std::min({seg(a, b), seg(b, c), seg(c, a)});
}

/// Largest distance from any vertex of `from` to the surface of `to`.
inline double one_sided_hausdorff(const TriangleMesh& from, const TriangleMesh& to) {
  double worst = 0.0;
  for (const auto& p : from.vertices) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& t : to.triangles)
      best = std::min(best, point_triangle_distance(p, to.vertices[t[0]], to.vertices[t[1]], to.vertices[t[2]]));
    worst = std::max(worst, best);
  }
  return worst;
}

inline double hausdorff(const TriangleMesh& a, const TriangleMesh& b) {
  return std::max(one_sided_hausdorff(a, b), one_sided_hausdorff(b, a));
}

/// Ray against a triangle by plane intersection and a barycentric inside
/// test. Returns +inf on a miss or outside [t_min, t_max].
inline double ray_triangle_t(const Vec3& o, const Vec3& d, const Vec3& a, const Vec3& b, const Vec3& c, double t_min,
                             double t_max) {
  const Vec3 n = (b - a).cross(c - a);
  const double denom = n.dot(d);
  const double inf = std::numeric_limits<double>::infinity();
  if (std::abs(denom) < 1e-300) return inf;
  const double t = n.dot(a - o) / denom;
  if (!(t >= t_min && t <= t_max)) return inf;
  const Vec3 p = o + t * d;
  const double nn = n.squaredNorm();
  const double u = (c - b).cross(p - b).dot(n) / nn, v = (a - c).cross(p - c).dot(n) / nn, w = (b - a).cross(p - a).dot(n) / nn;
  return (u >= 0 && v >= 0 && w >= 0) ? t : inf;
}

struct BruteHit {
  double t = std::numeric_limits<double>::infinity();
  std::uint32_t triangle = std::numeric_limits<std::uint32_t>::max();
};

inline BruteHit brute_first_hit(const TriangleMesh& m, const Vec3& o, const Vec3& d, double t_min, double t_max) {
  BruteHit best;
  for (std::uint32_t f = 0; f < m.triangles.size(); ++f) {
    const auto& t = m.triangles[f];
    const double h = ray_triangle_t(o, d, m.vertices[t[0]], m.vertices[t[1]], m.vertices[t[2]], t_min, t_max);
    if (h < best.t) best = {h, f};
  }
  return best;
}

}  // namespace splatlidar::oracle
