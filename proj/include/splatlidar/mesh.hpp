// Copyright Contributors to the splatlidar Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "splatlidar/error.hpp"
#include "splatlidar/geometry.hpp"
#include "splatlidar/lbvh.hpp"

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <unordered_map>
#include <vector>

namespace splatlidar {

using Triangle = std::array<std::uint32_t, 3>;

/// Indexed triangle set; triangles wind counter-clockwise seen from outside.
struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<Triangle> triangles;
  std::vector<Vec3> normals;  // per vertex; empty until estimated

  std::size_t vertex_count() const { return vertices.size(); }
  std::size_t face_count() const { return triangles.size(); }
  bool empty() const { return triangles.empty(); }

  Vec3 face_normal(std::size_t f) const {  // unnormalised, |n| = 2 * area
    const auto& t = triangles[f];
    return (vertices[t[1]] - vertices[t[0]]).cross(vertices[t[2]] - vertices[t[0]]);
  }
  double face_area(std::size_t f) const { return 0.5 * face_normal(f).norm(); }

  Aabb bounds() const {
    Aabb b;
    for (const auto& v : vertices) b.extend(v);
    return b;
  }
};

inline double surface_area(const TriangleMesh& m) {
  double a = 0.0;
  for (std::size_t f = 0; f < m.face_count(); ++f) a += m.face_area(f);
  return a;
}

inline std::uint64_t edge_key(std::uint32_t a, std::uint32_t b) {
  if (a > b) std::swap(a, b);
  return (static_cast<std::uint64_t>(a) << 32) | b;
}

/// Undirected edge -> number of incident faces.
inline std::unordered_map<std::uint64_t, int> edge_degrees(const TriangleMesh& m) {
  std::unordered_map<std::uint64_t, int> deg;
  deg.reserve(m.face_count() * 2);
  for (const auto& t : m.triangles)
    for (int e = 0; e < 3; ++e) ++deg[edge_key(t[e], t[(e + 1) % 3])];
  return deg;
}

/// Every edge borders exactly two faces.
inline bool is_watertight(const TriangleMesh& m) {
  if (m.empty()) return false;
  for (const auto& [k, d] : edge_degrees(m))
    if (d != 2) return false;
  return true;
}

/// Every directed edge occurs once and its reverse occurs once, i.e. adjacent
/// faces traverse their shared edge in opposite directions.
inline bool is_consistently_oriented(const TriangleMesh& m) {
  std::unordered_map<std::uint64_t, int> directed;
  directed.reserve(m.face_count() * 3);
  for (const auto& t : m.triangles)
    for (int e = 0; e < 3; ++e) {
      const std::uint64_t key = (static_cast<std::uint64_t>(t[e]) << 32) | t[(e + 1) % 3];
      if (++directed[key] > 1) return false;
    }
  return true;
}

/// V - E + F over referenced vertices.
inline long euler_characteristic(const TriangleMesh& m) {
  std::vector<char> used(m.vertex_count(), 0);
  for (const auto& t : m.triangles)
    for (auto v : t) used[v] = 1;
  const long v = std::count(used.begin(), used.end(), 1);
  const long e = static_cast<long>(edge_degrees(m).size());
  return v - e + static_cast<long>(m.face_count());
}

/// Face-connected components; returns a component id per face.
inline std::vector<std::uint32_t> face_components(const TriangleMesh& m, std::uint32_t* n_components = nullptr) {
  std::vector<std::uint32_t> parent(m.vertex_count());
  std::iota(parent.begin(), parent.end(), 0u);
  auto find = [&](std::uint32_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (const auto& t : m.triangles) {
    const auto a = find(t[0]);
    for (int k = 1; k < 3; ++k) {
      const auto b = find(t[k]);
      if (a != b) parent[b] = a;
    }
  }
  std::unordered_map<std::uint32_t, std::uint32_t> ids;
  std::vector<std::uint32_t> comp(m.face_count());
  for (std::size_t f = 0; f < m.face_count(); ++f) {
    const auto r = find(m.triangles[f][0]);
    auto it = ids.emplace(r, static_cast<std::uint32_t>(ids.size())).first;
    comp[f] = it->second;
  }
  if (n_components) *n_components = static_cast<std::uint32_t>(ids.size());
  return comp;
}

/// Drops unreferenced vertices, keeping the relative order of the rest.
inline TriangleMesh compact(const TriangleMesh& m) {
  TriangleMesh out;
  std::vector<std::uint32_t> remap(m.vertex_count(), LinearBvh::kInvalid);
  for (const auto& t : m.triangles)
    for (auto v : t) remap[v] = 0;
  for (std::size_t v = 0; v < m.vertex_count(); ++v) {
    if (remap[v] == LinearBvh::kInvalid) continue;
    remap[v] = static_cast<std::uint32_t>(out.vertices.size());
    out.vertices.push_back(m.vertices[v]);
    if (!m.normals.empty()) out.normals.push_back(m.normals[v]);
  }
  out.triangles.reserve(m.face_count());
  for (const auto& t : m.triangles) out.triangles.push_back({remap[t[0]], remap[t[1]], remap[t[2]]});
  return out;
}

/// Removes faces with repeated indices, zero area (below `area_eps`) or that
/// duplicate an earlier face's vertex set.
inline TriangleMesh remove_degenerate(const TriangleMesh& m, double area_eps = 1e-12) {
  TriangleMesh out;
  out.vertices = m.vertices;
  out.normals = m.normals;
  std::map<std::array<std::uint32_t, 3>, int> seen;
  for (std::size_t f = 0; f < m.face_count(); ++f) {
    const auto& t = m.triangles[f];
    if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2]) continue;
    if (m.face_area(f) <= area_eps) continue;
    auto s = t;
    std::sort(s.begin(), s.end());
    if (!seen.emplace(s, 1).second) continue;
    out.triangles.push_back(t);
  }
  return compact(out);
}

/// Area-weighted vertex normals from faces.
inline std::vector<Vec3> face_weighted_normals(const TriangleMesh& m) {
  std::vector<Vec3> n(m.vertex_count(), Vec3::Zero());
  for (std::size_t f = 0; f < m.face_count(); ++f) {
    const Vec3 fn = m.face_normal(f);
    for (auto v : m.triangles[f]) n[v] += fn;
  }
  for (auto& v : n) {
    const double len = v.norm();
    v = len > 0 ? Vec3(v / len) : Vec3(Vec3::UnitZ());
  }
  return n;
}

// ---------------------------------------------------------------------------
// Ray queries

/// Two-sided Moller-Trumbore. Accepts t in [t_min, t_max] and barycentrics on
/// the closed triangle.
inline std::optional<PrimitiveHit> intersect_triangle(const Vec3& v0, const Vec3& v1, const Vec3& v2, const Ray& ray,
                                                      double t_min, double t_max) {
  const Vec3 e1 = v1 - v0;
  const Vec3 e2 = v2 - v0;
  const Vec3 p = ray.dir.cross(e2);
  const double det = e1.dot(p);
  if (det == 0.0 || !std::isfinite(det)) return std::nullopt;
  const double inv_det = 1.0 / det;
  const Vec3 s = ray.origin - v0;
  const double u = s.dot(p) * inv_det;
  if (u < 0.0 || u > 1.0) return std::nullopt;
  const Vec3 q = s.cross(e1);
  const double v = ray.dir.dot(q) * inv_det;
  if (v < 0.0 || u + v > 1.0) return std::nullopt;
  const double t = e2.dot(q) * inv_det;
  if (t < t_min || t > t_max) return std::nullopt;
  return PrimitiveHit{t, u, v};
}

inline std::vector<Aabb> triangle_boxes(const TriangleMesh& m) {
  std::vector<Aabb> boxes(m.face_count());
  for (std::size_t f = 0; f < m.face_count(); ++f) {
    const auto& t = m.triangles[f];
    Aabb b;
    for (auto v : t) b.extend(m.vertices[v]);
    boxes[f] = b;
  }
  return boxes;
}

inline LinearBvh build_triangle_bvh(const TriangleMesh& m, int bits = kDefaultMortonBits) {
  if (m.empty()) fail(ErrorKind::kBuild, "cannot build a triangle BVH over an empty mesh");
  const auto boxes = triangle_boxes(m);
  Aabb scene;
  for (const auto& b : boxes) scene.extend(b.center());
  return LinearBvh::build(boxes, scene, bits);
}

struct MeshHit {
  double t = 0.0;
  std::uint32_t triangle = 0;
  Vec3 point = Vec3::Zero();
  double u = 0.0, v = 0.0;  // barycentrics of vertices 1 and 2
};

inline auto triangle_intersector(const TriangleMesh& m) {
  return [&m](std::uint32_t f, const Ray& ray, double t_min, double t_max) {
    const auto& t = m.triangles[f];
    return intersect_triangle(m.vertices[t[0]], m.vertices[t[1]], m.vertices[t[2]], ray, t_min, t_max);
  };
}

inline std::optional<MeshHit> first_hit(const LinearBvh& bvh, const TriangleMesh& mesh, const Ray& ray, double t_min,
                                        double t_max, TraversalStats* stats = nullptr) {
  auto h = bvh.first_hit(ray, t_min, t_max, triangle_intersector(mesh), stats);
  if (!h) return std::nullopt;
  return MeshHit{h->t, h->primitive, ray.origin + h->t * ray.dir, h->u, h->v};
}

/// Reference scan over every triangle with the same tie-break as the BVH.
inline std::optional<MeshHit> first_hit_brute_force(const TriangleMesh& mesh, const Ray& ray, double t_min,
                                                    double t_max, TraversalStats* stats = nullptr) {
  std::optional<MeshHit> best;
  for (std::uint32_t f = 0; f < mesh.face_count(); ++f) {
    const auto& t = mesh.triangles[f];
    auto h = intersect_triangle(mesh.vertices[t[0]], mesh.vertices[t[1]], mesh.vertices[t[2]], ray, t_min, t_max);
    if (h && (!best || h->t < best->t)) best = MeshHit{h->t, f, ray.origin + h->t * ray.dir, h->u, h->v};
  }
  if (stats) stats->primitives_tested += mesh.face_count();
  return best;
}

}  // namespace splatlidar
