// Copyright Contributors to the splatlidar Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Quadric-error edge collapse (Garland & Heckbert) with boundary protection
// and removal of small connected components.

#include "splatlidar/mesh.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <queue>
#include <unordered_set>
#include <vector>

namespace splatlidar {

struct SimplifyOptions {
  // Exactly one target is used: face_target > 0 wins over ratio.
  std::size_t face_target = 0;
  double ratio = 1.0;
  std::size_t min_component_faces = 16;
  double boundary_weight = 1000.0;
  // Reject collapses that rotate any surviving face normal by more than this.
  double max_normal_turn_deg = 60.0;
};

struct SimplifyResult {
  TriangleMesh mesh;
  bool target_unreachable = false;  // stopped above the requested face count
};

/// Drops face-connected components with fewer than `min_faces` faces.
inline TriangleMesh remove_small_components(const TriangleMesh& m, std::size_t min_faces) {
  std::uint32_t n = 0;
  const auto comp = face_components(m, &n);
  std::vector<std::size_t> sizes(n, 0);
  for (auto c : comp) ++sizes[c];
  TriangleMesh out;
  out.vertices = m.vertices;
  out.normals = m.normals;
  for (std::size_t f = 0; f < m.face_count(); ++f)
    if (sizes[comp[f]] >= min_faces) out.triangles.push_back(m.triangles[f]);
  return compact(out);
}

namespace detail {

struct Quadric {
  Eigen::Matrix4d q = Eigen::Matrix4d::Zero();

  static Quadric plane(const Vec3& n, double d, double w) {
    Eigen::Vector4d p(n.x(), n.y(), n.z(), d);
    Quadric out;
    out.q = w * p * p.transpose();
    return out;
  }
  Quadric& operator+=(const Quadric& o) {
    q += o.q;
    return *this;
  }
  double error(const Vec3& v) const {
    const Eigen::Vector4d h(v.x(), v.y(), v.z(), 1.0);
    return std::max(0.0, h.dot(q * h));
  }
};

}  // namespace detail

/// Simplifies towards the target face count. Collapses keep the mesh
/// manifold (link condition), never flip a face, and never reduce a closed
/// component below a tetrahedron.
inline SimplifyResult simplify(const TriangleMesh& input, const SimplifyOptions& opts = {}) {
  if (opts.face_target == 0 && !(opts.ratio > 0.0 && opts.ratio <= 1.0))
    fail(ErrorKind::kValidation, "simplification ratio must be in (0, 1]");
  if (opts.face_target != 0 && opts.face_target < 4)
    fail(ErrorKind::kValidation, "simplification face target must be >= 4");

  TriangleMesh mesh = remove_degenerate(remove_small_components(input, opts.min_component_faces));
  SimplifyResult result;
  const std::size_t target = opts.face_target != 0
                                 ? opts.face_target
                                 : static_cast<std::size_t>(std::llround(opts.ratio * static_cast<double>(mesh.face_count())));
  if (target >= mesh.face_count()) {
    result.mesh = std::move(mesh);
    return result;
  }

  const std::size_t nv = mesh.vertex_count();
  auto& pos = mesh.vertices;
  auto& faces = mesh.triangles;
  std::vector<char> face_alive(faces.size(), 1);
  std::vector<char> vert_alive(nv, 1);
  std::vector<std::vector<std::uint32_t>> vert_faces(nv);
  for (std::uint32_t f = 0; f < faces.size(); ++f)
    for (auto v : faces[f]) vert_faces[v].push_back(f);

  std::vector<detail::Quadric> quadrics(nv);
  for (std::uint32_t f = 0; f < faces.size(); ++f) {
    const Vec3 n = mesh.face_normal(f);
    const double area2 = n.norm();
    if (area2 <= 0) continue;
    const Vec3 un = n / area2;
    const auto qf = detail::Quadric::plane(un, -un.dot(pos[faces[f][0]]), 0.5 * area2);
    for (auto v : faces[f]) quadrics[v] += qf;
  }
  // Boundary edges get a stiff plane perpendicular to their face.
  {
    const auto deg = edge_degrees(mesh);
    for (std::uint32_t f = 0; f < faces.size(); ++f)
      for (int e = 0; e < 3; ++e) {
        const auto a = faces[f][e], b = faces[f][(e + 1) % 3];
        if (deg.at(edge_key(a, b)) != 1) continue;
        const Vec3 edge = pos[b] - pos[a];
        Vec3 n = edge.cross(mesh.face_normal(f));
        if (n.norm() <= 0) continue;
        n.normalize();
        const auto qb = detail::Quadric::plane(n, -n.dot(pos[a]), opts.boundary_weight * edge.squaredNorm());
        quadrics[a] += qb;
        quadrics[b] += qb;
      }
  }

  auto other_vertices = [&](std::uint32_t v, std::vector<std::uint32_t>& out) {
    out.clear();
    for (auto f : vert_faces[v]) {
      if (!face_alive[f]) continue;
      for (auto w : faces[f])
        if (w != v) out.push_back(w);
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
  };

  auto optimal_position = [&](std::uint32_t a, std::uint32_t b, double& cost) {
    detail::Quadric q = quadrics[a];
    q += quadrics[b];
    Eigen::Matrix4d m = q.q;
    m.row(3) << 0, 0, 0, 1;
    Vec3 best = 0.5 * (pos[a] + pos[b]);
    const double det = m.determinant();
    if (std::abs(det) > 1e-12) {
      const Eigen::Vector4d x = m.inverse() * Eigen::Vector4d(0, 0, 0, 1);
      const Vec3 cand = x.head<3>();
      // Keep the optimum near the edge; far solutions come from flat regions.
      const double len = (pos[a] - pos[b]).norm();
      if (cand.allFinite() && (cand - 0.5 * (pos[a] + pos[b])).norm() <= 2.0 * len) best = cand;
    }
    cost = q.error(best);
    for (const Vec3& c : {pos[a], pos[b], Vec3(0.5 * (pos[a] + pos[b]))}) {
      const double e = q.error(c);
      if (e < cost) {
        cost = e;
        best = c;
      }
    }
    return best;
  };

  struct Candidate {
    double cost;
    std::uint32_t a, b;
    std::uint32_t stamp_a, stamp_b;
    bool operator>(const Candidate& o) const {
      if (cost != o.cost) return cost > o.cost;
      if (a != o.a) return a > o.a;
      return b > o.b;
    }
  };
  std::vector<std::uint32_t> stamp(nv, 0);
  std::priority_queue<Candidate, std::vector<Candidate>, std::greater<Candidate>> heap;
  auto push_edge = [&](std::uint32_t a, std::uint32_t b) {
    if (a > b) std::swap(a, b);
    double cost = 0;
    optimal_position(a, b, cost);
    heap.push({cost, a, b, stamp[a], stamp[b]});
  };
  {
    std::unordered_set<std::uint64_t> seen;
    for (const auto& t : faces)
      for (int e = 0; e < 3; ++e) {
        const auto a = t[e], b = t[(e + 1) % 3];
        if (seen.insert(edge_key(a, b)).second) push_edge(a, b);
      }
  }

  std::size_t alive_faces = faces.size();
  std::vector<std::uint32_t> na, nb, nw;
  const double cos_limit = std::cos(opts.max_normal_turn_deg * 3.14159265358979323846 / 180.0);

  auto edge_face_count = [&](std::uint32_t a, std::uint32_t b) {
    int n = 0;
    for (auto f : vert_faces[a])
      if (face_alive[f] && (faces[f][0] == b || faces[f][1] == b || faces[f][2] == b)) ++n;
    return n;
  };

  while (alive_faces > target && !heap.empty()) {
    const Candidate c = heap.top();
    heap.pop();
    if (!vert_alive[c.a] || !vert_alive[c.b] || stamp[c.a] != c.stamp_a || stamp[c.b] != c.stamp_b) continue;
    const std::uint32_t a = c.a, b = c.b;
    const int shared = edge_face_count(a, b);
    if (shared == 0) continue;

    // Link condition: common neighbours are exactly the opposite vertices.
    other_vertices(a, na);
    other_vertices(b, nb);
    std::vector<std::uint32_t> common;
    std::set_intersection(na.begin(), na.end(), nb.begin(), nb.end(), std::back_inserter(common));
    if (static_cast<int>(common.size()) != shared) continue;
    // Keep every involved vertex at degree >= 3 (no collapse past a tetrahedron).
    if (na.size() + nb.size() - common.size() - 2 < 3) continue;
    bool ok = true;
    for (auto w : common) {
      other_vertices(w, nw);
      if (nw.size() <= 3) ok = false;
    }
    if (!ok) continue;

    double cost = 0;
    const Vec3 target_pos = optimal_position(a, b, cost);
    // Reject face flips or degenerate results.
    for (auto v : {a, b}) {
      for (auto f : vert_faces[v]) {
        if (!face_alive[f]) continue;
        const auto& t = faces[f];
        const bool has_a = t[0] == a || t[1] == a || t[2] == a;
        const bool has_b = t[0] == b || t[1] == b || t[2] == b;
        if (has_a && has_b) continue;
        std::array<Vec3, 3> p{pos[t[0]], pos[t[1]], pos[t[2]]};
        const Vec3 before = (p[1] - p[0]).cross(p[2] - p[0]);
        for (int k = 0; k < 3; ++k)
          if (t[k] == v) p[k] = target_pos;
        const Vec3 after = (p[1] - p[0]).cross(p[2] - p[0]);
        const double lb = before.norm(), la = after.norm();
        if (la <= 1e-12 * std::max(1.0, lb) || before.dot(after) < cos_limit * lb * la) {
          ok = false;
          break;
        }
      }
      if (!ok) break;
    }
    if (!ok) continue;

    // Collapse b into a.
    pos[a] = target_pos;
    quadrics[a] += quadrics[b];
    vert_alive[b] = 0;
    for (auto f : vert_faces[b]) {
      if (!face_alive[f]) continue;
      auto& t = faces[f];
      const bool has_a = t[0] == a || t[1] == a || t[2] == a;
      if (has_a) {
        face_alive[f] = 0;
        --alive_faces;
        continue;
      }
      for (auto& v : t)
        if (v == b) v = a;
      vert_faces[a].push_back(f);
    }
    vert_faces[b].clear();
    auto& fa = vert_faces[a];
    fa.erase(std::remove_if(fa.begin(), fa.end(), [&](std::uint32_t f) { return !face_alive[f]; }), fa.end());
    std::sort(fa.begin(), fa.end());
    fa.erase(std::unique(fa.begin(), fa.end()), fa.end());

    ++stamp[a];
    other_vertices(a, na);
    for (auto w : na) {
      ++stamp[w];
    }
    // Re-queue every edge whose endpoint stamp changed.
    for (auto w : na) {
      other_vertices(w, nw);
      for (auto x : nw) push_edge(w, x);
    }
  }

  TriangleMesh out;
  out.vertices = pos;
  for (std::size_t f = 0; f < faces.size(); ++f)
    if (face_alive[f]) out.triangles.push_back(faces[f]);
  result.mesh = remove_degenerate(out);
  result.target_unreachable = result.mesh.face_count() > target;
  return result;
}

}  // namespace splatlidar
