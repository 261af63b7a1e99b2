// Copyright Contributors to the splatlidar Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Linear BVH: primitives sorted along a Morton curve, internal nodes placed by
// longest-common-prefix range splitting (Karras 2012), bounds reduced bottom-up.

#include "splatlidar/error.hpp"
#include "splatlidar/gaussian.hpp"
#include "splatlidar/geometry.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace splatlidar {

inline constexpr double kDefaultKappa = 3.0;
inline constexpr int kDefaultMortonBits = 21;

/// Conservative box around a Gaussian: half-extent kappa * |R| * s.
inline Aabb gaussian_aabb(const Gaussian& g, double kappa = kDefaultKappa) {
  if (!(kappa >= 1.0)) fail(ErrorKind::kValidation, "kappa must be >= 1");
  const Vec3 r = kappa * (g.rotation().cwiseAbs() * g.scale);
  return {g.mu - r, g.mu + r};
}

namespace detail {

// Spreads the low 21 bits of v so bit i lands on bit 3i.
inline std::uint64_t spread_bits(std::uint64_t v) {
  v &= 0x1fffff;
  v = (v | (v << 32)) & 0x1f00000000ffffULL;
  v = (v | (v << 16)) & 0x1f0000ff0000ffULL;
  v = (v | (v << 8)) & 0x100f00f00f00f00fULL;
  v = (v | (v << 4)) & 0x10c30c30c30c30c3ULL;
  v = (v | (v << 2)) & 0x1249249249249249ULL;
  return v;
}

}  // namespace detail

/// Quantises p to `bits` bits per axis inside `box` and interleaves with x in
/// the lowest position. Coordinates are clamped to [0, 2^bits - 1].
inline std::uint64_t morton_encode(const Vec3& p, const Aabb& box, int bits = kDefaultMortonBits) {
  if (bits < 1 || bits > 21) fail(ErrorKind::kValidation, "morton bits must be in [1, 21]");
  const double cells = std::ldexp(1.0, bits);
  std::uint64_t code = 0;
  for (int a = 0; a < 3; ++a) {
    const double len = box.max[a] - box.min[a];
    double q = len > 0.0 ? std::floor(cells * (p[a] - box.min[a]) / len) : 0.0;
    q = std::clamp(q, 0.0, cells - 1.0);
    code |= detail::spread_bits(static_cast<std::uint64_t>(q)) << a;
  }
  return code;
}

/// Single-precision box, rounded outward from the double input.
struct NodeBounds {
  std::array<float, 3> lo{};
  std::array<float, 3> hi{};

  static NodeBounds outward(const Aabb& b) {
    NodeBounds n;
    for (int a = 0; a < 3; ++a) {
      n.lo[a] = std::nextafter(static_cast<float>(b.min[a]), -std::numeric_limits<float>::infinity());
      n.hi[a] = std::nextafter(static_cast<float>(b.max[a]), std::numeric_limits<float>::infinity());
      while (static_cast<double>(n.lo[a]) > b.min[a]) n.lo[a] = std::nextafter(n.lo[a], -std::numeric_limits<float>::infinity());
      while (static_cast<double>(n.hi[a]) < b.max[a]) n.hi[a] = std::nextafter(n.hi[a], std::numeric_limits<float>::infinity());
    }
    return n;
  }
  static NodeBounds unite(const NodeBounds& a, const NodeBounds& b) {
    NodeBounds n;
    for (int k = 0; k < 3; ++k) {
      n.lo[k] = std::min(a.lo[k], b.lo[k]);
      n.hi[k] = std::max(a.hi[k], b.hi[k]);
    }
    return n;
  }
  bool contains(const NodeBounds& o) const {
    for (int k = 0; k < 3; ++k)
      if (o.lo[k] < lo[k] || o.hi[k] > hi[k]) return false;
    return true;
  }
  bool overlaps(const Aabb& q) const {
    for (int k = 0; k < 3; ++k)
      if (static_cast<double>(lo[k]) > q.max[k] || static_cast<double>(hi[k]) < q.min[k]) return false;
    return true;
  }
  Aabb to_aabb() const {
    return {Vec3(lo[0], lo[1], lo[2]), Vec3(hi[0], hi[1], hi[2])};
  }
  friend bool operator==(const NodeBounds& a, const NodeBounds& b) { return a.lo == b.lo && a.hi == b.hi; }
};

struct Ray {
  Vec3 origin = Vec3::Zero();
  Vec3 dir = Vec3::UnitX();  // unit length
};

/// Counters for the per-ray work model: box tests and primitive tests.
struct TraversalStats {
  std::uint64_t nodes_visited = 0;
  std::uint64_t primitives_tested = 0;
};

/// Result of a primitive intersection callback.
struct PrimitiveHit {
  double t = std::numeric_limits<double>::infinity();
  double u = 0.0;
  double v = 0.0;
};

struct RayHit {
  double t = std::numeric_limits<double>::infinity();
  std::uint32_t primitive = std::numeric_limits<std::uint32_t>::max();
  double u = 0.0;
  double v = 0.0;
};

/// Slab test against float bounds. Returns the [entry, exit] interval clipped
/// to [t_min, t_max], or nullopt on a miss.
inline std::optional<std::pair<double, double>> ray_box(const NodeBounds& b, const Vec3& origin, const Vec3& inv_dir,
                                                        const Vec3& dir, double t_min, double t_max) {
  // Relative slack that absorbs rounding in the slab arithmetic.
  constexpr double kGrow = 1.0 + 4.0 * std::numeric_limits<double>::epsilon();
  double t0 = t_min, t1 = t_max;
  for (int a = 0; a < 3; ++a) {
    const double lo = b.lo[a], hi = b.hi[a];
    if (dir[a] == 0.0) {
      if (origin[a] < lo || origin[a] > hi) return std::nullopt;
      continue;
    }
    double tn = (lo - origin[a]) * inv_dir[a];
    double tf = (hi - origin[a]) * inv_dir[a];
    if (tn > tf) std::swap(tn, tf);
    tf *= kGrow;
    tn = tn > 0 ? tn / kGrow : tn * kGrow;
    t0 = std::max(t0, tn);
    t1 = std::min(t1, tf);
    if (t0 > t1) return std::nullopt;
  }
  return std::make_pair(t0, t1);
}

class LinearBvh {
 public:
  static constexpr std::uint32_t kInvalid = std::numeric_limits<std::uint32_t>::max();

  LinearBvh() = default;

  /// Builds the tree over `boxes`. Box centres are Morton-coded inside
  /// `scene_box`; equal codes are ordered by primitive index.
  static LinearBvh build(std::span<const Aabb> boxes, const Aabb& scene_box, int bits = kDefaultMortonBits) {
    if (boxes.empty()) fail(ErrorKind::kBuild, "cannot build a BVH over zero primitives");
    if (bits < 1 || bits > 21) fail(ErrorKind::kBuild, "morton bits must be in [1, 21]");
    LinearBvh bvh;
    bvh.bits_ = bits;
    const std::size_t n = boxes.size();
    if (n >= kInvalid / 2) fail(ErrorKind::kBuild, "too many primitives for 32-bit node indices");
    bvh.prim_boxes_.assign(boxes.begin(), boxes.end());

    std::vector<std::pair<std::uint64_t, std::uint32_t>> keyed(n);
    for (std::size_t i = 0; i < n; ++i)
      keyed[i] = {morton_encode(boxes[i].center(), scene_box, bits), static_cast<std::uint32_t>(i)};
    std::sort(keyed.begin(), keyed.end());
    bvh.leaf_order_.resize(n);
    bvh.codes_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      bvh.codes_[i] = keyed[i].first;
      bvh.leaf_order_[i] = keyed[i].second;
    }

    bvh.bounds_.resize(2 * n - 1);
    for (std::size_t i = 0; i < n; ++i) bvh.bounds_[n - 1 + i] = NodeBounds::outward(boxes[bvh.leaf_order_[i]]);
    if (n == 1) return bvh;

    bvh.children_.resize(n - 1);
    bvh.build_radix_tree();
    bvh.reduce_bounds();
    return bvh;
  }

  std::size_t primitive_count() const { return leaf_order_.size(); }
  std::size_t node_count() const { return bounds_.size(); }
  std::size_t internal_count() const { return children_.size(); }
  int morton_bits() const { return bits_; }
  std::uint32_t root() const { return 0; }
  bool is_leaf(std::uint32_t node) const { return node >= internal_count(); }
  /// Primitive index stored at a leaf node.
  std::uint32_t leaf_primitive(std::uint32_t node) const { return leaf_order_[node - internal_count()]; }
  const std::array<std::uint32_t, 2>& children(std::uint32_t node) const { return children_[node]; }
  const NodeBounds& bounds(std::uint32_t node) const { return bounds_[node]; }
  std::span<const std::uint32_t> leaf_order() const { return leaf_order_; }
  std::span<const std::uint64_t> sorted_codes() const { return codes_; }
  const Aabb& primitive_box(std::uint32_t prim) const { return prim_boxes_[prim]; }

  /// Calls `fn(prim)` for every primitive whose box meets `q` (closed test).
  template <typename Fn>
  void for_each_overlap(const Aabb& q, Fn&& fn) const {
    if (bounds_.empty() || q.empty()) return;
    std::array<std::uint32_t, kStackDepth> stack;
    std::size_t top = 0;
    stack[top++] = root();
    while (top > 0) {
      const std::uint32_t node = stack[--top];
      if (!bounds_[node].overlaps(q)) continue;
      if (is_leaf(node)) {
        const std::uint32_t prim = leaf_primitive(node);
        if (prim_boxes_[prim].overlaps(q)) fn(prim);
        continue;
      }
      stack[top++] = children_[node][1];
      stack[top++] = children_[node][0];
    }
  }

  /// Sorted primitive indices whose boxes intersect `q`.
  std::vector<std::uint32_t> query_overlap(const Aabb& q) const {
    std::vector<std::uint32_t> out;
    for_each_overlap(q, [&](std::uint32_t p) { out.push_back(p); });
    std::sort(out.begin(), out.end());
    return out;
  }

  /// Nearest hit in [t_min, t_max]. `intersect(prim, ray, t_min, t_max)`
  /// returns an optional PrimitiveHit. Nodes whose entry distance exceeds the
  /// best hit so far are pruned; the nearer child is visited first. Equal t is
  /// resolved towards the smaller primitive index.
  template <typename Intersect>
  std::optional<RayHit> first_hit(const Ray& ray, double t_min, double t_max, Intersect&& intersect,
                                  TraversalStats* stats = nullptr) const {
    if (bounds_.empty()) return std::nullopt;
    const Vec3 inv = ray.dir.cwiseInverse();
    RayHit best;
    best.t = std::numeric_limits<double>::infinity();
    bool found = false;
    std::uint64_t visited = 0, tested = 0;

    struct Entry {
      std::uint32_t node;
      double t_enter;
    };
    std::array<Entry, kStackDepth> stack;
    std::size_t top = 0;

    auto consider_leaf = [&](std::uint32_t node) {
      const std::uint32_t prim = leaf_primitive(node);
      ++tested;
      const double limit = found ? best.t : t_max;
      if (auto h = intersect(prim, ray, t_min, limit)) {
        if (h->t < best.t || (h->t == best.t && prim < best.primitive)) {
          best = {h->t, prim, h->u, h->v};
          found = true;
        }
      }
    };

    ++visited;
    auto root_hit = ray_box(bounds_[root()], ray.origin, inv, ray.dir, t_min, t_max);
    if (root_hit) stack[top++] = {root(), root_hit->first};
    while (top > 0) {
      const Entry e = stack[--top];
      if (found && e.t_enter > best.t) continue;
      if (is_leaf(e.node)) {
        consider_leaf(e.node);
        continue;
      }
      const auto& ch = children_[e.node];
      const double limit = found ? std::min(best.t, t_max) : t_max;
      ++visited;
      auto h0 = ray_box(bounds_[ch[0]], ray.origin, inv, ray.dir, t_min, limit);
      ++visited;
      auto h1 = ray_box(bounds_[ch[1]], ray.origin, inv, ray.dir, t_min, limit);
      if (h0 && h1) {
        // Push the farther child first so the nearer one pops next.
        if (h0->first <= h1->first) {
          stack[top++] = {ch[1], h1->first};
          stack[top++] = {ch[0], h0->first};
        } else {
          stack[top++] = {ch[0], h0->first};
          stack[top++] = {ch[1], h1->first};
        }
      } else if (h0) {
        stack[top++] = {ch[0], h0->first};
      } else if (h1) {
        stack[top++] = {ch[1], h1->first};
      }
    }
    if (stats) {
      stats->nodes_visited += visited;
      stats->primitives_tested += tested;
    }
    if (!found) return std::nullopt;
    return best;
  }

 private:
  // Depth is bounded by 3*21 code bits plus 64 tie-break bits; the nearest-
  // first stack holds at most one pending sibling per level.
  static constexpr std::size_t kStackDepth = 192;

  int delta(std::int64_t i, std::int64_t j) const {
    const auto n = static_cast<std::int64_t>(codes_.size());
    if (j < 0 || j >= n) return -1;
    const std::uint64_t a = codes_[i], b = codes_[j];
    if (a != b) return std::countl_zero(a ^ b);
    return 64 + std::countl_zero(static_cast<std::uint64_t>(i) ^ static_cast<std::uint64_t>(j));
  }

  void build_radix_tree() {
    const auto n = static_cast<std::int64_t>(codes_.size());
    const auto leaf_base = static_cast<std::uint32_t>(n - 1);
    for (std::int64_t i = 0; i < n - 1; ++i) {
      const int d = (delta(i, i + 1) - delta(i, i - 1)) >= 0 ? 1 : -1;
      const int delta_min = delta(i, i - d);
      std::int64_t l_max = 2;
      while (delta(i, i + l_max * d) > delta_min) l_max *= 2;
      std::int64_t l = 0;
      for (std::int64_t t = l_max / 2; t >= 1; t /= 2)
        if (delta(i, i + (l + t) * d) > delta_min) l += t;
      const std::int64_t j = i + l * d;
      const int delta_node = delta(i, j);
      std::int64_t s = 0;
      std::int64_t step = l;
      do {
        step = (step + 1) >> 1;
        if (delta(i, i + (s + step) * d) > delta_node) s += step;
      } while (step > 1);
      const std::int64_t gamma = i + s * d + std::min(d, 0);
      const std::int64_t lo = std::min(i, j), hi = std::max(i, j);
      children_[i][0] = lo == gamma ? leaf_base + static_cast<std::uint32_t>(gamma) : static_cast<std::uint32_t>(gamma);
      children_[i][1] =
          hi == gamma + 1 ? leaf_base + static_cast<std::uint32_t>(gamma + 1) : static_cast<std::uint32_t>(gamma + 1);
    }
  }

  void reduce_bounds() {
    // Iterative post-order from the root.
    std::vector<std::pair<std::uint32_t, bool>> stack;
    stack.reserve(256);
    stack.push_back({root(), false});
    while (!stack.empty()) {
      auto [node, expanded] = stack.back();
      stack.pop_back();
      if (is_leaf(node)) continue;
      if (expanded) {
        bounds_[node] = NodeBounds::unite(bounds_[children_[node][0]], bounds_[children_[node][1]]);
        continue;
      }
      stack.push_back({node, true});
      stack.push_back({children_[node][0], false});
      stack.push_back({children_[node][1], false});
    }
  }

  int bits_ = kDefaultMortonBits;
  std::vector<Aabb> prim_boxes_;
  std::vector<std::uint64_t> codes_;
  std::vector<std::uint32_t> leaf_order_;
  std::vector<NodeBounds> bounds_;
  std::vector<std::array<std::uint32_t, 2>> children_;
};

}  // namespace splatlidar
