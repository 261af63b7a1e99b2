// Copyright Contributors to the splatlidar Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "splatlidar/error.hpp"
#include "splatlidar/geometry.hpp"
#include "splatlidar/parallel.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

namespace splatlidar {

/// Exact nearest-neighbour k-d tree. Nodes split the widest axis at the
/// median; leaves hold up to kLeafSize points.
class KdTree {
 public:
  static constexpr std::size_t kLeafSize = 8;

  explicit KdTree(const std::vector<Vec3>& points) : pts_(points) {
    if (pts_.empty()) fail(ErrorKind::kEmptyAsset, "cannot index an empty point cloud");
    order_.resize(pts_.size());
    std::iota(order_.begin(), order_.end(), 0u);
    nodes_.reserve(2 * pts_.size() / kLeafSize + 2);
    build(0, static_cast<std::uint32_t>(pts_.size()));
  }

  std::size_t size() const { return pts_.size(); }

  /// Squared distance to the nearest indexed point.
  double nearest_sq(const Vec3& q) const {
    double best = std::numeric_limits<double>::infinity();
    std::uint32_t stack[128];
    int top = 0;
    stack[top++] = 0;
    while (top) {
      const Node& n = nodes_[stack[--top]];
      if (box_dist_sq(n, q) >= best) continue;
      if (n.left == kLeaf) {
        for (std::uint32_t i = n.begin; i < n.end; ++i) best = std::min(best, (pts_[order_[i]] - q).squaredNorm());
        continue;
      }
      const bool left_first = q[n.axis] < n.split;
      const std::uint32_t near = left_first ? n.left : n.right;
      const std::uint32_t far = left_first ? n.right : n.left;
      stack[top++] = far;
      stack[top++] = near;
    }
    return best;
  }

  double nearest(const Vec3& q) const { return std::sqrt(nearest_sq(q)); }

 private:
  static constexpr std::uint32_t kLeaf = std::numeric_limits<std::uint32_t>::max();
  struct Node {
    Vec3 lo, hi;
    std::uint32_t begin, end;
    std::uint32_t left = kLeaf, right = kLeaf;
    int axis = 0;
    double split = 0.0;
  };

  static double box_dist_sq(const Node& n, const Vec3& q) {
    double d = 0.0;
    for (int a = 0; a < 3; ++a) {
      const double e = std::max({n.lo[a] - q[a], 0.0, q[a] - n.hi[a]});
      d += e * e;
    }
    return d;
  }

  std::uint32_t build(std::uint32_t begin, std::uint32_t end) {
    const auto id = static_cast<std::uint32_t>(nodes_.size());
    nodes_.push_back({});
    Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity()), hi = -lo;
    for (std::uint32_t i = begin; i < end; ++i) {
      lo = lo.cwiseMin(pts_[order_[i]]);
      hi = hi.cwiseMax(pts_[order_[i]]);
    }
    Node n{lo, hi, begin, end};
    if (end - begin > kLeafSize) {
      Vec3 ext = hi - lo;
      ext.maxCoeff(&n.axis);
      const std::uint32_t mid = begin + (end - begin) / 2;
      const int ax = n.axis;
      std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                       [&](std::uint32_t a, std::uint32_t b) { return pts_[a][ax] < pts_[b][ax]; });
      n.split = pts_[order_[mid]][ax];
      n.left = build(begin, mid);
      n.right = build(mid, end);
      // Depth is bounded by log2(n / kLeafSize) + 1, well below the query stack.
    }
    nodes_[id] = n;
    return id;
  }

  const std::vector<Vec3>& pts_;
  std::vector<std::uint32_t> order_;
  std::vector<Node> nodes_;
};

/// Nearest-neighbour distance from every point of `queries` to `tree`.
inline std::vector<double> nearest_distances(const std::vector<Vec3>& queries, const KdTree& tree, unsigned workers = 0) {
  std::vector<double> d(queries.size());
  parallel_for(queries.size(), workers, [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) d[i] = tree.nearest(queries[i]);
  });
  return d;
}

inline double mean_in_order(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline void require_cloud(const std::vector<Vec3>& c, const char* name) {
  if (c.empty()) fail(ErrorKind::kEmptyAsset, std::string("point cloud '") + name + "' is empty");
}

inline double chamfer(const std::vector<Vec3>& a, const std::vector<Vec3>& b, unsigned workers = 0) {
  require_cloud(a, "a");
  require_cloud(b, "b");
  const KdTree ta(a), tb(b);
  return 0.5 * (mean_in_order(nearest_distances(a, tb, workers)) + mean_in_order(nearest_distances(b, ta, workers)));
}

struct MetricReport {
  double chamfer = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double fscore = 0.0;
  double threshold = 0.0;
  std::size_t count_a = 0;
  std::size_t count_b = 0;
};

inline double harmonic_f(double p, double r) { return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

inline double fraction_within(const std::vector<double>& d, double tau) {
  std::size_t n = 0;
  for (double x : d) n += x <= tau;
  return static_cast<double>(n) / static_cast<double>(d.size());
}

/// Chamfer, precision (a near b), recall (b near a) and F-score in one pass.
inline MetricReport evaluate(const std::vector<Vec3>& a, const std::vector<Vec3>& b, double tau, unsigned workers = 0) {
  if (!(tau > 0.0) || !std::isfinite(tau)) fail(ErrorKind::kValidation, "F-score threshold must be positive");
  require_cloud(a, "a");
  require_cloud(b, "b");
  const KdTree ta(a), tb(b);
  const auto dab = nearest_distances(a, tb, workers);
  const auto dba = nearest_distances(b, ta, workers);
  MetricReport r;
  r.chamfer = 0.5 * (mean_in_order(dab) + mean_in_order(dba));
  r.precision = fraction_within(dab, tau);
  r.recall = fraction_within(dba, tau);
  r.fscore = harmonic_f(r.precision, r.recall);
  r.threshold = tau;
  r.count_a = a.size();
  r.count_b = b.size();
  return r;
}

inline MetricReport fscore(const std::vector<Vec3>& a, const std::vector<Vec3>& b, double tau, unsigned workers = 0) {
  return evaluate(a, b, tau, workers);
}

/// Plain mean of per-frame reports (frames first, then sensors by nesting).
/// F is recomputed from the averaged P and R.
inline MetricReport average_reports(const std::vector<MetricReport>& rs) {
  if (rs.empty()) fail(ErrorKind::kValidation, "no reports to average");
  MetricReport m;
  for (const auto& r : rs) {
    m.chamfer += r.chamfer;
    m.precision += r.precision;
    m.recall += r.recall;
    m.count_a += r.count_a;
    m.count_b += r.count_b;
  }
  const double n = static_cast<double>(rs.size());
  m.chamfer /= n;
  m.precision /= n;
  m.recall /= n;
  m.fscore = harmonic_f(m.precision, m.recall);
  m.threshold = rs.front().threshold;
  return m;
}

inline std::string format_report(const MetricReport& r) {
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "chamfer=%.9g\nprecision=%.9g\nrecall=%.9g\nfscore=%.9g\nthreshold=%.9g\ncount_a=%zu\ncount_b=%zu\n",
                r.chamfer, r.precision, r.recall, r.fscore, r.threshold, r.count_a, r.count_b);
  return buf;
}

inline nlohmann::ordered_json report_json(const MetricReport& r, const std::string& label = {}) {
  nlohmann::ordered_json j;
  if (!label.empty()) j["label"] = label;
  j["chamfer"] = r.chamfer;
  j["precision"] = r.precision;
  j["recall"] = r.recall;
  j["fscore"] = r.fscore;
  j["threshold"] = r.threshold;
  j["count_a"] = r.count_a;
  j["count_b"] = r.count_b;
  return j;
}

}  // namespace splatlidar
