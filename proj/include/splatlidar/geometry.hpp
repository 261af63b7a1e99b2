// Copyright Contributors to the splatlidar Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <algorithm>
#include <limits>

namespace splatlidar {

inline constexpr double kPi = 3.14159265358979323846;

/// Nearest float value. Goes through a volatile so vectorised code cannot
/// fold the double -> float -> double round trip away.
inline double round_to_float(double v) {
  volatile float f = static_cast<float>(v);
  return f;
}

using Vec3 = Eigen::Vector3d;
using Vec3f = Eigen::Vector3f;
using Mat3 = Eigen::Matrix3d;

/// Closed axis-aligned box. A default-constructed box is empty (min > max).
struct Aabb {
  Vec3 min = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 max = Vec3::Constant(-std::numeric_limits<double>::infinity());

  Aabb() = default;
  Aabb(const Vec3& lo, const Vec3& hi) : min(lo), max(hi) {}

  bool empty() const { return (min.array() > max.array()).any(); }

  void extend(const Vec3& p) {
    min = min.cwiseMin(p);
    max = max.cwiseMax(p);
  }
  void extend(const Aabb& b) {
    min = min.cwiseMin(b.min);
    max = max.cwiseMax(b.max);
  }

  Vec3 center() const { return 0.5 * (min + max); }
  Vec3 extent() const { return max - min; }

  bool contains(const Vec3& p) const {
    return (p.array() >= min.array()).all() && (p.array() <= max.array()).all();
  }
  bool contains(const Aabb& b) const {
    return (b.min.array() >= min.array()).all() && (b.max.array() <= max.array()).all();
  }
  bool overlaps(const Aabb& b) const {
    return (min.array() <= b.max.array()).all() && (b.min.array() <= max.array()).all();
  }

  Aabb padded(double margin) const {
    return {min - Vec3::Constant(margin), max + Vec3::Constant(margin)};
  }

  friend bool operator==(const Aabb& a, const Aabb& b) { return a.min == b.min && a.max == b.max; }
};

inline Aabb merge(const Aabb& a, const Aabb& b) {
  Aabb out = a;
  out.extend(b);
  return out;
}

}  // namespace splatlidar
