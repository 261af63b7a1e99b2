// Copyright Contributors to the splatlidar Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Seeded synthetic scenes: Gaussian clouds sampled on a known surface, paired
// with the exact reference mesh of that surface.

#include "splatlidar/error.hpp"
#include "splatlidar/gaussian.hpp"
#include "splatlidar/mesh.hpp"

#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

namespace splatlidar {

struct SynthAsset {
  std::string shape;
  std::vector<Gaussian> gaussians;
  TriangleMesh reference;
  bool watertight = true;
  double sample_spacing = 0.0;  // mean distance between neighbouring Gaussians
};

struct SynthOptions {
  std::size_t count = 50000;
  std::uint64_t seed = 7;
  double scale_factor = 0.55;  // isotropic scale as a multiple of sample_spacing
  double jitter = 0.2;         // maximum offset as a multiple of sample_spacing
  double opacity = 0.9;
};

/// Unit icosahedron refined `subdivisions` times, vertices projected onto the
/// sphere. Faces wind outward.
inline TriangleMesh icosphere(double radius, int subdivisions, const Vec3& center = Vec3::Zero()) {
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Vec3> v = {{-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
                         {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
  for (auto& p : v) p.normalize();
  std::vector<Triangle> f = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
                             {11, 10, 2}, {10, 7, 6}, {7, 1, 8},  {3, 9, 4},  {3, 4, 2},   {3, 2, 6}, {3, 6, 8},
                             {3, 8, 9},  {4, 9, 5},  {2, 4, 11}, {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};
  for (int s = 0; s < subdivisions; ++s) {
    std::map<std::uint64_t, std::uint32_t> mid;
    auto midpoint = [&](std::uint32_t a, std::uint32_t b) {
      const std::uint64_t key = edge_key(a, b);
      auto it = mid.find(key);
      if (it != mid.end()) return it->second;
      v.push_back((v[a] + v[b]).normalized());
      const auto id = static_cast<std::uint32_t>(v.size() - 1);
      mid.emplace(key, id);
      return id;
    };
    std::vector<Triangle> next;
    next.reserve(f.size() * 4);
    for (const auto& tri : f) {
      const auto a = midpoint(tri[0], tri[1]), b = midpoint(tri[1], tri[2]), c = midpoint(tri[2], tri[0]);
      next.push_back({tri[0], a, c});
      next.push_back({tri[1], b, a});
      next.push_back({tri[2], c, b});
      next.push_back({a, b, c});
    }
    f = std::move(next);
  }
  TriangleMesh m;
  m.vertices.reserve(v.size());
  for (const auto& p : v) m.vertices.push_back(center + radius * p);
  m.triangles = std::move(f);
  return m;
}

namespace detail {

inline Gaussian surface_gaussian(const Vec3& p, double scale, double opacity) {
  Gaussian g;
  for (int a = 0; a < 3; ++a) g.mu[a] = round_to_float(p[a]);
  g.scale = Vec3::Constant(round_to_float(scale));
  g.opacity = round_to_float(opacity);
  return g;
}

/// Uniform offset inside a ball of the given radius.
inline Vec3 ball_jitter(std::mt19937_64& rng, double radius) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Vec3 d(n(rng), n(rng), n(rng));
  const double len = d.norm();
  if (len == 0.0) return Vec3::Zero();
  return d / len * radius * std::cbrt(u(rng));
}

/// Adds a planar quad p0..p3 as two triangles wound so their normal matches
/// `outward`.
inline void add_quad(TriangleMesh& m, const Vec3& p0, const Vec3& p1, const Vec3& p2, const Vec3& p3, const Vec3& outward) {
  const auto base = static_cast<std::uint32_t>(m.vertices.size());
  m.vertices.insert(m.vertices.end(), {p0, p1, p2, p3});
  Triangle a{base, base + 1, base + 2}, b{base, base + 2, base + 3};
  if ((p1 - p0).cross(p2 - p0).dot(outward) < 0.0) {
    std::swap(a[1], a[2]);
    std::swap(b[1], b[2]);
  }
  m.triangles.push_back(a);
  m.triangles.push_back(b);
}

struct Face {
  Vec3 origin, u, v, outward;  // points origin + a*u + b*v, a,b in [0,1]
};

inline std::vector<Face> box_faces(const Vec3& lo, const Vec3& hi) {
  const Vec3 e = hi - lo;
  const Vec3 x(e.x(), 0, 0), y(0, e.y(), 0), z(0, 0, e.z());
  return {{lo, y, z, -Vec3::UnitX()}, {lo + x, y, z, Vec3::UnitX()}, {lo, x, z, -Vec3::UnitY()},
          {lo + y, x, z, Vec3::UnitY()}, {lo, x, y, -Vec3::UnitZ()}, {lo + z, x, y, Vec3::UnitZ()}};
}

/// Names shared so both the Gaussian sampler and the reference mesh agree.
struct Door {
  int face = 2;  // the -y wall
  double a0, a1, b1;  // opening spans origin + [a0,a1]*u + [0,b1]*v, in fractions
};

inline void sample_faces(SynthAsset& out, const std::vector<Face>& faces, const SynthOptions& o, const Door* door) {
  double area = 0.0;
  for (const auto& f : faces) area += f.u.cross(f.v).norm();
  const double h = std::sqrt(area / static_cast<double>(o.count));
  out.sample_spacing = h;
  std::mt19937_64 rng(o.seed);
  for (int fi = 0; fi < static_cast<int>(faces.size()); ++fi) {
    const auto& f = faces[fi];
    const int nu = std::max(1, static_cast<int>(std::lround(f.u.norm() / h)));
    const int nv = std::max(1, static_cast<int>(std::lround(f.v.norm() / h)));
    for (int b = 0; b < nv; ++b)
      for (int a = 0; a < nu; ++a) {
        const double fa = (a + 0.5) / nu, fb = (b + 0.5) / nv;
        if (door && fi == door->face && fa > door->a0 && fa < door->a1 && fb < door->b1) continue;
        const Vec3 p = f.origin + fa * f.u + fb * f.v + ball_jitter(rng, o.jitter * h);
        out.gaussians.push_back(surface_gaussian(p, o.scale_factor * h, o.opacity));
      }
  }
}

inline void validate_synth(const SynthOptions& o) {
  if (o.count < 1) fail(ErrorKind::kValidation, "synthetic asset needs at least one Gaussian");
  if (!(o.scale_factor > 0.0)) fail(ErrorKind::kValidation, "synthetic scale factor must be positive");
  if (!(o.jitter >= 0.0 && o.jitter <= 0.2)) fail(ErrorKind::kValidation, "synthetic jitter must be in [0, 0.2]");
  if (!(o.opacity > 0.0 && o.opacity < 1.0)) fail(ErrorKind::kValidation, "synthetic opacity must be in (0,1)");
}

}  // namespace detail

/// Gaussians on a Fibonacci lattice over the sphere, each jittered by at most
/// jitter * spacing.
inline SynthAsset synth_sphere(double radius, const SynthOptions& o = {}, const Vec3& center = Vec3::Zero()) {
  detail::validate_synth(o);
  if (!(radius > 0.0)) fail(ErrorKind::kValidation, "sphere radius must be positive");
  SynthAsset out;
  out.shape = "sphere";
  const double n = static_cast<double>(o.count);
  const double h = std::sqrt(4.0 * kPi * radius * radius / n);
  out.sample_spacing = h;
  const double golden = kPi * (3.0 - std::sqrt(5.0));
  std::mt19937_64 rng(o.seed);
  out.gaussians.reserve(o.count);
  for (std::size_t i = 0; i < o.count; ++i) {
    const double z = 1.0 - (2.0 * static_cast<double>(i) + 1.0) / n;
    const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double phi = golden * static_cast<double>(i);
    const Vec3 p = center + radius * Vec3(rho * std::cos(phi), rho * std::sin(phi), z);
    out.gaussians.push_back(detail::surface_gaussian(p + detail::ball_jitter(rng, o.jitter * h), o.scale_factor * h,
                                                     o.opacity));
  }
  out.reference = icosphere(radius, 5, center);
  return out;
}

/// Solid box centred at the origin; the reference mesh has 12 triangles.
inline SynthAsset synth_box(const Vec3& size, const SynthOptions& o = {}) {
  detail::validate_synth(o);
  if (!(size.minCoeff() > 0.0)) fail(ErrorKind::kValidation, "box size must be positive");
  SynthAsset out;
  out.shape = "box";
  const Vec3 lo = -0.5 * size, hi = 0.5 * size;
  const auto faces = detail::box_faces(lo, hi);
  detail::sample_faces(out, faces, o, nullptr);
  // Shared corners: 8 vertices, 12 triangles.
  TriangleMesh& m = out.reference;
  for (int c = 0; c < 8; ++c) m.vertices.push_back({c & 1 ? hi.x() : lo.x(), c & 2 ? hi.y() : lo.y(), c & 4 ? hi.z() : lo.z()});
  const int quads[6][4] = {{0, 4, 6, 2}, {1, 3, 7, 5}, {0, 1, 5, 4}, {2, 6, 7, 3}, {0, 2, 3, 1}, {4, 5, 7, 6}};
  for (const auto& q : quads) {
    m.triangles.push_back({std::uint32_t(q[0]), std::uint32_t(q[1]), std::uint32_t(q[2])});
    m.triangles.push_back({std::uint32_t(q[0]), std::uint32_t(q[2]), std::uint32_t(q[3])});
  }
  return out;
}

/// Box-shaped room (walls, floor, ceiling) with a door cut into the -y wall.
/// The reference mesh is open at the door.
inline SynthAsset synth_room(const Vec3& size, const SynthOptions& o = {}, double door_width = 0.9,
                             double door_height = 2.0) {
  detail::validate_synth(o);
  if (!(size.minCoeff() > 0.0)) fail(ErrorKind::kValidation, "room size must be positive");
  if (!(door_width > 0.0 && door_width < size.x() && door_height > 0.0 && door_height < size.z()))
    fail(ErrorKind::kValidation, "door must fit inside the -y wall");
  SynthAsset out;
  out.shape = "room";
  out.watertight = false;
  const Vec3 lo = -0.5 * size, hi = 0.5 * size;
  const auto faces = detail::box_faces(lo, hi);
  const double a0 = 0.5 - 0.5 * door_width / size.x(), a1 = 0.5 + 0.5 * door_width / size.x();
  const double b1 = door_height / size.z();
  const detail::Door door{2, a0, a1, b1};
  detail::sample_faces(out, faces, o, &door);
  TriangleMesh& m = out.reference;
  for (int fi = 0; fi < 6; ++fi) {
    const auto& f = faces[fi];
    auto at = [&](double a, double b) -> Vec3 { return f.origin + a * f.u + b * f.v; };
    if (fi != door.face) {
      detail::add_quad(m, at(0, 0), at(1, 0), at(1, 1), at(0, 1), f.outward);
      continue;
    }
    detail::add_quad(m, at(0, 0), at(a0, 0), at(a0, b1), at(0, 1), f.outward);
    detail::add_quad(m, at(0, 1), at(a0, b1), at(a1, b1), at(1, 1), f.outward);
    detail::add_quad(m, at(a1, b1), at(a1, 0), at(1, 0), at(1, 1), f.outward);
  }
  return out;
}

/// Sidecar metadata written beside synthetic assets.
inline std::string synth_metadata(const SynthAsset& a, const SynthOptions& o) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", a.sample_spacing);
  return "shape=" + a.shape + "\ncount=" + std::to_string(a.gaussians.size()) + "\nseed=" + std::to_string(o.seed) +
         "\nsample_spacing=" + buf + "\nreference_faces=" + std::to_string(a.reference.face_count()) +
         "\nwatertight=" + (a.watertight ? "true" : "false") + "\n";
}

}  // namespace splatlidar
