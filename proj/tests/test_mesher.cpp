// Copyright Contributors to the splatlidar Project
// SPDX-License-Identifier: Apache-2.0

#include "splatlidar/marching_cubes.hpp"
#include "splatlidar/mesh_io.hpp"
#include "splatlidar/simplify.hpp"
#include "splatlidar/smooth.hpp"
#include "splatlidar/synth.hpp"
#include "splatlidar/tsdf.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <cstring>
#include <functional>
#include <random>

using namespace splatlidar;
using splatlidar::test_support::error_kind_of;
namespace tu = splatlidar::test_support;

namespace {

VoxelGrid cube_grid(double half_extent, double spacing) {
  return make_padded_grid(Aabb(Vec3::Constant(-half_extent), Vec3::Constant(half_extent)), spacing);
}

double sphere_sdf(const Vec3& p, double r) { return p.norm() - r; }

double box_sdf(const Vec3& p, const Vec3& half) {
  const Vec3 q = p.cwiseAbs() - half;
  return q.cwiseMax(0.0).norm() + std::min(q.maxCoeff(), 0.0);
}

SignedField sphere_field(double r, double spacing) {
  return sample_field(cube_grid(r + 4 * spacing, spacing), 4 * spacing, [&](const Vec3& p) { return sphere_sdf(p, r); });
}

OccupancyVolume occupancy_of(const VoxelGrid& g, const std::function<bool(const Vec3&)>& inside) {
  OccupancyVolume v;
  v.grid = g;
  v.occupancy = BitVolume(g.dims);
  for (int k = 0; k < g.dims[2]; ++k)
    for (int j = 0; j < g.dims[1]; ++j)
      for (int i = 0; i < g.dims[0]; ++i) v.occupancy.set(i, j, k, inside(g.center(i, j, k)));
  return v;
}

double signed_volume(const TriangleMesh& m) {
  double v = 0.0;
  for (const auto& t : m.triangles) v += m.vertices[t[0]].dot(m.vertices[t[1]].cross(m.vertices[t[2]])) / 6.0;
  return v;
}

double bbox_volume(const TriangleMesh& m) { return m.bounds().extent().prod(); }

}  // namespace

TEST(MarchingCubes, AnalyticSphereLevelSet) {
  for (int step : {1, 2}) {
    const double v = 0.05;
    const auto f = sphere_field(1.0, v);
    const auto m = marching_cubes(f, 0.0, step);
    ASSERT_FALSE(m.empty());
    EXPECT_TRUE(is_watertight(m));
    EXPECT_TRUE(is_consistently_oriented(m));
    EXPECT_EQ(euler_characteristic(m), 2);
    EXPECT_GT(signed_volume(m), 0.0);
    for (const auto& p : m.vertices) ASSERT_LE(std::abs(p.norm() - 1.0), 1.5 * v * step);
  }
}

TEST(MarchingCubes, AnalyticBoxLevelSet) {
  const double v = 0.04;
  const Vec3 half(0.5, 0.3, 0.4);
  const auto f = sample_field(cube_grid(0.7, v), 4 * v, [&](const Vec3& p) { return box_sdf(p, half); });
  const auto m = marching_cubes(f);
  EXPECT_TRUE(is_watertight(m));
  EXPECT_TRUE(is_consistently_oriented(m));
  for (const auto& p : m.vertices) ASSERT_LE(std::abs(box_sdf(p, half)), 1.5 * v);
}

TEST(MarchingCubes, OccupancySphereRadiiAndTopology) {
  const double v = 0.05;
  const auto occ = occupancy_of(cube_grid(2.3, v), [](const Vec3& p) { return p.norm() <= 2.0; });
  const auto f = assemble_tsdf(occ, 4 * v);
  const auto m = marching_cubes(f);
  EXPECT_TRUE(is_watertight(m));
  EXPECT_TRUE(is_consistently_oriented(m));
  EXPECT_EQ(euler_characteristic(m), 2);
  for (const auto& p : m.vertices) ASSERT_LE(std::abs(p.norm() - 2.0), 2 * v);
}

TEST(MarchingCubes, OccupancyCubeArea) {
  const double v = 0.025;
  const auto occ = occupancy_of(cube_grid(0.6, v), [](const Vec3& p) { return p.cwiseAbs().maxCoeff() <= 0.5; });
  const auto m = marching_cubes(assemble_tsdf(occ, 4 * v));
  EXPECT_TRUE(is_watertight(m));
  EXPECT_NEAR(surface_area(m), 6.0, 0.6);
}

TEST(MarchingCubes, RandomOccupancyIsClosed) {
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const auto occ = oracle::random_blob_volume(28, 40 + seed, 6, 0.02);
    const auto m = marching_cubes(assemble_tsdf(occ, 4.0));
    ASSERT_FALSE(m.empty());
    EXPECT_TRUE(is_watertight(m)) << seed;
    EXPECT_TRUE(is_consistently_oriented(m)) << seed;
    EXPECT_GT(signed_volume(m), 0.0);
  }
}

TEST(MarchingCubes, SaltAndPepperSignsAreClosedManifold) {
  // Independent random signs hit every ambiguous face and interior case.
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    SignedField f;
    f.grid = cube_grid(1.0, 0.125);
    f.band_radius = 1.0;
    f.phi.assign(f.grid.count(), 0.5f);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> u(-0.5f, 0.5f);
    const Index3 d = f.grid.dims;
    for (int k = 1; k + 1 < d[2]; ++k)
      for (int j = 1; j + 1 < d[1]; ++j)
        for (int i = 1; i + 1 < d[0]; ++i) {
          float x = u(rng);
          if (std::abs(x) < 0.01f) x = 0.25f;
          f.phi[f.grid.index(i, j, k)] = x;
        }
    const auto m = marching_cubes(f);
    ASSERT_FALSE(m.empty());
    EXPECT_TRUE(is_watertight(m)) << seed;
    EXPECT_TRUE(is_consistently_oriented(m)) << seed;
  }
}

TEST(MarchingCubes, OneSignedFieldIsEmpty) {
  const auto f = sample_field(cube_grid(1.0, 0.1), 0.4, [](const Vec3&) { return 1.0; });
  EXPECT_TRUE(marching_cubes(f).empty());
}

TEST(MarchingCubes, WorkerCountInvariant) {
  const auto occ = oracle::random_blob_volume(30, 77);
  const auto f = assemble_tsdf(occ, 4.0);
  const auto a = marching_cubes(f, 0.0, 1, 1), b = marching_cubes(f, 0.0, 1, 4);
  EXPECT_EQ(a.vertices, b.vertices);
  EXPECT_EQ(a.triangles, b.triangles);
}

TEST(MarchingCubes, Errors) {
  const auto f = sphere_field(1.0, 0.1);
  EXPECT_EQ(error_kind_of([&] { marching_cubes(f, 0.0, 0); }), ErrorKind::kValidation);
  EXPECT_EQ(error_kind_of([&] { marching_cubes(f, 0.5); }), ErrorKind::kValidation);
}

TEST(Normals, SphereRadial) {
  const auto f = sphere_field(1.0, 0.05);
  const auto m = gradient_normals(f, marching_cubes(f));
  std::size_t good = 0;
  for (std::size_t i = 0; i < m.vertex_count(); ++i) {
    ASSERT_NEAR(m.normals[i].norm(), 1.0, 1e-4);
    good += m.normals[i].dot(m.vertices[i].normalized()) >= std::cos(5.0 * kPi / 180.0);
  }
  EXPECT_GE(double(good), 0.99 * m.vertex_count());
}

TEST(Normals, HalfSpaceIsPlusZ) {
  const auto f = sample_field(cube_grid(1.0, 0.1), 0.4, [](const Vec3& p) { return p.z() - 0.13; });
  const auto m = gradient_normals(f, marching_cubes(f));
  ASSERT_FALSE(m.empty());
  for (const auto& n : m.normals) ASSERT_LT((n - Vec3::UnitZ()).norm(), 1e-3);
}

TEST(Normals, BoxFaceInteriors) {
  const double v = 0.04;
  const Vec3 half(0.5, 0.5, 0.5);
  const auto f = sample_field(cube_grid(0.7, v), 4 * v, [&](const Vec3& p) { return box_sdf(p, half); });
  const auto m = gradient_normals(f, marching_cubes(f));
  std::size_t checked = 0;
  for (std::size_t i = 0; i < m.vertex_count(); ++i) {
    const Vec3 p = m.vertices[i];
    int axis;
    p.cwiseAbs().maxCoeff(&axis);
    Vec3 others = p.cwiseAbs();
    others[axis] = 0.0;
    if (others.maxCoeff() > 0.5 - 3 * v) continue;
    Vec3 expect = Vec3::Zero();
    expect[axis] = p[axis] > 0 ? 1.0 : -1.0;
    EXPECT_GE(m.normals[i].dot(expect), std::cos(kPi / 180.0));
    ++checked;
  }
  EXPECT_GT(checked, 500u);
}

TEST(Simplify, RatioOneKeepsTopology) {
  const auto m = marching_cubes(sphere_field(1.0, 0.1));
  SimplifyOptions o;
  const auto r = simplify(m, o);
  EXPECT_EQ(r.mesh.face_count(), m.face_count());
  EXPECT_EQ(r.mesh.vertex_count(), m.vertex_count());
  EXPECT_FALSE(r.target_unreachable);
}

TEST(Simplify, SphereHausdorffBound) {
  const double v = 0.035;
  const auto raw = marching_cubes(sphere_field(1.0, v));
  ASSERT_GT(raw.face_count(), 15000u);
  SimplifyOptions o;
  o.face_target = 2000;
  const auto r = simplify(raw, o);
  EXPECT_LE(r.mesh.face_count(), 2000u);
  EXPECT_GT(r.mesh.face_count(), 1500u);
  EXPECT_TRUE(is_watertight(r.mesh));
  EXPECT_TRUE(is_consistently_oriented(r.mesh));
  EXPECT_EQ(euler_characteristic(r.mesh), 2);
  EXPECT_LT(oracle::hausdorff(r.mesh, raw), 3 * v);
}

TEST(Simplify, RatioTargetWithinTolerance) {
  const double v = 0.05;
  const auto raw = marching_cubes(sphere_field(1.0, v));
  SimplifyOptions o;
  o.ratio = 0.25;
  const auto r = simplify(raw, o);
  EXPECT_LE(r.mesh.face_count(), raw.face_count() / 4 + 1);
  EXPECT_LT(oracle::hausdorff(r.mesh, raw), 2 * v);
}

TEST(Simplify, RemovesSliverComponent) {
  auto m = marching_cubes(sphere_field(1.0, 0.1));
  const std::size_t n = m.face_count();
  // A tiny closed octahedron well away from the sphere.
  const std::uint32_t base = static_cast<std::uint32_t>(m.vertex_count());
  const Vec3 c(3, 0, 0);
  const std::array<Vec3, 6> dirs{Vec3(1, 0, 0), Vec3(-1, 0, 0), Vec3(0, 1, 0), Vec3(0, -1, 0), Vec3(0, 0, 1), Vec3(0, 0, -1)};
  for (const auto& d : dirs) m.vertices.push_back(c + 0.01 * d);
  const std::array<Triangle, 8> faces{{{0, 2, 4}, {2, 1, 4}, {1, 3, 4}, {3, 0, 4}, {2, 0, 5}, {1, 2, 5}, {3, 1, 5}, {0, 3, 5}}};
  for (auto t : faces) m.triangles.push_back({base + t[0], base + t[1], base + t[2]});
  const auto r = simplify(m);
  EXPECT_EQ(r.mesh.face_count(), n);
  EXPECT_LT(r.mesh.bounds().max.x(), 2.0);
}

TEST(Simplify, UnreachableTargetFlagged) {
  SimplifyOptions o;
  o.face_target = 4;
  const auto r = simplify(icosphere(1.0, 2), o);
  EXPECT_GE(r.mesh.face_count(), 4u);
  EXPECT_EQ(r.target_unreachable, r.mesh.face_count() > 4);
  EXPECT_TRUE(is_watertight(r.mesh));
  o.face_target = 1;
  EXPECT_EQ(error_kind_of([&] { simplify(icosphere(1.0, 2), o); }), ErrorKind::kValidation);
}

TEST(Taubin, ZeroIterationsIsIdentity) {
  const auto m = icosphere(1.0, 2);
  TaubinOptions o;
  o.iterations = 0;
  EXPECT_EQ(taubin_smooth(m, o).vertices, m.vertices);
}

TEST(Taubin, NoisySphere) {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> noise(0.0, 0.01);
  const auto clean = icosphere(1.0, 4);
  auto noisy = clean;
  for (auto& p : noisy.vertices) p *= 1.0 + noise(rng);
  auto rms = [](const TriangleMesh& m) {
    double s = 0.0;
    for (const auto& p : m.vertices) s += (p.norm() - 1.0) * (p.norm() - 1.0);
    return std::sqrt(s / m.vertex_count());
  };
  auto mean_r = [](const TriangleMesh& m) {
    double s = 0.0;
    for (const auto& p : m.vertices) s += p.norm();
    return s / m.vertex_count();
  };
  const auto out = taubin_smooth(noisy);
  EXPECT_LE(rms(out), 0.5 * rms(noisy));
  EXPECT_NEAR(mean_r(out), mean_r(noisy), 0.01 * mean_r(noisy));
  EXPECT_EQ(out.triangles, noisy.triangles);
}

TEST(Taubin, BoundingBoxVolumeStable) {
  const auto m = marching_cubes(sphere_field(1.0, 0.04));
  const auto out = taubin_smooth(m);
  EXPECT_LT(std::abs(bbox_volume(out) / bbox_volume(m) - 1.0), 0.02);
  // Sharp edges move by a fixed number of cells, so the cube needs enough
  // cells per side (here 80) for its box to stay within tolerance.
  const auto occ = occupancy_of(cube_grid(0.6, 0.0125), [](const Vec3& p) { return p.cwiseAbs().maxCoeff() <= 0.5; });
  const auto cube = marching_cubes(assemble_tsdf(occ, 0.05));
  EXPECT_LT(std::abs(bbox_volume(taubin_smooth(cube)) / bbox_volume(cube) - 1.0), 0.02);
}

TEST(Taubin, SingleTriangleStaysPlanar) {
  TriangleMesh m;
  m.vertices = {{0, 0, 0}, {1, 0, 0}, {0.2, 0.7, 0}};
  m.triangles = {{0, 1, 2}};
  const Vec3 centroid = (m.vertices[0] + m.vertices[1] + m.vertices[2]) / 3.0;
  const auto out = taubin_smooth(m);
  const Vec3 c2 = (out.vertices[0] + out.vertices[1] + out.vertices[2]) / 3.0;
  EXPECT_LT((c2 - centroid).norm(), 1e-9);
  for (const auto& p : out.vertices) EXPECT_EQ(p.z(), 0.0);
}

TEST(Taubin, RejectsUnstableParameters) {
  TaubinOptions o;
  o.mu = -0.3;
  EXPECT_EQ(error_kind_of([&] { taubin_smooth(icosphere(1.0, 1), o); }), ErrorKind::kValidation);
  o = {};
  o.lambda = 1.5;
  EXPECT_EQ(error_kind_of([&] { taubin_smooth(icosphere(1.0, 1), o); }), ErrorKind::kValidation);
}

TEST(MeshIo, ObjRoundTrip) {
  const auto f = sphere_field(1.0, 0.2);
  const auto m = gradient_normals(f, marching_cubes(f));
  const auto back = parse_obj(serialize_obj(m));
  ASSERT_EQ(back.vertex_count(), m.vertex_count());
  EXPECT_EQ(back.triangles, m.triangles);
  ASSERT_EQ(back.normals.size(), m.normals.size());
  for (std::size_t i = 0; i < m.vertex_count(); ++i) {
    for (int a = 0; a < 3; ++a) EXPECT_EQ(static_cast<float>(back.vertices[i][a]), static_cast<float>(m.vertices[i][a]));
  }
  EXPECT_EQ(parse_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nv 1 1 0\nf 1 2 4 3\n").face_count(), 2u);
  EXPECT_EQ(error_kind_of([] { parse_obj("v 0 0 0\nf 1 2 3\n"); }), ErrorKind::kFormat);
}

TEST(MeshIo, BinaryPlyLayout) {
  TriangleMesh m;
  m.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
  m.triangles = {{0, 1, 2}};
  const std::string bytes = serialize_mesh_ply(m);
  EXPECT_NE(bytes.find("format binary_little_endian 1.0"), std::string::npos);
  EXPECT_NE(bytes.find("property float x"), std::string::npos);
  EXPECT_NE(bytes.find("property list uchar int vertex_indices"), std::string::npos);
  const std::size_t body = bytes.find("end_header\n") + 11;
  EXPECT_EQ(bytes.size() - body, 3 * 12 + 1 + 12u);
  float x1;
  std::memcpy(&x1, bytes.data() + body + 12, 4);
  EXPECT_EQ(x1, 1.0f);
  const auto back = parse_mesh_ply(bytes);
  EXPECT_EQ(back.triangles, m.triangles);
  EXPECT_EQ(back.vertices, m.vertices);
}

TEST(MeshIo, FilesByExtension) {
  tu::TempDir dir;
  const auto m = icosphere(1.0, 1);
  for (const char* name : {"m.obj", "m.ply", "M.OBJ"}) {
    save_mesh(dir.file(name), m);
    const auto back = load_mesh(dir.file(name));
    EXPECT_EQ(back.triangles, m.triangles) << name;
  }
  EXPECT_EQ(error_kind_of([&] { load_mesh(dir.file("missing.ply")); }), ErrorKind::kIo);
}
