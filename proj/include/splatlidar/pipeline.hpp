// Copyright Contributors to the splatlidar Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

// End-to-end stages driven by a PipelineConfig.

#include "splatlidar/config.hpp"
#include "splatlidar/evalkit.hpp"
#include "splatlidar/gaussian.hpp"
#include "splatlidar/lidar.hpp"
#include "splatlidar/lidar_io.hpp"
#include "splatlidar/marching_cubes.hpp"
#include "splatlidar/mesh_io.hpp"
#include "splatlidar/simplify.hpp"
#include "splatlidar/smooth.hpp"
#include "splatlidar/tsdf.hpp"
#include "splatlidar/volume_io.hpp"
#include "splatlidar/voxelizer.hpp"

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace splatlidar {

inline std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

struct StageTiming {
  std::string stage;
  double seconds = 0.0;
};

/// Runs `fn` as a named stage, recording wall time and prefixing any error
/// with the stage name and a remediation hint.
template <typename Fn>
auto run_stage(std::vector<StageTiming>& timings, const std::string& stage, const std::string& hint, Fn&& fn) {
  const auto t0 = std::chrono::steady_clock::now();
  auto record = [&] {
    timings.push_back({stage, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()});
  };
  try {
    if constexpr (std::is_void_v<decltype(fn())>) {
      fn();
      record();
    } else {
      auto r = fn();
      record();
      return r;
    }
  } catch (const Error& e) {
    throw Error(e.kind(), stage + ": " + e.what() + (hint.empty() ? "" : " (hint: " + hint + ")"));
  }
}

struct MeshReport {
  std::size_t gaussians = 0;
  Index3 dims{0, 0, 0};
  double spacing = 0.0;
  std::size_t occupied_voxels = 0;
  std::size_t raw_faces = 0;
  std::size_t final_faces = 0;
  bool raw_watertight = false;
  bool watertight = false;
  long euler = 0;
  bool simplify_target_unreachable = false;
  bool cache_hit = false;
  std::vector<StageTiming> timings;
};

inline std::string format_mesh_report(const MeshReport& r) {
  std::string s;
  char buf[128];
  auto line = [&](const char* key, const std::string& v) { s += std::string(key) + "=" + v + "\n"; };
  line("gaussians", std::to_string(r.gaussians));
  line("voxel_dims", std::to_string(r.dims[0]) + "x" + std::to_string(r.dims[1]) + "x" + std::to_string(r.dims[2]));
  std::snprintf(buf, sizeof buf, "%.9g", r.spacing);
  line("voxel_spacing", buf);
  line("occupied_voxels", std::to_string(r.occupied_voxels));
  line("raw_faces", std::to_string(r.raw_faces));
  line("final_faces", std::to_string(r.final_faces));
  line("raw_watertight", r.raw_watertight ? "true" : "false");
  line("watertight", r.watertight ? "true" : "false");
  line("euler_characteristic", std::to_string(r.euler));
  line("simplify_target_unreachable", r.simplify_target_unreachable ? "true" : "false");
  line("voxel_cache_hit", r.cache_hit ? "true" : "false");
  for (const auto& t : r.timings) {
    std::snprintf(buf, sizeof buf, "%.6f", t.seconds);
    s += "time_" + t.stage + "_s=" + buf + "\n";
  }
  return s;
}

struct MeshResult {
  TriangleMesh mesh;
  TriangleMesh raw;   // marching-cubes output before simplification and smoothing
  PipelineConfig resolved;  // auto fields replaced by the values used
  MeshReport report;
};

struct MeshRunOptions {
  unsigned workers = 0;
  std::string cache_dir;  // empty: no occupancy cache
  std::size_t cell_budget = std::size_t{1024} * 1024 * 1024;
};

/// Cache key over the input bytes and every setting the occupancy depends on.
inline std::uint64_t occupancy_cache_key(std::string_view input, const PipelineConfig& c) {
  std::string voxel_cfg = "drop_transparent=" + std::string(c.drop_transparent ? "1" : "0") +
                          ";opacity_floor=" + detail::fmt_double(c.opacity_floor) +
                          ";kappa=" + detail::fmt_double(c.kappa) + ";spacing=" + detail::fmt_auto(c.spacing) +
                          ";theta=" + detail::fmt_double(c.theta) + ";v1";
  return fnv1a64(voxel_cfg, fnv1a64(input));
}

inline std::string hex64(std::uint64_t v) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

/// Gaussians -> watertight mesh. Deterministic for any worker count.
inline MeshResult mesh_from_gaussians(std::string_view ply_bytes, const PipelineConfig& cfg, const MeshRunOptions& run = {}) {
  validate(cfg);
  MeshResult res;
  res.resolved = cfg;
  auto& rep = res.report;
  auto& T = rep.timings;

  LoadOptions lo;
  lo.drop_transparent = cfg.drop_transparent;
  lo.opacity_floor = cfg.opacity_floor;
  const GaussianCloud cloud = run_stage(T, "load", "check that the input is a 3DGS PLY with the standard properties",
                                        [&] { return parse_gaussians(ply_bytes, lo); });
  rep.gaussians = cloud.size();

  const LinearBvh bvh = run_stage(T, "bvh", "", [&] { return build_gaussian_bvh(cloud, cfg.kappa); });

  VoxelizeOptions vo;
  vo.spacing = cfg.spacing;
  vo.theta = cfg.theta;
  vo.tile = cfg.tile;
  vo.kappa = cfg.kappa;
  vo.cell_budget = run.cell_budget;
  vo.workers = run.workers;
  OccupancyVolume vol = run_stage(T, "voxelize", "raise spacing to shrink the grid", [&] {
    const VoxelGrid grid = voxelization_grid(cloud, bvh, vo.spacing, vo.cell_budget);
    std::string cache_path;
    if (!run.cache_dir.empty()) {
      std::filesystem::create_directories(run.cache_dir);
      cache_path = (std::filesystem::path(run.cache_dir) / (hex64(occupancy_cache_key(ply_bytes, cfg)) + ".fgvx")).string();
      if (std::filesystem::exists(cache_path)) {
        try {
          OccupancyDump dump = load_occupancy(cache_path);
          if (dump.grid.dims == grid.dims) {
            rep.cache_hit = true;
            return OccupancyVolume{grid, std::move(dump.bits), std::nullopt};
          }
        } catch (const Error&) {
          // unreadable cache entry: recompute and overwrite
        }
      }
    }
    OccupancyVolume v = voxelize(cloud, bvh, vo);
    if (!cache_path.empty()) save_occupancy(cache_path, v.grid, v.occupancy);
    return v;
  });
  rep.dims = vol.grid.dims;
  rep.spacing = vol.grid.spacing[0];
  const double v_min = vol.grid.min_spacing();
  res.resolved.spacing = vol.grid.spacing[0];

  const double sigma = cfg.denoise_sigma < 0.0 ? v_min : cfg.denoise_sigma;
  res.resolved.denoise_sigma = sigma;
  vol = run_stage(T, "denoise", "lower denoise_sigma for thin structures", [&] {
    return denoise_rethreshold(vol, sigma, cfg.rethreshold, run.workers);
  });
  rep.occupied_voxels = vol.occupancy.count();

  const double r = cfg.band_radius < 0.0 ? 4.0 * v_min : cfg.band_radius;
  res.resolved.band_radius = r;
  const SignedField field = run_stage(T, "tsdf", "lower theta or spacing if nothing is occupied",
                                      [&] { return assemble_tsdf(vol, r); });

  res.raw = run_stage(T, "marching_cubes", "keep |iso| below band_radius",
                      [&] { return marching_cubes(field, cfg.iso, cfg.mc_step, run.workers); });
  rep.raw_faces = res.raw.face_count();
  rep.raw_watertight = is_watertight(res.raw);
  if (res.raw.empty())
    fail(ErrorKind::kDegenerate, "marching_cubes: no surface extracted (hint: lower theta or check the asset scale)");

  const double ratio = cfg.simplify_ratio < 0.0 ? (res.raw.face_count() > 2'000'000 ? 0.25 : 1.0) : cfg.simplify_ratio;
  res.resolved.simplify_ratio = ratio;
  SimplifyOptions so;
  so.face_target = cfg.simplify_target;
  so.ratio = ratio;
  auto simplified = run_stage(T, "simplify", "raise simplify_target", [&] { return simplify(res.raw, so); });
  rep.simplify_target_unreachable = simplified.target_unreachable;

  TaubinOptions to;
  to.lambda = cfg.taubin_lambda;
  to.mu = cfg.taubin_mu;
  to.iterations = cfg.taubin_iterations;
  to.workers = run.workers;
  TriangleMesh smoothed = run_stage(T, "smooth", "", [&] { return taubin_smooth(std::move(simplified.mesh), to); });
  res.mesh = run_stage(T, "normals", "", [&] { return gradient_normals(field, std::move(smoothed), run.workers); });

  rep.final_faces = res.mesh.face_count();
  rep.watertight = is_watertight(res.mesh);
  rep.euler = euler_characteristic(res.mesh);
  return res;
}

/// True when the PLY header describes Gaussians rather than a mesh.
inline bool is_gaussian_ply(std::string_view bytes) {
  if (bytes.substr(0, 3) != "ply") return false;
  const ply::Header h = ply::parse_header(bytes);
  const ply::Element* v = h.find("vertex");
  return v && !h.find("face") && v->find("opacity") && v->find("scale_0") && v->find("rot_0");
}

struct ScanRun {
  ScanFrame frame;
  ScanPattern pattern;
  SensorPose pose;
  std::vector<StageTiming> timings;
};

inline ScanRun scan_mesh(const TriangleMesh& mesh, const PipelineConfig& cfg, unsigned workers = 0) {
  ScanRun s;
  s.pattern = run_stage(s.timings, "pattern", "use HDL64, OS128, VLP32 or a sensor config file",
                        [&] { return resolve_pattern(cfg.pattern); });
  s.pose = run_stage(s.timings, "pose", "give tx,ty,tz,qw,qx,qy,qz or 16 row-major numbers",
                     [&] { return parse_pose(cfg.pose); });
  if (mesh.empty()) fail(ErrorKind::kEmptyAsset, "scan: mesh has no triangles");
  const LinearBvh bvh = run_stage(s.timings, "bvh", "", [&] { return build_triangle_bvh(mesh); });
  ScanOptions so;
  so.workers = workers;
  s.frame = run_stage(s.timings, "scan", "", [&] { return scan(mesh, bvh, s.pattern, s.pose, so); });
  return s;
}

/// Analytic-sphere first returns for the same beams: origin + radius-hit of
/// each direction against a sphere centred at `center`.
inline std::vector<Vec3> analytic_sphere_scan(const ScanPattern& p, const SensorPose& pose, const Vec3& center,
                                              double radius) {
  std::vector<Vec3> pts;
  for (const auto& d : beam_directions(p, pose)) {
    const Vec3 oc = pose.translation - center;
    const double b = oc.dot(d);
    const double c = oc.squaredNorm() - radius * radius;
    const double disc = b * b - c;
    if (disc < 0.0) continue;
    const double sq = std::sqrt(disc);
    double t = -b - sq;
    if (t < p.t_min) t = -b + sq;
    if (t < p.t_min || t > p.t_max) continue;
    pts.push_back(pose.translation + t * d);
  }
  return pts;
}

}  // namespace splatlidar
