// Copyright Contributors to the splatlidar Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "splatlidar/pipeline.hpp"
#include "splatlidar/synth.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <new>
#include <string>
#include <vector>

namespace splatlidar::cli {

struct CommonArgs {
  std::string config_path;
  std::vector<std::string> overrides;
  unsigned workers = 0;
};

inline void add_common(CLI::App* app, CommonArgs& a) {
  app->add_option("--config", a.config_path, "key=value config file")->check(CLI::ExistingFile);
  app->add_option("--set", a.overrides, "config override key=value (repeatable)");
  app->add_option("--workers", a.workers, "worker threads (0: all cores)");
}

inline PipelineConfig resolve_config(const CommonArgs& a) {
  PipelineConfig c = a.config_path.empty() ? PipelineConfig{} : load_config(a.config_path);
  apply_overrides(c, a.overrides);
  validate(c);
  return c;
}

inline void write_text(const std::string& path, const std::string& text) { detail::write_bytes(path, text); }

inline std::string sidecar(const std::string& path, const std::string& suffix) { return path + suffix; }

struct MeshArgs {
  CommonArgs common;
  std::string input, output, report, cache_dir;
};

inline int cmd_mesh(const MeshArgs& a, std::ostream& out) {
  const PipelineConfig cfg = resolve_config(a.common);
  const std::string bytes = ply::read_file(a.input);
  MeshRunOptions run;
  run.workers = a.common.workers;
  run.cache_dir = a.cache_dir;
  const MeshResult res = mesh_from_gaussians(bytes, cfg, run);
  save_mesh(a.output, res.mesh);
  write_text(sidecar(a.output, ".config"), serialize_config(res.resolved));
  const std::string report = format_mesh_report(res.report);
  write_text(a.report.empty() ? sidecar(a.output, ".report.txt") : a.report, report);
  out << report;
  return 0;
}

struct ScanArgs {
  CommonArgs common;
  std::string input, points, range_image, pattern, pose, cache_dir;
};

inline int cmd_scan(const ScanArgs& a, std::ostream& out) {
  PipelineConfig cfg = resolve_config(a.common);
  if (!a.pattern.empty()) cfg.pattern = a.pattern;
  if (!a.pose.empty()) cfg.pose = a.pose;
  validate(cfg);
  const std::string bytes = ply::read_file(a.input);
  TriangleMesh mesh;
  if (is_gaussian_ply(bytes)) {
    MeshRunOptions run;
    run.workers = a.common.workers;
    run.cache_dir = a.cache_dir;
    mesh = mesh_from_gaussians(bytes, cfg, run).mesh;
  } else {
    mesh = detail::ends_with(a.input, ".obj") ? parse_obj(bytes) : parse_mesh_ply(bytes);
  }
  const ScanRun s = scan_mesh(mesh, cfg, a.common.workers);
  const std::vector<Vec3> pts = s.frame.hit_points();
  if (!a.points.empty()) {
    save_points(a.points, pts);
    write_text(sidecar(a.points, ".config"), serialize_config(cfg));
  }
  if (!a.range_image.empty()) save_range_image(a.range_image, s.frame);
  char buf[160];
  std::snprintf(buf, sizeof buf, "beams=%zu\nhits=%zu\nhit_rate=%.6f\n", s.frame.beam_count(), s.frame.hit_count(),
                static_cast<double>(s.frame.hit_count()) / static_cast<double>(s.frame.beam_count()));
  out << buf;
  return 0;
}

struct EvalArgs {
  unsigned workers = 0;
  std::string a, b, results, label;
  std::vector<double> thresholds;
};

inline int cmd_eval(const EvalArgs& e, std::ostream& out) {
  const auto a = load_points(e.a);
  const auto b = load_points(e.b);
  const std::vector<double> taus = e.thresholds.empty() ? PipelineConfig{}.thresholds : e.thresholds;
  std::string jsonl;
  for (std::size_t i = 0; i < taus.size(); ++i) {
    const MetricReport r = evaluate(a, b, taus[i], e.workers);
    if (i) out << "\n";
    out << format_report(r);
    jsonl += report_json(r, e.label).dump() + "\n";
  }
  if (!e.results.empty()) {
    std::ofstream f(e.results, std::ios::binary | std::ios::app);
    if (!f) fail(ErrorKind::kIo, "cannot write '" + e.results + "'");
    f << jsonl;
  }
  return 0;
}

struct BenchArgs {
  unsigned workers = 0;
  std::string mesh, pattern = "VLP32", pose, csv;
  std::vector<std::size_t> sizes{10000, 100000, 1000000};
  int repetitions = 5;
  bool brute_force = false;
  std::uint64_t seed = 7;
};

inline std::string bench_csv_header() { return "triangles,frames_per_s,points_per_s,nodes_per_ray,tris_per_ray,median_s,hit_rate\n"; }

inline std::string bench_csv_row(const BenchReport& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%zu,%.6g,%.6g,%.6g,%.6g,%.6g,%.6f\n", r.triangles, r.frames_per_second,
                r.points_per_second, r.nodes_per_ray, r.triangles_per_ray, r.median_seconds, r.hit_rate);
  return buf;
}

inline int cmd_bench(const BenchArgs& a, std::ostream& out) {
  const ScanPattern pattern = resolve_pattern(a.pattern);
  ScanOptions so;
  so.workers = a.workers;
  so.brute_force = a.brute_force;
  std::string csv = bench_csv_header();
  auto run_one = [&](const TriangleMesh& mesh, const SensorPose& pose) {
    const LinearBvh bvh = build_triangle_bvh(mesh);
    csv += bench_csv_row(benchmark_scan(mesh, bvh, pattern, pose, a.repetitions, so));
  };
  if (!a.mesh.empty()) {
    const TriangleMesh mesh = load_mesh(a.mesh);
    run_one(mesh, a.pose.empty() ? SensorPose::at(mesh.bounds().center()) : parse_pose(a.pose));
  } else {
    for (std::size_t n : a.sizes) {
      if (n == 0) fail(ErrorKind::kUsage, "soup sizes must be positive");
      run_one(random_soup(n, a.seed), a.pose.empty() ? SensorPose::at(Vec3::Constant(0.5)) : parse_pose(a.pose));
    }
  }
  out << csv;
  if (!a.csv.empty()) write_text(a.csv, csv);
  return 0;
}

struct SynthArgs {
  std::string shape, out, reference;
  double radius = 2.0;
  std::vector<double> size{2.0, 3.0, 4.0};
  std::size_t count = 50000;
  std::uint64_t seed = 7;
  double scale_factor = SynthOptions{}.scale_factor;
};

inline int cmd_synth(const SynthArgs& a, std::ostream& out) {
  SynthOptions o;
  o.count = a.count;
  o.seed = a.seed;
  o.scale_factor = a.scale_factor;
  if (a.size.size() != 3) fail(ErrorKind::kUsage, "--size expects three values");
  const Vec3 size(a.size[0], a.size[1], a.size[2]);
  SynthAsset asset;
  if (a.shape == "sphere") asset = synth_sphere(a.radius, o);
  else if (a.shape == "box") asset = synth_box(size, o);
  else if (a.shape == "room") asset = synth_room(size, o);
  else fail(ErrorKind::kUsage, "unknown shape '" + a.shape + "' (expected sphere, box or room)");
  save_ply(a.out, asset.gaussians);
  const std::string ref = a.reference.empty() ? a.out + ".reference.obj" : a.reference;
  save_mesh(ref, asset.reference);
  const std::string meta = synth_metadata(asset, o);
  write_text(sidecar(a.out, ".meta"), meta);
  out << meta;
  return 0;
}

/// Parses argv and dispatches. Returns the process exit code.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Gaussian splats to watertight meshes and simulated LiDAR scans"};
  app.require_subcommand(1);

  MeshArgs mesh;
  auto* m = app.add_subcommand("mesh", "convert a 3DGS PLY into a watertight mesh");
  m->add_option("input", mesh.input, "3DGS PLY")->required()->check(CLI::ExistingFile);
  m->add_option("-o,--output", mesh.output, "mesh file (.obj or .ply)")->required();
  m->add_option("--report", mesh.report, "summary report path (default: <output>.report.txt)");
  m->add_option("--cache-dir", mesh.cache_dir, "occupancy cache directory");
  add_common(m, mesh.common);

  ScanArgs scan_args;
  auto* s = app.add_subcommand("scan", "simulate one LiDAR sweep against a mesh or 3DGS asset");
  s->add_option("input", scan_args.input, "mesh (.obj/.ply) or 3DGS PLY")->required()->check(CLI::ExistingFile);
  s->add_option("-o,--points", scan_args.points, "point cloud output (.ply or .xyz)");
  s->add_option("--range-image", scan_args.range_image, "FGRI range image output");
  s->add_option("--pattern", scan_args.pattern, "HDL64, OS128, VLP32 or sensor config file");
  s->add_option("--pose", scan_args.pose, "tx,ty,tz,qw,qx,qy,qz or 16 row-major numbers");
  s->add_option("--cache-dir", scan_args.cache_dir, "occupancy cache directory");
  add_common(s, scan_args.common);

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "compare two point clouds");
  e->add_option("a", ev.a, "simulated cloud (.ply or .xyz)")->required()->check(CLI::ExistingFile);
  e->add_option("b", ev.b, "reference cloud (.ply or .xyz)")->required()->check(CLI::ExistingFile);
  e->add_option("-t,--threshold", ev.thresholds, "F-score threshold in metres (repeatable)");
  e->add_option("--results", ev.results, "append one JSON record per threshold");
  e->add_option("--label", ev.label, "label stored in JSON records");
  e->add_option("--workers", ev.workers, "worker threads (0: all cores)");

  BenchArgs bench;
  auto* b = app.add_subcommand("bench", "scan throughput across mesh sizes");
  b->add_option("--mesh", bench.mesh, "benchmark one mesh instead of synthetic soups")->check(CLI::ExistingFile);
  b->add_option("--sizes", bench.sizes, "soup triangle counts")->delimiter(',');
  b->add_option("--pattern", bench.pattern, "HDL64, OS128, VLP32 or sensor config file");
  b->add_option("--pose", bench.pose, "sensor pose (default: scene centre)");
  b->add_option("--repetitions", bench.repetitions, "timed scans per size; the first is discarded")
      ->check(CLI::Range(3, 1000000));
  b->add_flag("--brute-force", bench.brute_force, "test every triangle per beam");
  b->add_option("--seed", bench.seed, "soup seed");
  b->add_option("--csv", bench.csv, "also write the table to this file");
  b->add_option("--workers", bench.workers, "worker threads (0: all cores)");

  SynthArgs syn;
  auto* y = app.add_subcommand("synth", "write a synthetic 3DGS asset and its reference mesh");
  y->add_option("shape", syn.shape, "sphere, box or room")->required()->check(CLI::IsMember({"sphere", "box", "room"}));
  y->add_option("-o,--output", syn.out, "3DGS PLY output")->required();
  y->add_option("--reference", syn.reference, "reference mesh path (default: <output>.reference.obj)");
  y->add_option("--radius", syn.radius, "sphere radius (m)");
  y->add_option("--size", syn.size, "box or room size x,y,z (m)")->delimiter(',')->expected(3);
  y->add_option("--count", syn.count, "number of Gaussians");
  y->add_option("--seed", syn.seed, "random seed");
  y->add_option("--scale-factor", syn.scale_factor, "Gaussian scale over sample spacing");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& ex) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& ex) {
    if (ex.get_exit_code() == 0) {
      app.exit(ex, out, err);
      return 0;
    }
    err << "error: " << ex.what() << "\n";
    return 1;
  }

  try {
    if (*m) return cmd_mesh(mesh, out);
    if (*s) return cmd_scan(scan_args, out);
    if (*e) return cmd_eval(ev, out);
    if (*b) return cmd_bench(bench, out);
    if (*y) return cmd_synth(syn, out);
  } catch (const Error& ex) {
    err << "error: " << ex.what() << "\n";
    return exit_code(ex.kind());
  } catch (const std::bad_alloc&) {
    err << "error: out of memory\n";
    return 3;
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << "\n";
    return 2;
  }
  return 1;
}

}  // namespace splatlidar::cli
