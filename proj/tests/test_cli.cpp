// Copyright Contributors to the splatlidar Project
// SPDX-License-Identifier: Apache-2.0

#include "commands.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace splatlidar;
using splatlidar::test_support::error_kind_of;
namespace tu = splatlidar::test_support;

namespace {

struct Outcome {
  int code;
  std::string out, err;
};

Outcome run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "splatlidar");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const std::string& path) { return ply::read_file(path); }

std::string value_of(const std::string& report, const std::string& key) {
  std::istringstream in(report);
  std::string line;
  while (std::getline(in, line))
    if (line.rfind(key + "=", 0) == 0) return line.substr(key.size() + 1);
  return {};
}

void write(const std::string& path, const std::string& text) { detail::write_bytes(path, text); }

}  // namespace

TEST(Config, DefaultsRoundTrip) {
  const PipelineConfig c;
  const std::string text = serialize_config(c);
  EXPECT_NE(text.find("spacing=auto\n"), std::string::npos);
  EXPECT_NE(text.find("band_radius=auto\n"), std::string::npos);
  EXPECT_NE(text.find("theta=0.5\n"), std::string::npos);
  EXPECT_NE(text.find("pattern=VLP32\n"), std::string::npos);
  EXPECT_EQ(parse_config(text), c);
}

TEST(Config, ModifiedRoundTrip) {
  PipelineConfig c;
  apply_overrides(c, {"spacing=0.0123456789", "theta=0.37", "tile=4", "rethreshold=quantile:0.6", "iso=-0.001",
                      "mc_step=2", "simplify_target=5000", "taubin_iterations=3", "pattern=OS128",
                      "pose=1,2,3,1,0,0,0", "thresholds=0.01,0.05,0.2", "seed=99", "drop_transparent=true",
                      "denoise_sigma=0", "band_radius=0.3", "simplify_ratio=0.5", "kappa=2.5"});
  EXPECT_EQ(c.rethreshold.mode, Rethreshold::Mode::kQuantile);
  EXPECT_EQ(c.thresholds.size(), 3u);
  EXPECT_EQ(parse_config(serialize_config(c)), c);
  tu::TempDir dir;
  write(dir.file("c.cfg"), serialize_config(c));
  EXPECT_EQ(load_config(dir.file("c.cfg")), c);
}

TEST(Config, Rejections) {
  PipelineConfig c;
  EXPECT_EQ(error_kind_of([&] { set_config_value(c, "thetaa", "0.5"); }), ErrorKind::kUsage);
  EXPECT_EQ(error_kind_of([&] { parse_config("theta=0.5\nvoxel=1\n"); }), ErrorKind::kUsage);
  EXPECT_EQ(error_kind_of([&] { parse_config("theta=0.5\ntheta=0.6\n"); }), ErrorKind::kParse);
  EXPECT_EQ(error_kind_of([&] { parse_config("theta=-1\n"); }), ErrorKind::kValidation);
  EXPECT_EQ(error_kind_of([&] { parse_config("theta=abc\n"); }), ErrorKind::kUsage);
  EXPECT_EQ(error_kind_of([&] { parse_config("taubin_mu=-0.4\n"); }), ErrorKind::kValidation);
  EXPECT_EQ(error_kind_of([&] { parse_config("mc_step=0\n"); }), ErrorKind::kValidation);
  EXPECT_EQ(error_kind_of([&] { parse_config("rethreshold=median:0.5\n"); }), ErrorKind::kUsage);
  EXPECT_EQ(error_kind_of([&] { parse_config("pose=1,2\n"); }), ErrorKind::kUsage);
  EXPECT_EQ(error_kind_of([&] { apply_overrides(c, {"theta"}); }), ErrorKind::kUsage);
}

TEST(ExitCodes, UsageAndDataErrors) {
  tu::TempDir dir;
  EXPECT_EQ(run_cli({}).code, 1);
  EXPECT_EQ(run_cli({"frobnicate"}).code, 1);
  EXPECT_EQ(run_cli({"mesh", dir.file("missing.ply"), "-o", dir.file("m.obj")}).code, 1);
  EXPECT_EQ(run_cli({"synth", "torus", "-o", dir.file("t.ply")}).code, 1);
  EXPECT_EQ(run_cli({"--help"}).code, 0);

  // Header-only PLY with zero Gaussians.
  save_ply(dir.file("empty.ply"), {});
  auto r = run_cli({"mesh", dir.file("empty.ply"), "-o", dir.file("m.obj")});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("load:"), std::string::npos);

  write(dir.file("junk.ply"), "ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nend_header\n1\n");
  r = run_cli({"mesh", dir.file("junk.ply"), "-o", dir.file("m.obj")});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("missing required property 'y'"), std::string::npos);

  write(dir.file("empty.xyz"), "");
  write(dir.file("one.xyz"), "0 0 0\n");
  EXPECT_EQ(run_cli({"eval", dir.file("empty.xyz"), dir.file("one.xyz")}).code, 2);
}

TEST(ExitCodes, ResourceErrorCarriesHint) {
  tu::TempDir dir;
  ASSERT_EQ(run_cli({"synth", "sphere", "-o", dir.file("s.ply"), "--count", "500"}).code, 0);
  const auto r = run_cli({"mesh", dir.file("s.ply"), "-o", dir.file("m.obj"), "--set", "spacing=0.0005"});
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.err.find("voxelize:"), std::string::npos);
  EXPECT_NE(r.err.find("hint:"), std::string::npos);
}

TEST(Synth, DeterministicAndShaped) {
  tu::TempDir dir;
  ASSERT_EQ(run_cli({"synth", "sphere", "-o", dir.file("a.ply"), "--count", "3000", "--seed", "7"}).code, 0);
  ASSERT_EQ(run_cli({"synth", "sphere", "-o", dir.file("b.ply"), "--count", "3000", "--seed", "7"}).code, 0);
  ASSERT_EQ(run_cli({"synth", "sphere", "-o", dir.file("c.ply"), "--count", "3000", "--seed", "8"}).code, 0);
  EXPECT_EQ(slurp(dir.file("a.ply")), slurp(dir.file("b.ply")));
  EXPECT_NE(slurp(dir.file("a.ply")), slurp(dir.file("c.ply")));
  const auto cloud = load_ply(dir.file("a.ply"));
  ASSERT_EQ(cloud.size(), 3000u);
  const double h = std::sqrt(4.0 * kPi * 4.0 / 3000.0);
  for (const auto& g : cloud.gaussians) {
    EXPECT_LE(std::abs(g.mu.norm() - 2.0), 0.2 * h + 1e-6);
    EXPECT_NEAR(g.opacity, 0.9, 1e-6);
    EXPECT_NEAR(g.scale[0], g.scale[1], 1e-6 * g.scale[0]);
  }

  ASSERT_EQ(run_cli({"synth", "box", "-o", dir.file("box.ply"), "--size", "2,3,4", "--count", "2000"}).code, 0);
  const auto box = load_mesh(dir.file("box.ply.reference.obj"));
  EXPECT_EQ(box.face_count(), 12u);
  EXPECT_TRUE(is_watertight(box));
  EXPECT_NEAR(box.bounds().extent().prod(), 24.0, 1e-9);
  EXPECT_EQ(value_of(slurp(dir.file("box.ply.meta")), "watertight"), "true");

  ASSERT_EQ(run_cli({"synth", "room", "-o", dir.file("room.ply"), "--size", "5,4,3", "--count", "4000"}).code, 0);
  const auto room = load_mesh(dir.file("room.ply.reference.obj"));
  EXPECT_FALSE(is_watertight(room));
  EXPECT_EQ(value_of(slurp(dir.file("room.ply.meta")), "watertight"), "false");
  EXPECT_EQ(value_of(slurp(dir.file("room.ply.meta")), "shape"), "room");
}

TEST(MeshCommand, SphereShellIsClosedGenusZeroAndDeterministic) {
  tu::TempDir dir;
  ASSERT_EQ(run_cli({"synth", "sphere", "-o", dir.file("s.ply"), "--radius", "1", "--count", "8000"}).code, 0);
  const auto a = run_cli({"mesh", dir.file("s.ply"), "-o", dir.file("a.ply"), "--set", "spacing=0.03", "--workers", "1"});
  ASSERT_EQ(a.code, 0) << a.err;
  const auto b = run_cli({"mesh", dir.file("s.ply"), "-o", dir.file("b.ply"), "--set", "spacing=0.03", "--workers", "3"});
  ASSERT_EQ(b.code, 0) << b.err;
  EXPECT_EQ(slurp(dir.file("a.ply")), slurp(dir.file("b.ply")));
  EXPECT_EQ(value_of(a.out, "watertight"), "true");
  EXPECT_EQ(value_of(a.out, "raw_watertight"), "true");
  EXPECT_EQ(value_of(a.out, "euler_characteristic"), "2");
  EXPECT_EQ(value_of(a.out, "gaussians"), "8000");
  for (const char* stage : {"load", "bvh", "voxelize", "denoise", "tsdf", "marching_cubes", "simplify", "smooth"})
    EXPECT_FALSE(value_of(a.out, std::string("time_") + stage + "_s").empty()) << stage;
  EXPECT_EQ(slurp(dir.file("a.ply.report.txt")), a.out);

  const auto resolved = load_config(dir.file("a.ply.config"));
  EXPECT_DOUBLE_EQ(resolved.spacing, 0.03);
  EXPECT_DOUBLE_EQ(resolved.band_radius, 0.12);
  EXPECT_DOUBLE_EQ(resolved.denoise_sigma, 0.03);
  // Rerunning from the written config reproduces the mesh.
  const auto c = run_cli({"mesh", dir.file("s.ply"), "-o", dir.file("c.ply"), "--config", dir.file("a.ply.config")});
  ASSERT_EQ(c.code, 0) << c.err;
  EXPECT_EQ(slurp(dir.file("c.ply")), slurp(dir.file("a.ply")));

  const auto m = load_mesh(dir.file("a.ply"));
  for (const auto& p : m.vertices) ASSERT_NEAR(p.norm(), 1.0, 0.06);
}

TEST(MeshCommand, OccupancyCacheReused) {
  tu::TempDir dir;
  ASSERT_EQ(run_cli({"synth", "sphere", "-o", dir.file("s.ply"), "--radius", "1", "--count", "4000"}).code, 0);
  const std::vector<std::string> args{"mesh", dir.file("s.ply"), "-o", dir.file("m.obj"), "--set", "spacing=0.05",
                                      "--cache-dir", dir.file("cache")};
  const auto first = run_cli(args);
  ASSERT_EQ(first.code, 0) << first.err;
  const std::string mesh1 = slurp(dir.file("m.obj"));
  const auto second = run_cli(args);
  ASSERT_EQ(second.code, 0);
  EXPECT_EQ(value_of(first.out, "voxel_cache_hit"), "false");
  EXPECT_EQ(value_of(second.out, "voxel_cache_hit"), "true");
  EXPECT_EQ(slurp(dir.file("m.obj")), mesh1);
  // Settings that only affect later stages keep the cache key.
  auto later = args;
  later.insert(later.end(), {"--set", "taubin_iterations=2"});
  EXPECT_EQ(value_of(run_cli(later).out, "voxel_cache_hit"), "true");
  auto other = args;
  other.insert(other.end(), {"--set", "theta=0.4"});
  EXPECT_EQ(value_of(run_cli(other).out, "voxel_cache_hit"), "false");
}

TEST(ScanCommand, HitRatesAndDeterminism) {
  tu::TempDir dir;
  save_mesh(dir.file("ico.obj"), icosphere(10.0, 3));
  auto a = run_cli({"scan", dir.file("ico.obj"), "-o", dir.file("a.ply"), "--range-image", dir.file("a.fgri"),
                    "--pattern", "VLP32", "--workers", "1"});
  ASSERT_EQ(a.code, 0) << a.err;
  EXPECT_EQ(value_of(a.out, "hit_rate"), "1.000000");
  EXPECT_EQ(value_of(a.out, "beams"), "57600");
  auto b = run_cli({"scan", dir.file("ico.obj"), "-o", dir.file("b.ply"), "--range-image", dir.file("b.fgri"),
                    "--pattern", "VLP32", "--workers", "4"});
  ASSERT_EQ(b.code, 0);
  EXPECT_EQ(slurp(dir.file("a.ply")), slurp(dir.file("b.ply")));
  EXPECT_EQ(slurp(dir.file("a.fgri")), slurp(dir.file("b.fgri")));
  EXPECT_EQ(load_points(dir.file("a.ply")).size(), 57600u);
  EXPECT_EQ(parse_config(slurp(dir.file("a.ply.config"))).pattern, "VLP32");

  write(dir.file("up.cfg"), "elevations=20,40,60\nazimuth_steps=100\n");
  auto away = run_cli({"scan", dir.file("ico.obj"), "-o", dir.file("c.xyz"), "--range-image", dir.file("c.fgri"),
                       "--pattern", dir.file("up.cfg"), "--pose", "0,0,40,1,0,0,0"});
  ASSERT_EQ(away.code, 0) << away.err;
  EXPECT_EQ(value_of(away.out, "hits"), "0");
  EXPECT_TRUE(load_points(dir.file("c.xyz")).empty());
  const auto img = parse_range_image(slurp(dir.file("c.fgri")));
  EXPECT_EQ(img.ranges.size(), 300u);

  EXPECT_EQ(run_cli({"scan", dir.file("ico.obj"), "--pose", "1,2,3"}).code, 1);
  EXPECT_EQ(run_cli({"scan", dir.file("ico.obj"), "--pattern", "HDL-64"}).code, 1);
}

TEST(ScanCommand, FromGaussiansMatchesMeshThenScan) {
  tu::TempDir dir;
  ASSERT_EQ(run_cli({"synth", "sphere", "-o", dir.file("s.ply"), "--radius", "1", "--count", "4000"}).code, 0);
  ASSERT_EQ(run_cli({"mesh", dir.file("s.ply"), "-o", dir.file("m.ply"), "--set", "spacing=0.05"}).code, 0);
  write(dir.file("p.cfg"), "elevations=-30,0,30\nazimuth_steps=120\n");
  const auto direct = run_cli({"scan", dir.file("s.ply"), "-o", dir.file("d.ply"), "--set", "spacing=0.05",
                               "--pattern", dir.file("p.cfg")});
  ASSERT_EQ(direct.code, 0) << direct.err;
  const auto via = run_cli({"scan", dir.file("m.ply"), "-o", dir.file("v.ply"), "--pattern", dir.file("p.cfg")});
  ASSERT_EQ(via.code, 0) << via.err;
  EXPECT_EQ(value_of(direct.out, "hit_rate"), "1.000000");
  // The mesh file stores float32 vertices, so compare geometrically.
  const auto d = load_points(dir.file("d.ply")), v = load_points(dir.file("v.ply"));
  ASSERT_EQ(d.size(), v.size());
  for (std::size_t i = 0; i < d.size(); ++i) EXPECT_LT((d[i] - v[i]).norm(), 1e-5);
}

TEST(EvalCommand, ReportsAndResults) {
  tu::TempDir dir;
  save_points(dir.file("a.xyz"), {Vec3(0, 0, 0), Vec3(1, 0, 0)});
  save_points(dir.file("b.ply"), {Vec3(0, 0, 0.01), Vec3(1, 0, 0.5)});
  auto r = run_cli({"eval", dir.file("a.xyz"), dir.file("b.ply"), "-t", "0.02", "-t", "0.6", "--results",
                    dir.file("r.jsonl"), "--label", "t1"});
  ASSERT_EQ(r.code, 0) << r.err;
  const std::string first = r.out.substr(0, r.out.find("\n\n") + 1);
  std::vector<std::string> keys;
  std::istringstream in(first);
  std::string line;
  while (std::getline(in, line)) keys.push_back(line.substr(0, line.find('=')));
  EXPECT_EQ(keys, (std::vector<std::string>{"chamfer", "precision", "recall", "fscore", "threshold", "count_a", "count_b"}));
  EXPECT_EQ(value_of(first, "precision"), "0.5");
  EXPECT_EQ(value_of(first, "fscore"), "0.5");
  ASSERT_EQ(run_cli({"eval", dir.file("a.xyz"), dir.file("b.ply"), "--results", dir.file("r.jsonl")}).code, 0);
  std::istringstream jl(slurp(dir.file("r.jsonl")));
  std::vector<nlohmann::json> records;
  while (std::getline(jl, line)) records.push_back(nlohmann::json::parse(line));
  ASSERT_EQ(records.size(), 4u);
  EXPECT_EQ(records[0]["label"], "t1");
  EXPECT_DOUBLE_EQ(records[1]["threshold"].get<double>(), 0.6);
  EXPECT_DOUBLE_EQ(records[1]["fscore"].get<double>(), 1.0);
  EXPECT_DOUBLE_EQ(records[2]["threshold"].get<double>(), 0.02);
  EXPECT_DOUBLE_EQ(records[3]["threshold"].get<double>(), 0.10);
}

TEST(BenchCommand, CsvRows) {
  tu::TempDir dir;
  write(dir.file("p.cfg"), "elevations=-30,0,30\nazimuth_steps=64\n");
  auto r = run_cli({"bench", "--sizes", "2000,8000", "--pattern", dir.file("p.cfg"), "--repetitions", "3", "--csv",
                    dir.file("b.csv")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(slurp(dir.file("b.csv")), r.out);
  std::istringstream in(r.out);
  std::string header, row1, row2, extra;
  std::getline(in, header);
  std::getline(in, row1);
  std::getline(in, row2);
  EXPECT_FALSE(std::getline(in, extra));
  EXPECT_EQ(header, "triangles,frames_per_s,points_per_s,nodes_per_ray,tris_per_ray,median_s,hit_rate");
  EXPECT_EQ(row1.substr(0, 5), "2000,");
  EXPECT_EQ(row2.substr(0, 5), "8000,");

  auto brute = run_cli({"bench", "--sizes", "2000", "--pattern", dir.file("p.cfg"), "--repetitions", "3", "--brute-force"});
  ASSERT_EQ(brute.code, 0);
  auto field = [](const std::string& row, int col) {
    std::istringstream s(row);
    std::string f;
    for (int i = 0; i <= col; ++i) std::getline(s, f, ',');
    return f;
  };
  std::string brute_row = brute.out.substr(brute.out.find('\n') + 1);
  brute_row.pop_back();
  EXPECT_EQ(field(brute_row, 6), field(row1, 6));
  EXPECT_EQ(field(brute_row, 4), "2000");

  EXPECT_EQ(run_cli({"bench", "--sizes", "100", "--repetitions", "2"}).code, 1);
}
