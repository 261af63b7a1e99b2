// Copyright Contributors to the splatlidar Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "splatlidar/error.hpp"
#include "splatlidar/mesh.hpp"
#include "splatlidar/parallel.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

namespace splatlidar {


/// Rigid sensor pose in world coordinates; beams start at `translation`.
struct SensorPose {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  static SensorPose at(const Vec3& t) { return {Mat3::Identity(), t}; }

  void validate() const {
    if (!rotation.allFinite() || !translation.allFinite()) fail(ErrorKind::kUsage, "sensor pose is not finite");
    if (((rotation.transpose() * rotation) - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-6)
      fail(ErrorKind::kUsage, "sensor rotation is not orthonormal");
    if (std::abs(rotation.determinant() - 1.0) > 1e-6) fail(ErrorKind::kUsage, "sensor rotation is not proper (det != +1)");
  }
};

struct ScanPattern {
  std::string name = "custom";
  std::vector<double> elevation_deg;  // one per channel, monotone
  int azimuth_steps = 1;
  double t_min = 0.1;
  double t_max = 200.0;

  int channels() const { return static_cast<int>(elevation_deg.size()); }
  std::size_t beam_count() const { return static_cast<std::size_t>(channels()) * static_cast<std::size_t>(azimuth_steps); }

  void validate() const {
    if (elevation_deg.empty()) fail(ErrorKind::kValidation, "scan pattern needs at least one channel");
    if (azimuth_steps < 1) fail(ErrorKind::kValidation, "scan pattern needs azimuth_steps >= 1");
    if (!(t_min >= 0.0 && t_min < t_max)) fail(ErrorKind::kValidation, "scan pattern needs 0 <= t_min < t_max");
    for (double e : elevation_deg)
      if (!std::isfinite(e) || e < -90.0 || e > 90.0) fail(ErrorKind::kValidation, "elevation angles must lie in [-90, 90]");
    bool inc = true, dec = true;
    for (std::size_t c = 1; c < elevation_deg.size(); ++c) {
      inc = inc && elevation_deg[c] > elevation_deg[c - 1];
      dec = dec && elevation_deg[c] < elevation_deg[c - 1];
    }
    if (!inc && !dec) fail(ErrorKind::kValidation, "elevation angles must be strictly monotone");
  }
};

inline std::vector<double> uniform_elevations(int channels, double lo_deg, double hi_deg) {
  if (channels < 1) fail(ErrorKind::kValidation, "scan pattern needs at least one channel");
  std::vector<double> e(channels);
  for (int c = 0; c < channels; ++c)
    e[c] = channels == 1 ? lo_deg : lo_deg + (hi_deg - lo_deg) * c / static_cast<double>(channels - 1);
  return e;
}

/// Spinning-sensor presets with uniformly spaced channels.
inline ScanPattern make_pattern(const std::string& preset) {
  ScanPattern p;
  p.name = preset;
  if (preset == "HDL64") {
    p.elevation_deg = uniform_elevations(64, -24.9, 2.0);
    p.azimuth_steps = 1800;
  } else if (preset == "OS128") {
    p.elevation_deg = uniform_elevations(128, -22.5, 22.5);
    p.azimuth_steps = 1024;
  } else if (preset == "VLP32") {
    p.elevation_deg = uniform_elevations(32, -25.0, 15.0);
    p.azimuth_steps = 1800;
  } else {
    fail(ErrorKind::kUsage, "unknown scan pattern preset '" + preset + "' (expected HDL64, OS128 or VLP32)");
  }
  return p;
}

inline ScanPattern make_pattern(std::string name, std::vector<double> elevation_deg, int azimuth_steps,
                                double t_min = 0.1, double t_max = 200.0) {
  ScanPattern p{std::move(name), std::move(elevation_deg), azimuth_steps, t_min, t_max};
  p.validate();
  return p;
}

/// Sensor-frame direction of channel c, azimuth step a.
inline Vec3 sensor_direction(const ScanPattern& p, int channel, int step) {
  const double e = p.elevation_deg[channel] * kPi / 180.0;
  const double th = 2.0 * kPi * step / static_cast<double>(p.azimuth_steps);
  return {std::cos(e) * std::cos(th), std::cos(e) * std::sin(th), std::sin(e)};
}

/// World-frame unit directions, row-major (channel, azimuth).
inline std::vector<Vec3> beam_directions(const ScanPattern& p, const SensorPose& pose) {
  std::vector<Vec3> dirs(p.beam_count());
  for (int c = 0; c < p.channels(); ++c)
    for (int a = 0; a < p.azimuth_steps; ++a) {
      const Vec3 d = pose.rotation * sensor_direction(p, c, a);
      dirs[static_cast<std::size_t>(c) * p.azimuth_steps + a] = d / d.norm();
    }
  return dirs;
}

/// One sweep. Misses keep range +inf and hit_mask 0 so the frame is always a
/// channels x azimuth_steps image.
struct ScanFrame {
  int channels = 0;
  int azimuth_steps = 0;
  Vec3 origin = Vec3::Zero();
  std::vector<double> ranges;
  std::vector<Vec3> points;  // valid where hit_mask is set
  std::vector<std::uint8_t> hit_mask;
  std::vector<std::uint32_t> triangles;  // hit triangle per beam (kInvalid on miss)

  std::size_t beam_count() const { return ranges.size(); }
  std::size_t hit_count() const { return static_cast<std::size_t>(std::count(hit_mask.begin(), hit_mask.end(), 1)); }
  std::vector<Vec3> hit_points() const {
    std::vector<Vec3> out;
    out.reserve(hit_count());
    for (std::size_t j = 0; j < hit_mask.size(); ++j)
      if (hit_mask[j]) out.push_back(points[j]);
    return out;
  }
};

struct ScanOptions {
  unsigned workers = 0;
  bool brute_force = false;    // reference all-triangle scan
  double range_noise = 0.0;    // additive Gaussian range noise (std dev, metres); off by default
  std::uint64_t noise_seed = 0;
};

struct ScanStats {
  std::uint64_t nodes_visited = 0;
  std::uint64_t triangles_tested = 0;
};

/// First return per beam. Every beam writes only its own slot, so the frame
/// is identical for any worker count.
inline ScanFrame scan(const TriangleMesh& mesh, const LinearBvh& bvh, const ScanPattern& pattern, const SensorPose& pose,
                      const ScanOptions& opts = {}, ScanStats* stats = nullptr) {
  pattern.validate();
  pose.validate();
  if (mesh.empty()) fail(ErrorKind::kEmptyAsset, "cannot scan an empty mesh");
  const auto dirs = beam_directions(pattern, pose);
  ScanFrame f;
  f.channels = pattern.channels();
  f.azimuth_steps = pattern.azimuth_steps;
  f.origin = pose.translation;
  const std::size_t n = dirs.size();
  f.ranges.assign(n, std::numeric_limits<double>::infinity());
  f.points.assign(n, Vec3::Zero());
  f.hit_mask.assign(n, 0);
  f.triangles.assign(n, LinearBvh::kInvalid);
  std::vector<TraversalStats> per_beam(stats ? n : 0);

  parallel_for(n, opts.workers, [&](std::size_t begin, std::size_t end) {
    for (std::size_t j = begin; j < end; ++j) {
      const Ray ray{pose.translation, dirs[j]};
      TraversalStats* s = stats ? &per_beam[j] : nullptr;
      auto hit = opts.brute_force ? first_hit_brute_force(mesh, ray, pattern.t_min, pattern.t_max, s)
                                  : first_hit(bvh, mesh, ray, pattern.t_min, pattern.t_max, s);
      if (!hit) continue;
      double range = hit->t;
      if (opts.range_noise > 0.0) {
        std::mt19937_64 rng(opts.noise_seed * 0x9E3779B97F4A7C15ULL + j);
        std::normal_distribution<double> noise(0.0, opts.range_noise);
        range = std::max(0.0, range + noise(rng));
      }
      f.ranges[j] = range;
      f.points[j] = ray.origin + range * ray.dir;
      f.hit_mask[j] = 1;
      f.triangles[j] = hit->triangle;
    }
  });
  if (stats)
    for (const auto& s : per_beam) {
      stats->nodes_visited += s.nodes_visited;
      stats->triangles_tested += s.primitives_tested;
    }
  return f;
}

struct BenchReport {
  std::size_t triangles = 0;
  std::size_t beams = 0;
  int repetitions = 0;
  double median_seconds = 0.0;
  double frames_per_second = 0.0;
  double points_per_second = 0.0;  // returned hits per second
  double nodes_per_ray = 0.0;
  double triangles_per_ray = 0.0;
  double hit_rate = 0.0;
};

/// Times `repetitions` scans; the first is a warm-up and is excluded from the
/// median. Work counters come from an extra instrumented pass.
inline BenchReport benchmark_scan(const TriangleMesh& mesh, const LinearBvh& bvh, const ScanPattern& pattern,
                                  const SensorPose& pose, int repetitions, const ScanOptions& opts = {}) {
  if (repetitions < 3) fail(ErrorKind::kValidation, "benchmark needs at least 3 repetitions");
  std::vector<double> seconds;
  ScanFrame frame;
  for (int r = 0; r < repetitions; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    frame = scan(mesh, bvh, pattern, pose, opts);
    const auto t1 = std::chrono::steady_clock::now();
    if (r > 0) seconds.push_back(std::chrono::duration<double>(t1 - t0).count());
  }
  std::sort(seconds.begin(), seconds.end());
  const std::size_t m = seconds.size();
  const double median = m % 2 ? seconds[m / 2] : 0.5 * (seconds[m / 2 - 1] + seconds[m / 2]);

  ScanStats stats;
  scan(mesh, bvh, pattern, pose, opts, &stats);
  BenchReport rep;
  rep.triangles = mesh.face_count();
  rep.beams = frame.beam_count();
  rep.repetitions = repetitions;
  rep.median_seconds = median;
  rep.frames_per_second = median > 0 ? 1.0 / median : std::numeric_limits<double>::infinity();
  rep.points_per_second = median > 0 ? static_cast<double>(frame.hit_count()) / median : 0.0;
  rep.nodes_per_ray = static_cast<double>(stats.nodes_visited) / static_cast<double>(rep.beams);
  rep.triangles_per_ray = static_cast<double>(stats.triangles_tested) / static_cast<double>(rep.beams);
  rep.hit_rate = static_cast<double>(frame.hit_count()) / static_cast<double>(rep.beams);
  return rep;
}

/// Random triangle soup in the unit cube. Triangle size shrinks with
/// count^(-1/3) so the soup stays statistically self-similar.
inline TriangleMesh random_soup(std::size_t triangles, std::uint64_t seed, double size_factor = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0), sym(-1.0, 1.0);
  const double size = size_factor * std::cbrt(1.0 / static_cast<double>(triangles));
  TriangleMesh m;
  m.vertices.reserve(3 * triangles);
  m.triangles.reserve(triangles);
  for (std::size_t f = 0; f < triangles; ++f) {
    const Vec3 c(unit(rng), unit(rng), unit(rng));
    const auto base = static_cast<std::uint32_t>(m.vertices.size());
    for (int k = 0; k < 3; ++k) m.vertices.push_back(c + size * Vec3(sym(rng), sym(rng), sym(rng)));
    m.triangles.push_back({base, base + 1, base + 2});
  }
  return m;
}

}  // namespace splatlidar
