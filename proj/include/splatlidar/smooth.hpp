// Copyright Contributors to the splatlidar Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "splatlidar/mesh.hpp"
#include "splatlidar/parallel.hpp"

#include <algorithm>
#include <vector>

namespace splatlidar {

struct TaubinOptions {
  double lambda = 0.5;
  double mu = -0.53;
  int iterations = 10;
  unsigned workers = 0;
};

/// Vertex -> sorted unique neighbour list.
inline std::vector<std::vector<std::uint32_t>> vertex_neighbors(const TriangleMesh& m) {
  std::vector<std::vector<std::uint32_t>> adj(m.vertex_count());
  for (const auto& t : m.triangles)
    for (int e = 0; e < 3; ++e) {
      adj[t[e]].push_back(t[(e + 1) % 3]);
      adj[t[(e + 1) % 3]].push_back(t[e]);
    }
  for (auto& a : adj) {
    std::sort(a.begin(), a.end());
    a.erase(std::unique(a.begin(), a.end()), a.end());
  }
  return adj;
}

/// Taubin lambda|mu smoothing with uniform umbrella weights. Each iteration
/// is a shrinking step (lambda) followed by an inflating step (mu).
inline TriangleMesh taubin_smooth(TriangleMesh mesh, const TaubinOptions& opts = {}) {
  if (!(opts.lambda > 0.0 && opts.lambda < 1.0)) fail(ErrorKind::kValidation, "Taubin lambda must be in (0,1)");
  if (!(opts.mu < -opts.lambda)) fail(ErrorKind::kValidation, "Taubin mu must satisfy mu < -lambda");
  if (opts.iterations < 0) fail(ErrorKind::kValidation, "Taubin iterations must be >= 0");
  if (opts.iterations == 0 || mesh.empty()) return mesh;

  const auto adj = vertex_neighbors(mesh);
  std::vector<Vec3> next(mesh.vertex_count());
  auto step = [&](double factor) {
    parallel_for(mesh.vertex_count(), opts.workers, [&](std::size_t begin, std::size_t end) {
      for (std::size_t v = begin; v < end; ++v) {
        const auto& nbrs = adj[v];
        if (nbrs.empty()) {
          next[v] = mesh.vertices[v];
          continue;
        }
        Vec3 avg = Vec3::Zero();
        for (auto w : nbrs) avg += mesh.vertices[w];
        avg /= static_cast<double>(nbrs.size());
        next[v] = mesh.vertices[v] + factor * (avg - mesh.vertices[v]);
      }
    });
    mesh.vertices.swap(next);
  };
  for (int it = 0; it < opts.iterations; ++it) {
    step(opts.lambda);
    step(opts.mu);
  }
  return mesh;
}

}  // namespace splatlidar
