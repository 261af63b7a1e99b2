// Copyright Contributors to the splatlidar Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "splatlidar/error.hpp"
#include "splatlidar/geometry.hpp"
#include "splatlidar/ply.hpp"

#include <cmath>
#include <functional>
#include <string>
#include <vector>

namespace splatlidar {

/// One activated anisotropic Gaussian: covariance = R S S^T R^T with
/// R = rotation(q) and S = diag(scale).
struct Gaussian {
  Vec3 mu = Vec3::Zero();
  Eigen::Quaterniond q = Eigen::Quaterniond::Identity();  // unit, (w,x,y,z) on disk
  Vec3 scale = Vec3::Ones();                              // metres, > 0
  double opacity = 0.5;                                   // in (0,1)

  Mat3 rotation() const { return q.toRotationMatrix(); }
  Mat3 covariance() const {
    const Mat3 r = rotation();
    return r * scale.cwiseAbs2().asDiagonal() * r.transpose();
  }
};

/// Per-Gaussian precomputation: whitening W = diag(1/s) R^T, so the squared
/// Mahalanobis distance is |W (x - mu)|^2.
struct GaussianKernel {
  Vec3 mu;
  Mat3 whitening;

  explicit GaussianKernel(const Gaussian& g)
      : mu(g.mu), whitening(g.scale.cwiseInverse().asDiagonal() * g.rotation().transpose()) {}

  double mahalanobis_sq(const Vec3& x) const { return (whitening * (x - mu)).squaredNorm(); }
  double density(const Vec3& x) const { return std::exp(-0.5 * mahalanobis_sq(x)); }
};

/// Unnormalised density exp(-1/2 (x-mu)^T Sigma^-1 (x-mu)), in (0, 1].
inline double gaussian_density_at(const Gaussian& g, const Vec3& x) { return GaussianKernel(g).density(x); }

inline double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double logit(double p) { return std::log(p / (1.0 - p)); }

inline constexpr double kOpacityEps = 1e-12;
inline constexpr double kMinScale = 1e-9;

struct GaussianCloud {
  std::vector<Gaussian> gaussians;
  Aabb scene_box;  // encloses every mu, plus padding

  std::size_t size() const { return gaussians.size(); }
  bool empty() const { return gaussians.empty(); }
};

inline Aabb centers_box(const std::vector<Gaussian>& gs, double padding = 0.0) {
  Aabb box;
  for (const auto& g : gs) box.extend(g.mu);
  return box.padded(padding);
}

struct LoadOptions {
  double scene_padding = 0.0;  // metres added around the box of centres
  bool drop_transparent = false;
  double opacity_floor = 0.005;
};

/// Applies the on-disk activations: exp for log-scale, logistic for the
/// opacity logit, normalisation for the quaternion.
inline Gaussian activate(const Vec3& mu, const Eigen::Vector4d& rot_wxyz, const Vec3& log_scale, double opacity_logit) {
  Gaussian g;
  g.mu = mu;
  Eigen::Quaterniond q(rot_wxyz[0], rot_wxyz[1], rot_wxyz[2], rot_wxyz[3]);
  const double n = q.norm();
  if (!(n > 0.0) || !std::isfinite(n))
    q = Eigen::Quaterniond::Identity();
  else
    q.coeffs() /= n;
  g.q = q;
  for (int a = 0; a < 3; ++a) g.scale[a] = std::max(kMinScale, std::exp(log_scale[a]));
  g.opacity = std::clamp(logistic(opacity_logit), kOpacityEps, 1.0 - kOpacityEps);
  return g;
}

inline const std::vector<std::string>& required_gaussian_properties() {
  static const std::vector<std::string> kProps{"x",       "y",       "z",       "rot_0",   "rot_1",
                                               "rot_2",   "rot_3",   "scale_0", "scale_1", "scale_2",
                                               "opacity"};
  return kProps;
}

inline GaussianCloud parse_gaussians(std::string_view bytes, const LoadOptions& opts = {}) {
  const ply::Header header = ply::parse_header(bytes);
  const ply::Element* vertex = header.find("vertex");
  if (!vertex) fail(ErrorKind::kFormat, "PLY has no 'vertex' element");
  for (const auto& p : required_gaussian_properties())
    if (!vertex->find(p)) fail(ErrorKind::kFormat, "3DGS PLY is missing required property '" + p + "'");
  if (vertex->count == 0) fail(ErrorKind::kEmptyAsset, "3DGS PLY contains zero Gaussians");

  auto data = ply::read(bytes, header, {{"vertex", required_gaussian_properties(), {}}});
  const auto& col = data.at("vertex").scalars;
  const auto& x = col.at("x");
  const auto& y = col.at("y");
  const auto& z = col.at("z");
  const auto& r0 = col.at("rot_0");
  const auto& r1 = col.at("rot_1");
  const auto& r2 = col.at("rot_2");
  const auto& r3 = col.at("rot_3");
  const auto& s0 = col.at("scale_0");
  const auto& s1 = col.at("scale_1");
  const auto& s2 = col.at("scale_2");
  const auto& op = col.at("opacity");

  GaussianCloud cloud;
  cloud.gaussians.reserve(vertex->count);
  for (std::size_t i = 0; i < vertex->count; ++i) {
    Gaussian g = activate({x[i], y[i], z[i]}, {r0[i], r1[i], r2[i], r3[i]}, {s0[i], s1[i], s2[i]}, op[i]);
    if (!g.mu.allFinite()) fail(ErrorKind::kFormat, "Gaussian " + std::to_string(i) + " has a non-finite position");
    if (opts.drop_transparent && g.opacity < opts.opacity_floor) continue;
    cloud.gaussians.push_back(g);
  }
  if (cloud.gaussians.empty()) fail(ErrorKind::kEmptyAsset, "no Gaussians left after the opacity floor");
  cloud.scene_box = centers_box(cloud.gaussians, opts.scene_padding);
  return cloud;
}

inline GaussianCloud load_ply(const std::string& path, const LoadOptions& opts = {}) {
  return parse_gaussians(ply::read_file(path), opts);
}

/// Writes the standard 3DGS layout (binary little-endian, float32). Normals
/// and DC colour are written as zeros so common viewers accept the file.
inline std::string serialize_gaussians(const std::vector<Gaussian>& gs) {
  using ply::Type;
  ply::Writer w("splatlidar gaussians");
  w.element("vertex", gs.size(),
            {{"x", Type::kFloat32},       {"y", Type::kFloat32},       {"z", Type::kFloat32},
             {"nx", Type::kFloat32},      {"ny", Type::kFloat32},      {"nz", Type::kFloat32},
             {"f_dc_0", Type::kFloat32},  {"f_dc_1", Type::kFloat32},  {"f_dc_2", Type::kFloat32},
             {"opacity", Type::kFloat32}, {"scale_0", Type::kFloat32}, {"scale_1", Type::kFloat32},
             {"scale_2", Type::kFloat32}, {"rot_0", Type::kFloat32},   {"rot_1", Type::kFloat32},
             {"rot_2", Type::kFloat32},   {"rot_3", Type::kFloat32}});
  for (const auto& g : gs) {
    for (int a = 0; a < 3; ++a) w.put(static_cast<float>(g.mu[a]));
    for (int a = 0; a < 6; ++a) w.put(0.0f);
    w.put(static_cast<float>(logit(g.opacity)));
    for (int a = 0; a < 3; ++a) w.put(static_cast<float>(std::log(g.scale[a])));
    w.put(static_cast<float>(g.q.w()));
    w.put(static_cast<float>(g.q.x()));
    w.put(static_cast<float>(g.q.y()));
    w.put(static_cast<float>(g.q.z()));
  }
  return w.str();
}

inline void save_ply(const std::string& path, const std::vector<Gaussian>& gs) {
  const std::string bytes = serialize_gaussians(gs);
  std::ofstream f(path, std::ios::binary);
  if (!f) fail(ErrorKind::kIo, "cannot write '" + path + "'");
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace splatlidar
