// Copyright Contributors to the splatlidar Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "splatlidar/error.hpp"
#include "splatlidar/lidar_io.hpp"
#include "splatlidar/tsdf.hpp"

#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace splatlidar {

inline bool operator==(const Rethreshold& a, const Rethreshold& b) { return a.mode == b.mode && a.value == b.value; }

/// Every tunable of the pipeline. Negative values of the "auto" fields are
/// resolved against the voxel grid at run time; they serialize as "auto".
struct PipelineConfig {
  // gs_assets
  bool drop_transparent = false;
  double opacity_floor = 0.005;
  // lbvh / voxelizer
  double kappa = 3.0;
  double spacing = -1.0;  // auto: longest extent / 512
  double theta = 0.5;
  int tile = 8;
  // tsdf
  double denoise_sigma = -1.0;  // metres; auto: one voxel; 0 disables
  Rethreshold rethreshold{};
  double band_radius = -1.0;  // auto: 4 * v_min
  // mesher
  double iso = 0.0;  // metres, added to the half-shell-centred level
  int mc_step = 1;
  std::size_t simplify_target = 0;  // faces; 0: use the ratio
  double simplify_ratio = -1.0;     // auto: 0.25 above 2M raw faces, else 1.0
  double taubin_lambda = 0.5;
  double taubin_mu = -0.53;
  int taubin_iterations = 10;
  // lidar
  std::string pattern = "VLP32";
  std::string pose = "0,0,0,1,0,0,0";
  // evalkit
  std::vector<double> thresholds{0.02, 0.10};
  // synth
  std::uint64_t seed = 7;

  friend bool operator==(const PipelineConfig&, const PipelineConfig&) = default;
};

namespace detail {

inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string fmt_auto(double v) { return v < 0.0 ? "auto" : fmt_double(v); }

inline double parse_auto(const std::string& s, const std::string& key) {
  if (s == "auto") return -1.0;
  const double v = parse_scalar(s, ErrorKind::kUsage, key);
  if (v < 0.0) fail(ErrorKind::kValidation, key + " must be >= 0 or auto");
  return v;
}

inline bool parse_bool(const std::string& s, const std::string& key) {
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  fail(ErrorKind::kUsage, key + " expects true or false, got '" + s + "'");
}

struct ConfigField {
  std::function<std::string(const PipelineConfig&)> get;
  std::function<void(PipelineConfig&, const std::string&)> set;
};

inline const std::vector<std::pair<std::string, ConfigField>>& config_fields() {
  using C = PipelineConfig;
  static const std::vector<std::pair<std::string, ConfigField>> fields = {
      {"drop_transparent",
       {[](const C& c) { return std::string(c.drop_transparent ? "true" : "false"); },
        [](C& c, const std::string& v) { c.drop_transparent = parse_bool(v, "drop_transparent"); }}},
      {"opacity_floor",
       {[](const C& c) { return fmt_double(c.opacity_floor); },
        [](C& c, const std::string& v) { c.opacity_floor = parse_scalar(v, ErrorKind::kUsage, "opacity_floor"); }}},
      {"kappa",
       {[](const C& c) { return fmt_double(c.kappa); },
        [](C& c, const std::string& v) { c.kappa = parse_scalar(v, ErrorKind::kUsage, "kappa"); }}},
      {"spacing",
       {[](const C& c) { return fmt_auto(c.spacing); },
        [](C& c, const std::string& v) { c.spacing = parse_auto(v, "spacing"); }}},
      {"theta",
       {[](const C& c) { return fmt_double(c.theta); },
        [](C& c, const std::string& v) { c.theta = parse_scalar(v, ErrorKind::kUsage, "theta"); }}},
      {"tile",
       {[](const C& c) { return std::to_string(c.tile); },
        [](C& c, const std::string& v) { c.tile = parse_int(v, ErrorKind::kUsage, "tile"); }}},
      {"denoise_sigma",
       {[](const C& c) { return fmt_auto(c.denoise_sigma); },
        [](C& c, const std::string& v) { c.denoise_sigma = parse_auto(v, "denoise_sigma"); }}},
      {"rethreshold",
       {[](const C& c) {
          return std::string(c.rethreshold.mode == Rethreshold::Mode::kFixed ? "fixed:" : "quantile:") +
                 fmt_double(c.rethreshold.value);
        },
        [](C& c, const std::string& v) {
          const auto colon = v.find(':');
          const std::string mode = v.substr(0, colon);
          if (colon == std::string::npos || (mode != "fixed" && mode != "quantile"))
            fail(ErrorKind::kUsage, "rethreshold expects fixed:<tau> or quantile:<q>, got '" + v + "'");
          c.rethreshold.mode = mode == "fixed" ? Rethreshold::Mode::kFixed : Rethreshold::Mode::kQuantile;
          c.rethreshold.value = parse_scalar(v.substr(colon + 1), ErrorKind::kUsage, "rethreshold");
        }}},
      {"band_radius",
       {[](const C& c) { return fmt_auto(c.band_radius); },
        [](C& c, const std::string& v) { c.band_radius = parse_auto(v, "band_radius"); }}},
      {"iso",
       {[](const C& c) { return fmt_double(c.iso); },
        [](C& c, const std::string& v) { c.iso = parse_scalar(v, ErrorKind::kUsage, "iso"); }}},
      {"mc_step",
       {[](const C& c) { return std::to_string(c.mc_step); },
        [](C& c, const std::string& v) { c.mc_step = parse_int(v, ErrorKind::kUsage, "mc_step"); }}},
      {"simplify_target",
       {[](const C& c) { return std::to_string(c.simplify_target); },
        [](C& c, const std::string& v) {
          const int t = parse_int(v, ErrorKind::kUsage, "simplify_target");
          if (t < 0) fail(ErrorKind::kValidation, "simplify_target must be >= 0");
          c.simplify_target = static_cast<std::size_t>(t);
        }}},
      {"simplify_ratio",
       {[](const C& c) { return fmt_auto(c.simplify_ratio); },
        [](C& c, const std::string& v) { c.simplify_ratio = parse_auto(v, "simplify_ratio"); }}},
      {"taubin_lambda",
       {[](const C& c) { return fmt_double(c.taubin_lambda); },
        [](C& c, const std::string& v) { c.taubin_lambda = parse_scalar(v, ErrorKind::kUsage, "taubin_lambda"); }}},
      {"taubin_mu",
       {[](const C& c) { return fmt_double(c.taubin_mu); },
        [](C& c, const std::string& v) { c.taubin_mu = parse_scalar(v, ErrorKind::kUsage, "taubin_mu"); }}},
      {"taubin_iterations",
       {[](const C& c) { return std::to_string(c.taubin_iterations); },
        [](C& c, const std::string& v) { c.taubin_iterations = parse_int(v, ErrorKind::kUsage, "taubin_iterations"); }}},
      {"pattern",
       {[](const C& c) { return c.pattern; }, [](C& c, const std::string& v) { c.pattern = v; }}},
      {"pose", {[](const C& c) { return c.pose; }, [](C& c, const std::string& v) { c.pose = v; }}},
      {"thresholds",
       {[](const C& c) {
          std::string s;
          for (std::size_t i = 0; i < c.thresholds.size(); ++i) s += (i ? "," : "") + fmt_double(c.thresholds[i]);
          return s;
        },
        [](C& c, const std::string& v) { c.thresholds = parse_numbers(v, ErrorKind::kUsage, "thresholds"); }}},
      {"seed",
       {[](const C& c) { return std::to_string(c.seed); },
        [](C& c, const std::string& v) {
          try {
            std::size_t used = 0;
            c.seed = std::stoull(v, &used);
            if (used != v.size()) throw std::invalid_argument(v);
          } catch (const std::logic_error&) {
            fail(ErrorKind::kUsage, "seed expects a non-negative integer, got '" + v + "'");
          }
        }}},
  };
  return fields;
}

}  // namespace detail

/// Checks every field against its stage's preconditions.
inline void validate(const PipelineConfig& c) {
  auto bad = [](const std::string& msg) { fail(ErrorKind::kValidation, msg); };
  if (!(c.opacity_floor >= 0.0 && c.opacity_floor < 1.0)) bad("opacity_floor must be in [0,1)");
  if (!(c.kappa >= 1.0)) bad("kappa must be >= 1");
  if (!(c.theta > 0.0)) bad("theta must be > 0");
  if (c.tile < 1) bad("tile must be >= 1");
  if (!(c.rethreshold.value > 0.0 && c.rethreshold.value < 1.0)) bad("rethreshold value must be in (0,1)");
  if (c.band_radius == 0.0) bad("band_radius must be > 0");
  if (c.mc_step < 1) bad("mc_step must be >= 1");
  if (c.simplify_ratio == 0.0 || c.simplify_ratio > 1.0) bad("simplify_ratio must be in (0,1] or auto");
  if (c.simplify_target != 0 && c.simplify_target < 4) bad("simplify_target must be 0 or >= 4");
  if (!(c.taubin_lambda > 0.0 && c.taubin_lambda < 1.0)) bad("taubin_lambda must be in (0,1)");
  if (!(c.taubin_mu < -c.taubin_lambda)) bad("taubin_mu must be below -taubin_lambda");
  if (c.taubin_iterations < 0) bad("taubin_iterations must be >= 0");
  if (c.thresholds.empty()) bad("thresholds needs at least one value");
  for (double t : c.thresholds)
    if (!(t > 0.0) || !std::isfinite(t)) bad("thresholds must be positive");
  if (!std::isfinite(c.iso)) bad("iso must be finite");
  parse_pose(c.pose);
}

inline void set_config_value(PipelineConfig& c, const std::string& key, const std::string& value) {
  for (const auto& [k, f] : detail::config_fields())
    if (k == key) return f.set(c, value);
  fail(ErrorKind::kUsage, "unknown config key '" + key + "'");
}

/// Applies "key=value" overrides in order.
inline void apply_overrides(PipelineConfig& c, const std::vector<std::string>& overrides) {
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) fail(ErrorKind::kUsage, "override '" + o + "' is not key=value");
    set_config_value(c, detail::trim(o.substr(0, eq)), detail::trim(o.substr(eq + 1)));
  }
}

inline PipelineConfig parse_config(std::string_view text) {
  PipelineConfig c;
  for (const auto& [k, v] : detail::parse_key_values(text, "config")) set_config_value(c, k, v);
  validate(c);
  return c;
}

inline std::string serialize_config(const PipelineConfig& c) {
  std::string out;
  for (const auto& [k, f] : detail::config_fields()) out += k + "=" + f.get(c) + "\n";
  return out;
}

inline PipelineConfig load_config(const std::string& path) { return parse_config(ply::read_file(path)); }

}  // namespace splatlidar
