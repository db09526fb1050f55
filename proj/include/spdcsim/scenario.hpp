// Copyright (c) 2026 spdcsim contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "spdcsim/core.hpp"
#include "spdcsim/crystal.hpp"
#include "spdcsim/grid.hpp"
#include "spdcsim/io.hpp"
#include "spdcsim/measurement.hpp"
#include "spdcsim/observables.hpp"
#include "spdcsim/pump.hpp"
#include "spdcsim/state.hpp"
#include "spdcsim/tailor.hpp"

namespace spdcsim {

/// Config file violates the schema (exit code 2 at the command line).
class config_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int schema_version = 1;

/// Command-line overrides applied on top of a config file.
struct CliOverrides {
  std::optional<std::filesystem::path> out;   ///< replaces output.directory
  std::optional<std::uint64_t> seed;          ///< replaces measurement.seed
  bool strict = false;                        ///< fail when the state flunks kernel_check
};

namespace cfg {

using json = nlohmann::json;

inline std::string join(const std::string& path, const char* key) {
  return path.empty() ? std::string(key) : path + "." + key;
}

/// Reject keys outside the allowed set so typos never pass silently.
inline void check_keys(const json& obj, const std::string& path,
                       std::initializer_list<std::string_view> allowed) {
  for (const auto& [key, _] : obj.items()) {
    bool ok = false;
    for (std::string_view a : allowed) ok = ok || key == a;
    if (!ok)
      throw config_error("unknown key \"" + join(path, key.c_str()) + "\"");
  }
}

inline const json& req(const json& obj, const std::string& path, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end()) throw config_error("missing \"" + join(path, key) + "\"");
  return *it;
}

inline const json* opt(const json& obj, const char* key) {
  auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

inline const json& req_obj(const json& obj, const std::string& path, const char* key) {
  const json& v = req(obj, path, key);
  if (!v.is_object()) throw config_error("\"" + join(path, key) + "\" must be an object");
  return v;
}

inline double num(const json& obj, const std::string& path, const char* key) {
  const json& v = req(obj, path, key);
  if (!v.is_number()) throw config_error("\"" + join(path, key) + "\" must be a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) throw config_error("\"" + join(path, key) + "\" must be finite");
  return x;
}

inline double num_or(const json& obj, const std::string& path, const char* key,
                     double fallback) {
  return opt(obj, key) ? num(obj, path, key) : fallback;
}

inline std::int64_t integer(const json& obj, const std::string& path, const char* key) {
  const json& v = req(obj, path, key);
  if (!v.is_number_integer())
    throw config_error("\"" + join(path, key) + "\" must be an integer");
  return v.get<std::int64_t>();
}

inline std::int64_t integer_or(const json& obj, const std::string& path, const char* key,
                               std::int64_t fallback) {
  return opt(obj, key) ? integer(obj, path, key) : fallback;
}

inline std::string str(const json& obj, const std::string& path, const char* key) {
  const json& v = req(obj, path, key);
  if (!v.is_string()) throw config_error("\"" + join(path, key) + "\" must be a string");
  return v.get<std::string>();
}

inline std::string str_or(const json& obj, const std::string& path, const char* key,
                          const std::string& fallback) {
  return opt(obj, key) ? str(obj, path, key) : fallback;
}

/// Run a module precondition check, converting its rejection into a schema
/// error: bad parameter values are caught before any computation starts.
template <class F>
void precheck(F&& f) {
  try {
    f();
  } catch (const std::invalid_argument& e) {
    throw config_error(e.what());
  }
}

}  // namespace cfg

// ---------------------------------------------------------------------------
// Parsed sub-configs. Each parser fills both the module spec and a resolved
// JSON echo (defaults included) used for sidecars, so every artifact records
// enough to reproduce the run.

struct OutputConfig {
  std::filesystem::path directory;
  bool binary = true, pgm = true, csv = true;
};

struct MeasurementConfig {
  std::size_t frames = 0;
  double mean_pairs = 1.0;
  CameraSpec camera;
  EstimateKind kind = EstimateKind::Sum;
  std::uint64_t seed = 0;
};

namespace cfg {

inline Grid2D parse_grid(const json& j, const std::string& path) {
  check_keys(j, path, {"n", "extent"});
  const std::int64_t n = integer(j, path, "n");
  if (n < 2 || n > 8192 || n % 2 != 0)
    throw config_error("\"" + join(path, "n") + "\" must be even and in [2, 8192]");
  const double extent = num(j, path, "extent");
  Grid2D g;
  precheck([&] { g = make_grid(int(n), extent, Domain::Position); });
  return g;
}

inline SlmMask parse_mask(const json& j, const std::string& path, const Grid2D& g,
                          const std::filesystem::path& base_dir, json& echo) {
  const std::string kind = str(j, path, "kind");
  echo["kind"] = kind;
  SlmMask m;
  if (kind == "flat") {
    check_keys(j, path, {"kind"});
    m = flat_mask(g);
  } else if (kind == "axicon") {
    check_keys(j, path, {"kind", "k_r"});
    const double k_r = num(j, path, "k_r");
    echo["k_r"] = k_r;
    precheck([&] { m = axicon_mask(g, k_r); });
  } else if (kind == "checkerboard") {
    check_keys(j, path, {"kind", "tile", "depth"});
    const std::int64_t tile = integer(j, path, "tile");
    const double depth = num_or(j, path, "depth", pi);
    echo["tile"] = tile;
    echo["depth"] = depth;
    precheck([&] { m = checkerboard_mask(g, int(tile), depth); });
  } else if (kind == "random") {
    check_keys(j, path, {"kind", "correlation_length", "seed"});
    const double cl = num(j, path, "correlation_length");
    const std::int64_t sd = integer_or(j, path, "seed", 0);
    if (sd < 0) throw config_error("\"" + join(path, "seed") + "\" must be >= 0");
    echo["correlation_length"] = cl;
    echo["seed"] = sd;
    precheck([&] { m = random_mask(g, cl, std::uint64_t(sd)); });
  } else if (kind == "ring_fourier") {
    check_keys(j, path, {"kind", "k_r", "width"});
    const double k_r = num(j, path, "k_r");
    const double width = num(j, path, "width");
    echo["k_r"] = k_r;
    echo["width"] = width;
    precheck([&] { m = ring_fourier_mask(g, k_r, width); });
  } else if (kind == "custom") {
    check_keys(j, path, {"kind", "phase_file"});
    const std::string file = str(j, path, "phase_file");
    echo["phase_file"] = file;
    const RealField2D ph = load_real_field(base_dir / file, &g);
    precheck([&] { m = custom_mask(g, ph.v); });
  } else {
    throw config_error("\"" + join(path, "kind") + "\": unknown mask kind \"" + kind +
                       "\"");
  }
  return m;
}

inline PumpSpec parse_pump(const json& j, const std::string& path, const Grid2D& g,
                           json& echo) {
  check_keys(j, path, {"waist", "wavelength", "mask"});
  PumpSpec p;
  p.grid = g;
  p.waist = num(j, path, "waist");
  p.wavelength = num_or(j, path, "wavelength", 405e-9);
  echo["waist"] = p.waist;
  echo["wavelength"] = p.wavelength;
  precheck([&] { validate(p, "pump"); });
  return p;
}

inline CrystalSpec parse_crystal(const json& j, const std::string& path,
                                 double pump_wavelength, json& echo) {
  check_keys(j, path, {"length", "refractive_index", "model"});
  CrystalSpec c;
  c.length = num(j, path, "length");
  c.refractive_index = num_or(j, path, "refractive_index", 1.0);
  c.pump_wavelength = pump_wavelength;
  const std::string model = str_or(j, path, "model", "sinc");
  if (model == "sinc")
    c.model = PhaseMatchModel::Sinc;
  else if (model == "gauss")
    c.model = PhaseMatchModel::Gauss;
  else
    throw config_error("\"" + join(path, "model") + "\" must be \"sinc\" or \"gauss\"");
  echo["length"] = c.length;
  echo["refractive_index"] = c.refractive_index;
  echo["model"] = model;
  precheck([&] { validate(c, "crystal"); });
  return c;
}

inline ImagingConfig parse_imaging(const json* j, const std::string& path, json& echo) {
  ImagingConfig cfg;
  std::string plane = "far_field";
  if (j) {
    check_keys(*j, path, {"span", "plane", "detected_wavelength"});
    cfg.span = num_or(*j, path, "span", cfg.span);
    cfg.detected_wavelength = num_or(*j, path, "detected_wavelength", cfg.detected_wavelength);
    plane = str_or(*j, path, "plane", plane);
  }
  if (plane == "far_field")
    cfg.plane = CameraPlane::FarField;
  else if (plane == "near_field")
    cfg.plane = CameraPlane::NearField;
  else
    throw config_error("\"" + join(path, "plane") +
                       "\" must be \"far_field\" or \"near_field\"");
  echo["span"] = cfg.span;
  echo["plane"] = plane;
  echo["detected_wavelength"] = cfg.detected_wavelength;
  precheck([&] { validate(cfg, "imaging"); });
  return cfg;
}

inline std::vector<std::string> parse_observables(const json& j, const std::string& path) {
  if (!j.is_array() || j.empty())
    throw config_error("\"" + path + "\" must be a non-empty array");
  std::vector<std::string> out;
  for (const json& v : j) {
    if (!v.is_string()) throw config_error("\"" + path + "\" entries must be strings");
    const std::string name = v.get<std::string>();
    if (name != "sum_projection" && name != "minus_projection" && name != "row_map" &&
        name != "intensity" && name != "near_field")
      throw config_error("\"" + path + "\": unknown observable \"" + name + "\"");
    for (const std::string& seen : out)
      if (seen == name) throw config_error("\"" + path + "\": duplicate \"" + name + "\"");
    out.push_back(name);
  }
  return out;
}

inline MeasurementConfig parse_measurement(const json& j, const std::string& path,
                                           const CliOverrides& ov, json& echo) {
  check_keys(j, path,
             {"frames", "mean_pairs", "efficiency", "dark_count_prob", "estimate", "seed"});
  MeasurementConfig m;
  const std::int64_t frames = integer(j, path, "frames");
  if (frames < 2 || frames > (std::int64_t(1) << 32))
    throw config_error("\"" + join(path, "frames") + "\" must be in [2, 2^32]");
  m.frames = std::size_t(frames);
  m.mean_pairs = num(j, path, "mean_pairs");
  if (!(m.mean_pairs > 0) || !(m.mean_pairs < 500))
    throw config_error("\"" + join(path, "mean_pairs") + "\" must be in (0, 500)");
  m.camera.efficiency = num_or(j, path, "efficiency", 1.0);
  m.camera.dark_count_prob = num_or(j, path, "dark_count_prob", 0.0);
  precheck([&] { validate(m.camera, "measurement"); });
  const std::string kind = str_or(j, path, "estimate", "sum");
  if (kind == "sum")
    m.kind = EstimateKind::Sum;
  else if (kind == "row_map")
    m.kind = EstimateKind::RowMap;
  else
    throw config_error("\"" + join(path, "estimate") + "\" must be \"sum\" or \"row_map\"");
  const std::int64_t seed = integer_or(j, path, "seed", 0);
  if (seed < 0) throw config_error("\"" + join(path, "seed") + "\" must be >= 0");
  m.seed = ov.seed ? *ov.seed : std::uint64_t(seed);
  echo["frames"] = frames;
  echo["mean_pairs"] = m.mean_pairs;
  echo["efficiency"] = m.camera.efficiency;
  echo["dark_count_prob"] = m.camera.dark_count_prob;
  echo["estimate"] = kind;
  echo["seed"] = m.seed;
  return m;
}

inline OutputConfig parse_output(const json& j, const std::string& path,
                                 const CliOverrides& ov, json& echo) {
  check_keys(j, path, {"directory", "formats"});
  OutputConfig out;
  out.directory = str(j, path, "directory");
  if (ov.out) out.directory = *ov.out;
  if (const json* f = opt(j, "formats")) {
    if (!f->is_array()) throw config_error("\"" + join(path, "formats") + "\" must be an array");
    out.binary = out.pgm = out.csv = false;
    for (const json& v : *f) {
      const std::string s = v.is_string() ? v.get<std::string>() : "";
      if (s == "binary")
        out.binary = true;
      else if (s == "pgm")
        out.pgm = true;
      else if (s == "csv")
        out.csv = true;
      else
        throw config_error("\"" + join(path, "formats") +
                           "\": entries must be \"binary\", \"pgm\", or \"csv\"");
    }
  }
  echo["directory"] = out.directory.string();
  json fmts = json::array();
  if (out.binary) fmts.push_back("binary");
  if (out.pgm) fmts.push_back("pgm");
  if (out.csv) fmts.push_back("csv");
  echo["formats"] = fmts;
  return out;
}

inline json parse_config_file(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw config_error(path.string() + ": " + e.what());
  }
  if (!j.is_object()) throw config_error(path.string() + ": top level must be an object");
  const json& v = req(j, "", "schema_version");
  if (!v.is_number_integer() || v.get<std::int64_t>() != schema_version)
    throw config_error("\"schema_version\" must be " + std::to_string(schema_version));
  return j;
}

}  // namespace cfg

// ---------------------------------------------------------------------------
// State archive: the two factor fields in the complex binary format plus a
// JSON sidecar carrying lattice, crystal, and normalization metadata.

inline void save_state(const TwoPhotonState& s, const std::filesystem::path& dir,
                       cfg::json& meta) {
  dump_field(s.sum_factor, dir / "state_sum.bpf1");
  dump_field(s.diff_factor, dir / "state_diff.bpf1");
  cfg::json j;
  j["schema_version"] = schema_version;
  j["library"] = std::string(library_version);
  cfg::json st;
  st["sum_file"] = "state_sum.bpf1";
  st["diff_file"] = "state_diff.bpf1";
  st["rep"] = s.rep == StateRep::Momentum ? "momentum" : "position";
  st["arg_stride"] = s.arg_stride;
  st["norm_constant"] = s.norm_constant;
  st["grid"] = {{"n", s.sum_factor.grid.n},
                {"pitch", s.sum_factor.grid.pitch},
                {"domain", s.sum_factor.grid.domain == Domain::Momentum ? "momentum"
                                                                        : "position"}};
  st["crystal"] = {
      {"length", s.crystal.length},
      {"pump_wavelength", s.crystal.pump_wavelength},
      {"refractive_index", s.crystal.refractive_index},
      {"model", s.crystal.model == PhaseMatchModel::Sinc ? "sinc" : "gauss"}};
  j["state"] = st;
  meta["state"] = st;
  write_file_atomic(dir / "state.json", j.dump(2) + "\n");
}

inline TwoPhotonState load_state(const std::filesystem::path& sidecar_path) {
  cfg::json j;
  try {
    j = cfg::json::parse(read_file(sidecar_path));
  } catch (const cfg::json::parse_error& e) {
    throw io_error(sidecar_path.string() + ": " + e.what());
  }
  if (!j.is_object() || !j.contains("state") || !j["state"].is_object())
    throw io_error(sidecar_path.string() + ": not a state sidecar");
  const cfg::json& st = j["state"];
  try {
    TwoPhotonState s;
    if (st.at("rep").get<std::string>() != "momentum" || st.at("arg_stride").get<int>() != 1)
      throw io_error(sidecar_path.string() +
                     ": only momentum-representation states are loadable");
    const cfg::json& g = st.at("grid");
    Grid2D grid{g.at("n").get<int>(), g.at("pitch").get<double>(),
                g.at("domain").get<std::string>() == "momentum" ? Domain::Momentum
                                                                : Domain::Position};
    validate(grid, "load_state");
    const std::filesystem::path dir = sidecar_path.parent_path();
    s.sum_factor =
        load_complex_field(dir / st.at("sum_file").get<std::string>(), &grid);
    s.diff_factor =
        load_complex_field(dir / st.at("diff_file").get<std::string>(), &grid);
    const cfg::json& c = st.at("crystal");
    s.crystal.length = c.at("length").get<double>();
    s.crystal.pump_wavelength = c.at("pump_wavelength").get<double>();
    s.crystal.refractive_index = c.at("refractive_index").get<double>();
    s.crystal.model = c.at("model").get<std::string>() == "gauss" ? PhaseMatchModel::Gauss
                                                                  : PhaseMatchModel::Sinc;
    validate(s.crystal, "load_state");
    s.rep = StateRep::Momentum;
    s.arg_stride = 1;
    s.norm_constant = st.at("norm_constant").get<double>();
    if (!(s.norm_constant > 0) || !std::isfinite(s.norm_constant))
      throw io_error(sidecar_path.string() + ": bad norm_constant");
    return s;
  } catch (const cfg::json::exception& e) {
    throw io_error(sidecar_path.string() + ": " + e.what());
  } catch (const std::invalid_argument& e) {
    throw io_error(sidecar_path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Artifact emission

namespace detail {

inline const char* domain_name(Domain d) {
  return d == Domain::Momentum ? "momentum" : "position";
}

/// Write one named map in every requested encoding plus its JSON sidecar.
/// `extra` carries content-specific metadata (ridge clusters, estimates).
inline void emit_map(const RealField2D& map, const std::string& name,
                     const OutputConfig& out, const cfg::json& run_echo,
                     const cfg::json& extra, std::vector<std::string>& artifacts,
                     bool radial) {
  cfg::json side;
  side["schema_version"] = schema_version;
  side["library"] = std::string(library_version);
  cfg::json art;
  art["content"] = name;
  art["rows"] = map.grid.n;
  art["cols"] = map.grid.n;
  art["pitch"] = map.grid.pitch;
  art["domain"] = domain_name(map.grid.domain);
  if (out.binary) {
    const std::string file = name + ".bpr1";
    dump_field(map, out.directory / file);
    artifacts.push_back(file);
    art["file"] = file;
    art["format"] = std::string(format_real_field);
  }
  side["artifact"] = art;
  if (!extra.is_null()) side["details"] = extra;
  side["config"] = run_echo;
  if (out.pgm) {
    render_preview(map, out.directory / (name + ".pgm"), PreviewScale::Linear);
    render_preview(map, out.directory / (name + "_log.pgm"), PreviewScale::Log);
    artifacts.push_back(name + ".pgm");
    artifacts.push_back(name + "_log.pgm");
  }
  if (out.csv && radial) {
    write_radial_csv(radial_profile(map), out.directory / (name + "_radial.csv"));
    artifacts.push_back(name + "_radial.csv");
  }
  write_file_atomic(out.directory / (name + ".json"), side.dump(2) + "\n");
  artifacts.push_back(name + ".json");
}

inline cfg::json ridge_json(const RowCorrelationMap& map) {
  cfg::json out = cfg::json::array();
  for (const RidgeCluster& c : ridge_extract(map, {})) {
    out.push_back({{"offset", c.offset},
                   {"offset_bins", c.offset / map.axis.pitch},
                   {"strength", c.strength},
                   {"members", c.members}});
  }
  return out;
}

/// Compute and emit the configured observables of a momentum-space state.
inline void emit_observables(const TwoPhotonState& s,
                             const std::vector<std::string>& names,
                             const ImagingConfig& imaging, const OutputConfig& out,
                             const cfg::json& run_echo,
                             std::vector<std::string>& artifacts) {
  std::optional<TwoPhotonState> near;
  for (const std::string& name : names) {
    if (name == "row_map") {
      const RowCorrelationMap map = row_correlation_map(s);
      RealField2D wrapped(map.axis);
      wrapped.v = map.m;
      cfg::json extra;
      extra["ridges"] = ridge_json(map);
      if (imaging.plane == CameraPlane::FarField) {
        wrapped = map_to_camera(wrapped, imaging);
        extra["camera_mapped"] = true;
      }
      emit_map(wrapped, name, out, run_echo, extra, artifacts, false);
      continue;
    }
    RealField2D map;
    if (name == "sum_projection")
      map = sum_projection(s);
    else if (name == "minus_projection")
      map = minus_projection(s);
    else if (name == "intensity")
      map = intensity_marginal(s);
    else {  // near_field
      if (!near) near = near_field_state(s);
      map = intensity_marginal(*near);
    }
    cfg::json extra;
    const bool far_side = name != "near_field";
    if (far_side && imaging.plane == CameraPlane::FarField) {
      map = map_to_camera(map, imaging);
      extra["camera_mapped"] = true;
    } else if (!far_side && imaging.plane == CameraPlane::NearField) {
      map = map_to_camera(map, imaging);
      extra["camera_mapped"] = true;
    }
    emit_map(map, name, out, run_echo, extra, artifacts, true);
  }
}

/// Render frames, estimate correlations, and emit both.
inline void emit_measurement(const TwoPhotonState& s, const MeasurementConfig& m,
                             const OutputConfig& out, const cfg::json& run_echo,
                             std::vector<std::string>& artifacts) {
  const FrameStack frames = render_frames(s, m.camera, m.frames, m.mean_pairs, m.seed);
  if (out.binary) {
    dump_frames(frames, out.directory / "frames.bpb1");
    artifacts.push_back("frames.bpb1");
  }
  cfg::json fside;
  fside["schema_version"] = schema_version;
  fside["library"] = std::string(library_version);
  fside["artifact"] = {{"content", "frames"},
                       {"file", "frames.bpb1"},
                       {"format", std::string(format_frame_stack)},
                       {"frames", m.frames},
                       {"rows", frames.grid.n},
                       {"cols", frames.grid.n}};
  fside["config"] = run_echo;
  write_file_atomic(out.directory / "frames.json", fside.dump(2) + "\n");
  artifacts.push_back("frames.json");

  const CorrelationEstimate est = estimate_correlations(frames, m.kind);
  const int n = est.axis.n;
  if (out.binary) {
    dump_matrix(est.value, n, out.directory / "estimate_value.bpr1");
    dump_matrix(est.raw, n, out.directory / "estimate_raw.bpr1");
    dump_matrix(est.se, n, out.directory / "estimate_se.bpr1");
    artifacts.push_back("estimate_value.bpr1");
    artifacts.push_back("estimate_raw.bpr1");
    artifacts.push_back("estimate_se.bpr1");
  }
  if (out.pgm) {
    RealField2D v(est.axis);
    v.v = est.value;
    render_preview(v, out.directory / "estimate_value.pgm", PreviewScale::Linear);
    render_preview(v, out.directory / "estimate_value_log.pgm", PreviewScale::Log);
    artifacts.push_back("estimate_value.pgm");
    artifacts.push_back("estimate_value_log.pgm");
  }
  cfg::json eside;
  eside["schema_version"] = schema_version;
  eside["library"] = std::string(library_version);
  eside["artifact"] = {{"content", m.kind == EstimateKind::Sum ? "estimate_sum"
                                                               : "estimate_row_map"},
                       {"rows", n},
                       {"cols", n},
                       {"files", {"estimate_value.bpr1", "estimate_raw.bpr1",
                                  "estimate_se.bpr1"}}};
  eside["config"] = run_echo;
  write_file_atomic(out.directory / "estimate.json", eside.dump(2) + "\n");
  artifacts.push_back("estimate.json");
}

inline void write_meta(const std::string& command, const OutputConfig& out,
                       cfg::json meta, const cfg::json& run_echo,
                       std::vector<std::string>& artifacts) {
  meta["schema_version"] = schema_version;
  meta["library"] = std::string(library_version);
  meta["command"] = command;
  meta["config"] = run_echo;
  artifacts.push_back("meta.json");
  std::sort(artifacts.begin(), artifacts.end());
  meta["artifacts"] = artifacts;
  write_file_atomic(out.directory / "meta.json", meta.dump(2) + "\n");
}

/// Wall time lives in its own file so every other artifact is byte-identical
/// across reruns of the same config and seed.
inline void write_run_log(const OutputConfig& out,
                          std::chrono::steady_clock::time_point t0) {
  const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  cfg::json j;
  j["wall_time_seconds"] = dt;
  write_file_atomic(out.directory / "run_log.json", j.dump(2) + "\n");
}

inline KernelCheckReport apply_strict(const TwoPhotonState& s, bool strict,
                                      cfg::json& meta) {
  const KernelCheckReport rep = kernel_check(s);
  meta["kernel_check"] = {{"dead_fraction", rep.dead_fraction},
                         {"observable", rep.observable}};
  if (strict && !rep.observable)
    throw std::domain_error(
        "kernel check failed in strict mode: " + std::to_string(rep.dead_fraction * 100) +
        "% of pump power sits on unobservable bins");
  return rep;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Subcommand drivers. Each parses its own config shape, runs the pipeline,
// and writes artifacts; errors surface as typed exceptions.

inline void run_simulate(const std::filesystem::path& config_path, const CliOverrides& ov) {
  const auto t0 = std::chrono::steady_clock::now();
  const cfg::json j = cfg::parse_config_file(config_path);
  cfg::check_keys(j, "", {"schema_version", "grid", "pump", "crystal", "imaging",
                          "observables", "measurement", "output"});
  cfg::json echo;
  echo["schema_version"] = schema_version;

  const Grid2D grid = cfg::parse_grid(cfg::req_obj(j, "", "grid"), "grid");
  echo["grid"] = {{"n", grid.n}, {"extent", grid.extent()}};

  const cfg::json& jp = cfg::req_obj(j, "", "pump");
  cfg::json pump_echo;
  const PumpSpec pump = cfg::parse_pump(jp, "pump", grid, pump_echo);
  cfg::json mask_echo;
  const SlmMask mask = cfg::parse_mask(cfg::req_obj(jp, "pump", "mask"), "pump.mask", grid,
                                       config_path.parent_path(), mask_echo);
  pump_echo["mask"] = mask_echo;
  echo["pump"] = pump_echo;

  cfg::json crystal_echo;
  const CrystalSpec crystal = cfg::parse_crystal(cfg::req_obj(j, "", "crystal"), "crystal",
                                                 pump.wavelength, crystal_echo);
  echo["crystal"] = crystal_echo;

  cfg::json imaging_echo;
  const ImagingConfig imaging =
      cfg::parse_imaging(cfg::opt(j, "imaging"), "imaging", imaging_echo);
  echo["imaging"] = imaging_echo;

  const std::vector<std::string> observables =
      cfg::parse_observables(cfg::req(j, "", "observables"), "observables");
  echo["observables"] = observables;

  std::optional<MeasurementConfig> meas;
  if (const cfg::json* jm = cfg::opt(j, "measurement")) {
    cfg::json meas_echo;
    meas = cfg::parse_measurement(*jm, "measurement", ov, meas_echo);
    echo["measurement"] = meas_echo;
  }

  cfg::json out_echo;
  const OutputConfig out =
      cfg::parse_output(cfg::req_obj(j, "", "output"), "output", ov, out_echo);
  echo["output"] = out_echo;

  std::filesystem::create_directories(out.directory);

  const ComplexField2D spectrum = shaped_pump_spectrum(pump, mask);
  const TwoPhotonState state = build_state(spectrum, crystal);

  cfg::json meta;
  detail::apply_strict(state, ov.strict, meta);

  std::vector<std::string> artifacts;
  {
    RealField2D phase(mask.grid);
    phase.v = mask.phase;
    dump_field(phase, out.directory / "pump_mask.bpr1");
    artifacts.push_back("pump_mask.bpr1");
  }
  save_state(state, out.directory, meta);
  artifacts.push_back("state_sum.bpf1");
  artifacts.push_back("state_diff.bpf1");
  artifacts.push_back("state.json");

  detail::emit_observables(state, observables, imaging, out, echo, artifacts);
  if (meas) detail::emit_measurement(state, *meas, out, echo, artifacts);
  detail::write_meta("simulate", out, std::move(meta), echo, artifacts);
  detail::write_run_log(out, t0);
}

/// Shared driver for project (observables of a saved state) and rowmap (the
/// row-correlation shortcut).
inline void run_project_like(const std::string& command,
                             const std::filesystem::path& config_path,
                             const CliOverrides& ov) {
  const auto t0 = std::chrono::steady_clock::now();
  const cfg::json j = cfg::parse_config_file(config_path);
  const bool rowmap_only = command == "rowmap";
  if (rowmap_only)
    cfg::check_keys(j, "", {"schema_version", "state", "imaging", "output"});
  else
    cfg::check_keys(j, "", {"schema_version", "state", "imaging", "observables", "output"});

  cfg::json echo;
  echo["schema_version"] = schema_version;
  const std::string state_file = cfg::str(j, "", "state");
  echo["state"] = state_file;

  cfg::json imaging_echo;
  const ImagingConfig imaging =
      cfg::parse_imaging(cfg::opt(j, "imaging"), "imaging", imaging_echo);
  echo["imaging"] = imaging_echo;

  std::vector<std::string> observables;
  if (rowmap_only)
    observables = {"row_map"};
  else
    observables = cfg::parse_observables(cfg::req(j, "", "observables"), "observables");
  echo["observables"] = observables;

  cfg::json out_echo;
  const OutputConfig out =
      cfg::parse_output(cfg::req_obj(j, "", "output"), "output", ov, out_echo);
  echo["output"] = out_echo;

  const TwoPhotonState state = load_state(config_path.parent_path() / state_file);
  std::filesystem::create_directories(out.directory);

  cfg::json meta;
  detail::apply_strict(state, ov.strict, meta);

  std::vector<std::string> artifacts;
  detail::emit_observables(state, observables, imaging, out, echo, artifacts);
  detail::write_meta(command, out, std::move(meta), echo, artifacts);
  detail::write_run_log(out, t0);
}

inline void run_sample(const std::filesystem::path& config_path, const CliOverrides& ov) {
  const auto t0 = std::chrono::steady_clock::now();
  const cfg::json j = cfg::parse_config_file(config_path);
  cfg::check_keys(j, "", {"schema_version", "state", "measurement", "output"});

  cfg::json echo;
  echo["schema_version"] = schema_version;
  const std::string state_file = cfg::str(j, "", "state");
  echo["state"] = state_file;

  cfg::json meas_echo;
  const MeasurementConfig meas =
      cfg::parse_measurement(cfg::req_obj(j, "", "measurement"), "measurement", ov, meas_echo);
  echo["measurement"] = meas_echo;

  cfg::json out_echo;
  const OutputConfig out =
      cfg::parse_output(cfg::req_obj(j, "", "output"), "output", ov, out_echo);
  echo["output"] = out_echo;

  const TwoPhotonState state = load_state(config_path.parent_path() / state_file);
  std::filesystem::create_directories(out.directory);

  cfg::json meta;
  detail::apply_strict(state, ov.strict, meta);

  std::vector<std::string> artifacts;
  detail::emit_measurement(state, meas, out, echo, artifacts);
  detail::write_meta("sample", out, std::move(meta), echo, artifacts);
  detail::write_run_log(out, t0);
}

inline void run_tailor(const std::filesystem::path& config_path, const CliOverrides& ov) {
  const auto t0 = std::chrono::steady_clock::now();
  const cfg::json j = cfg::parse_config_file(config_path);
  cfg::check_keys(j, "",
                  {"schema_version", "grid", "pump", "target", "iterations", "seed",
                   "output"});

  cfg::json echo;
  echo["schema_version"] = schema_version;
  const Grid2D grid = cfg::parse_grid(cfg::req_obj(j, "", "grid"), "grid");
  echo["grid"] = {{"n", grid.n}, {"extent", grid.extent()}};

  const cfg::json& jp = cfg::req_obj(j, "", "pump");
  cfg::check_keys(jp, "pump", {"waist", "wavelength"});
  cfg::json pump_echo;
  const PumpSpec pump = cfg::parse_pump(jp, "pump", grid, pump_echo);
  echo["pump"] = pump_echo;

  const Grid2D kg = conjugate_grid(grid);
  const cfg::json& jt = cfg::req_obj(j, "", "target");
  cfg::json target_echo;
  RealField2D target(kg);
  const std::string tkind = cfg::str(jt, "target", "kind");
  target_echo["kind"] = tkind;
  if (tkind == "ring") {
    cfg::check_keys(jt, "target", {"kind", "k_r", "width"});
    const double k_r = cfg::num(jt, "target", "k_r");
    const double width = cfg::num(jt, "target", "width");
    if (!(k_r > 0) || !(width > 0))
      throw config_error("\"target\": k_r and width must be > 0");
    target_echo["k_r"] = k_r;
    target_echo["width"] = width;
    for (int r = 0; r < kg.n; ++r)
      for (int c = 0; c < kg.n; ++c) {
        const double q = std::hypot(kg.coord(c), kg.coord(r));
        const double d = (q - k_r) / width;
        target.at(r, c) = std::exp(-2.0 * d * d);
      }
  } else if (tkind == "file") {
    cfg::check_keys(jt, "target", {"kind", "path"});
    const std::string file = cfg::str(jt, "target", "path");
    target_echo["path"] = file;
    target = load_real_field(config_path.parent_path() / file, &kg);
    target.grid = kg;
  } else {
    throw config_error("\"target.kind\" must be \"ring\" or \"file\"");
  }
  echo["target"] = target_echo;

  const std::int64_t iterations = cfg::integer_or(j, "", "iterations", 400);
  if (iterations < 1 || iterations > 100000)
    throw config_error("\"iterations\" must be in [1, 100000]");
  echo["iterations"] = iterations;
  const std::int64_t seed_raw = cfg::integer_or(j, "", "seed", 0);
  if (seed_raw < 0) throw config_error("\"seed\" must be >= 0");
  const std::uint64_t seed = ov.seed ? *ov.seed : std::uint64_t(seed_raw);
  echo["seed"] = seed;

  cfg::json out_echo;
  const OutputConfig out =
      cfg::parse_output(cfg::req_obj(j, "", "output"), "output", ov, out_echo);
  echo["output"] = out_echo;

  std::filesystem::create_directories(out.directory);
  const TailorResult result = tailor_pump(target, pump, int(iterations), seed);

  std::vector<std::string> artifacts;
  if (out.binary) {
    RealField2D phase(result.mask.grid);
    phase.v = result.mask.phase;
    dump_field(phase, out.directory / "tailored_mask.bpr1");
    dump_field(result.spectrum, out.directory / "tailored_spectrum.bpf1");
    artifacts.push_back("tailored_mask.bpr1");
    artifacts.push_back("tailored_spectrum.bpf1");
  }
  if (out.pgm) {
    render_preview(squared_modulus(result.spectrum),
                   out.directory / "tailored_spectrum.pgm", PreviewScale::Linear);
    artifacts.push_back("tailored_spectrum.pgm");
  }
  if (out.csv) {
    std::string hist = "iteration,residual\n";
    char line[64];
    for (std::size_t i = 0; i < result.history.size(); ++i) {
      std::snprintf(line, sizeof line, "%zu,%.17g\n", i, result.history[i]);
      hist += line;
    }
    write_file_atomic(out.directory / "tailor_history.csv", hist);
    artifacts.push_back("tailor_history.csv");
  }
  cfg::json side;
  side["schema_version"] = schema_version;
  side["library"] = std::string(library_version);
  side["artifact"] = {{"content", "tailor"},
                      {"residual", result.residual},
                      {"iterations", iterations}};
  side["config"] = echo;
  write_file_atomic(out.directory / "tailor.json", side.dump(2) + "\n");
  artifacts.push_back("tailor.json");

  cfg::json meta;
  meta["residual"] = result.residual;
  detail::write_meta("tailor", out, std::move(meta), echo, artifacts);
  detail::write_run_log(out, t0);
}

inline void run_preview(const std::filesystem::path& config_path, const CliOverrides& ov) {
  const cfg::json j = cfg::parse_config_file(config_path);
  cfg::check_keys(j, "", {"schema_version", "input", "scale", "output"});
  const std::string input = cfg::str(j, "", "input");
  const std::string scale_name = cfg::str_or(j, "", "scale", "linear");
  PreviewScale scale;
  if (scale_name == "linear")
    scale = PreviewScale::Linear;
  else if (scale_name == "log")
    scale = PreviewScale::Log;
  else
    throw config_error("\"scale\" must be \"linear\" or \"log\"");

  cfg::json echo;
  echo["schema_version"] = schema_version;
  echo["input"] = input;
  echo["scale"] = scale_name;
  cfg::json out_echo;
  const OutputConfig out =
      cfg::parse_output(cfg::req_obj(j, "", "output"), "output", ov, out_echo);
  echo["output"] = out_echo;

  const RealField2D map = load_real_field(config_path.parent_path() / input);
  std::filesystem::create_directories(out.directory);
  const std::string stem = std::filesystem::path(input).stem().string();
  const std::string name = stem + (scale == PreviewScale::Log ? "_log.pgm" : ".pgm");
  render_preview(map, out.directory / name, scale);

  std::vector<std::string> artifacts{name};
  cfg::json meta;
  detail::write_meta("preview", out, std::move(meta), echo, artifacts);
}

/// Dispatch a subcommand and translate failures into the documented exit
/// codes: 0 success, 2 config/schema, 3 numerical precondition, 4 file I/O.
inline int run_command(const std::string& command,
                       const std::filesystem::path& config_path, const CliOverrides& ov,
                       std::ostream& err) {
  try {
    if (command == "simulate")
      run_simulate(config_path, ov);
    else if (command == "project" || command == "rowmap")
      run_project_like(command, config_path, ov);
    else if (command == "sample")
      run_sample(config_path, ov);
    else if (command == "tailor")
      run_tailor(config_path, ov);
    else if (command == "preview")
      run_preview(config_path, ov);
    else {
      err << "unknown command: " << command << "\n";
      return 2;
    }
    return 0;
  } catch (const config_error& e) {
    err << "config error: " << e.what() << "\n";
    return 2;
  } catch (const io_error& e) {
    err << "io error: " << e.what() << "\n";
    return 4;
  } catch (const std::invalid_argument& e) {
    err << "precondition violated: " << e.what() << "\n";
    return 3;
  } catch (const std::domain_error& e) {
    err << "precondition violated: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace spdcsim
