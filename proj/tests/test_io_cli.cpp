// Copyright (c) 2026 spdcsim contributors
// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include <spdcsim/scenario.hpp>
#include <spdcsim/spdcsim.hpp>

using namespace spdcsim;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& tag) {
  const fs::path p = fs::temp_directory_path() / ("spdcsim_io_" + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << text;
  REQUIRE(out.good());
}

ComplexField2D scrambled_complex(const Grid2D& g, std::uint64_t seed) {
  const CounterRng rng{seed};
  ComplexField2D f(g);
  for (std::size_t i = 0; i < f.v.size(); ++i)
    f.v[i] = {2.0 * rng.uniform(Stream::MaskPhase, 2 * i) - 1.0,
              2.0 * rng.uniform(Stream::MaskPhase, 2 * i + 1) - 1.0};
  return f;
}

/// A small physical momentum-space state for archive round trips.
TwoPhotonState archive_state() {
  const Grid2D pos = make_grid(16, 4.0e-4, Domain::Position);
  const PumpSpec pump{pos, 1.0e-4, 405e-9};
  CrystalSpec crystal;
  return build_state(shaped_pump_spectrum(pump, flat_mask(pos)), crystal);
}

const char* kSimConfigBody = R"({
  "schema_version": 1,
  "grid": {"n": 16, "extent": 4.0e-4},
  "pump": {"waist": 1.0e-4, "mask": {"kind": "flat"}},
  "crystal": {"length": 2.0e-3},
  "observables": ["sum_projection", "row_map"],
  "measurement": {"frames": 64, "mean_pairs": 2.0, "seed": 5},
)";

std::string sim_config(const fs::path& out_dir) {
  return std::string(kSimConfigBody) + "  \"output\": {\"directory\": \"" +
         out_dir.string() + "\"}\n}\n";
}

}  // namespace

TEST_CASE("complex and real fields round trip bitwise") {
  const fs::path dir = fresh_dir("fields");
  const Grid2D g = make_grid(8, 3.0e-4, Domain::Momentum);

  ComplexField2D f = scrambled_complex(g, 11);
  f.v[3] = {-0.0, 5e-324};     // signed zero and a denormal must survive
  f.v[9] = {1e308, -2.5e-17};
  dump_field(f, dir / "c.bpf1");
  const ComplexField2D back = load_complex_field(dir / "c.bpf1", &g);
  REQUIRE(back.grid == g);
  for (std::size_t i = 0; i < f.v.size(); ++i) {
    REQUIRE(std::bit_cast<std::uint64_t>(back.v[i].real()) ==
            std::bit_cast<std::uint64_t>(f.v[i].real()));
    REQUIRE(std::bit_cast<std::uint64_t>(back.v[i].imag()) ==
            std::bit_cast<std::uint64_t>(f.v[i].imag()));
  }

  RealField2D r(g);
  for (std::size_t i = 0; i < r.v.size(); ++i) r.v[i] = std::sin(double(i)) * 1e-5;
  dump_field(r, dir / "r.bpr1");
  const RealField2D rback = load_real_field(dir / "r.bpr1", &g);
  REQUIRE(rback.v == r.v);

  // without a lattice hint the values still load, on a unit-pitch grid
  const RealField2D plain = load_real_field(dir / "r.bpr1");
  CHECK(plain.grid.pitch == 1.0);
  CHECK(plain.v == r.v);

  fs::remove_all(dir);
}

TEST_CASE("field loading rejects malformed files") {
  const fs::path dir = fresh_dir("malformed");
  const Grid2D g = make_grid(4, 4.0, Domain::Position);
  RealField2D r(g, 1.0);
  dump_field(r, dir / "ok.bpr1");

  std::string bytes = read_file(dir / "ok.bpr1");

  std::string bad_magic = bytes;
  bad_magic[0] = 'X';
  write_text(dir / "bad_magic.bpr1", bad_magic);
  CHECK_THROWS_AS(load_real_field(dir / "bad_magic.bpr1"), io_error);

  write_text(dir / "trunc.bpr1", bytes.substr(0, bytes.size() - 3));
  CHECK_THROWS_AS(load_real_field(dir / "trunc.bpr1"), io_error);

  write_text(dir / "trail.bpr1", bytes + "zz");
  CHECK_THROWS_AS(load_real_field(dir / "trail.bpr1"), io_error);

  CHECK_THROWS_AS(load_real_field(dir / "missing.bpr1"), io_error);
  CHECK_THROWS_AS(load_complex_field(dir / "ok.bpr1"), io_error);  // wrong magic family

  const Grid2D other = make_grid(8, 4.0, Domain::Position);
  CHECK_THROWS_AS(load_real_field(dir / "ok.bpr1", &other), io_error);

  fs::remove_all(dir);
}

TEST_CASE("frame stacks round trip and match the documented bit layout") {
  const fs::path dir = fresh_dir("frames");
  const Grid2D g = make_grid(12, 12.0, Domain::Position);
  FrameStack st = FrameStack::create(g, 3);
  st.set(0, 0, 0);
  st.set(0, 0, 9);   // second row byte, bit 1
  st.set(1, 5, 3);
  st.set(2, 11, 11);
  dump_frames(st, dir / "f.bpb1");

  const std::string bytes = read_file(dir / "f.bpb1");
  REQUIRE(bytes.size() == 16 + st.bits.size());
  REQUIRE(bytes.substr(0, 4) == "BPB1");
  // u32 little-endian: frames=3, rows=12, cols=12
  CHECK(std::uint8_t(bytes[4]) == 3);
  CHECK(std::uint8_t(bytes[8]) == 12);
  CHECK(std::uint8_t(bytes[12]) == 12);
  // frame 0, row 0: bit 0 of byte 0, bit 1 of byte 1 (column 9 = 8*1 + 1)
  CHECK(std::uint8_t(bytes[16]) == 0x01);
  CHECK(std::uint8_t(bytes[17]) == 0x02);

  const FrameStack back = load_frames(dir / "f.bpb1", &g);
  REQUIRE(back.frames == 3);
  REQUIRE(back.bits == st.bits);

  write_text(dir / "short.bpb1", bytes.substr(0, bytes.size() - 1));
  CHECK_THROWS_AS(load_frames(dir / "short.bpb1"), io_error);

  fs::remove_all(dir);
}

TEST_CASE("atomic writes leave no temp files and matrices validate shape") {
  const fs::path dir = fresh_dir("atomic");
  write_file_atomic(dir / "a.bin", "payload");
  CHECK(read_file(dir / "a.bin") == "payload");
  write_file_atomic(dir / "a.bin", "replaced");
  CHECK(read_file(dir / "a.bin") == "replaced");
  std::size_t entries = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(dir)) ++entries;
  CHECK(entries == 1);  // no .tmp residue

  CHECK_THROWS_AS(dump_matrix(std::vector<double>(10, 0.0), 4, dir / "m.bpr1"),
                  std::invalid_argument);
  dump_matrix(std::vector<double>(16, 2.5), 4, dir / "m.bpr1");
  CHECK(load_real_field(dir / "m.bpr1").v == std::vector<double>(16, 2.5));

  fs::remove_all(dir);
}

TEST_CASE("previews follow the grayscale scaling rules") {
  const Grid2D g = make_grid(4, 4.0, Domain::Position);

  RealField2D ramp(g);
  for (int i = 0; i < 16; ++i) ramp.v[std::size_t(i)] = double(i);
  const std::string pgm = render_pgm(ramp, PreviewScale::Linear);
  REQUIRE(pgm.substr(0, 11) == "P5\n4 4\n255\n");
  REQUIRE(pgm.size() == 11 + 16);
  CHECK(std::uint8_t(pgm[11]) == 0);
  CHECK(std::uint8_t(pgm[11 + 15]) == 255);
  CHECK(std::uint8_t(pgm[11 + 8]) == std::uint8_t(std::lround(255.0 * 8 / 15)));

  RealField2D flat(g, 3.0);
  const std::string gray = render_pgm(flat, PreviewScale::Linear);
  for (std::size_t i = 11; i < gray.size(); ++i) REQUIRE(std::uint8_t(gray[i]) == 255);

  RealField2D zero(g, 0.0);
  const std::string black = render_pgm(zero, PreviewScale::Log);
  for (std::size_t i = 11; i < black.size(); ++i) REQUIRE(std::uint8_t(black[i]) == 0);

  RealField2D spike(g, 0.0);
  spike.at(0, 0) = 1.0;
  spike.at(1, 1) = 1e-5;  // below half of linear quantization, above log floor
  spike.at(2, 2) = 1e-8;  // below the 1e-6 log floor
  const std::string lin = render_pgm(spike, PreviewScale::Linear);
  const std::string lg = render_pgm(spike, PreviewScale::Log);
  CHECK(std::uint8_t(lin[11 + 5]) == 0);     // invisible on the linear stretch
  CHECK(std::uint8_t(lg[11 + 5]) > 40);      // clearly visible on the log stretch
  CHECK(std::uint8_t(lg[11 + 10]) == 0);     // floored with the background
  CHECK(std::uint8_t(lg[11]) == 255);

  RealField2D neg(g, -1.0);
  CHECK_THROWS_AS(render_pgm(neg, PreviewScale::Linear), std::invalid_argument);
}

TEST_CASE("radial csv text round trips at full precision") {
  const std::vector<std::pair<double, double>> prof = {
      {0.0, 1.0}, {1.5e-5, 0.123456789012345678}, {3.0e-5, 4.9406564584124654e-324}};
  const std::string csv = radial_csv(prof);
  REQUIRE(csv.rfind("radius,value\n", 0) == 0);

  std::size_t pos = csv.find('\n') + 1;
  for (const auto& [r, v] : prof) {
    const std::size_t comma = csv.find(',', pos), end = csv.find('\n', pos);
    REQUIRE(comma < end);
    CHECK(std::strtod(csv.c_str() + pos, nullptr) == r);
    CHECK(std::strtod(csv.c_str() + comma + 1, nullptr) == v);
    pos = end + 1;
  }
  CHECK(pos == csv.size());
}

TEST_CASE("state archive restores the factorization exactly") {
  const fs::path dir = fresh_dir("state");
  const TwoPhotonState s = archive_state();
  cfg::json meta;
  save_state(s, dir, meta);

  const TwoPhotonState back = load_state(dir / "state.json");
  REQUIRE(back.sum_factor.grid == s.sum_factor.grid);
  REQUIRE(back.sum_factor.v == s.sum_factor.v);
  REQUIRE(back.diff_factor.v == s.diff_factor.v);
  CHECK(back.norm_constant == s.norm_constant);
  CHECK(back.crystal.length == s.crystal.length);
  CHECK(back.crystal.pump_wavelength == s.crystal.pump_wavelength);
  CHECK(back.crystal.model == s.crystal.model);
  CHECK(back.rep == StateRep::Momentum);
  CHECK(back.arg_stride == 1);

  // same observables from the restored state
  const RealField2D a = sum_projection(s), b = sum_projection(back);
  REQUIRE(a.v == b.v);

  write_text(dir / "not_state.json", "{\"x\": 1}");
  CHECK_THROWS_AS(load_state(dir / "not_state.json"), io_error);

  fs::remove_all(dir);
}

TEST_CASE("simulate driver writes a complete, reproducible artifact set") {
  const fs::path dir = fresh_dir("simulate");
  const fs::path out1 = dir / "out1", out2 = dir / "out2";
  write_text(dir / "a.json", sim_config(out1));
  write_text(dir / "b.json", sim_config(out1));  // identical config, second run

  run_simulate(dir / "a.json", {});
  REQUIRE(fs::exists(out1 / "meta.json"));
  REQUIRE(fs::exists(out1 / "state.json"));
  REQUIRE(fs::exists(out1 / "row_map.bpr1"));
  REQUIRE(fs::exists(out1 / "frames.bpb1"));
  REQUIRE(fs::exists(out1 / "estimate_value.bpr1"));
  REQUIRE(fs::exists(out1 / "run_log.json"));

  // meta's artifact list matches the directory (run_log is logged time, not
  // a reproducible artifact, and tracks itself)
  const cfg::json meta = cfg::json::parse(read_file(out1 / "meta.json"));
  std::size_t listed = meta.at("artifacts").size();
  std::size_t present = 0;
  for (const auto& e : fs::directory_iterator(out1))
    if (e.path().filename() != "run_log.json") ++present;
  CHECK(listed == present);
  CHECK(meta.at("kernel_check").at("observable").get<bool>());

  // byte-identical rerun, run_log excluded
  std::vector<std::string> names;
  for (const auto& e : fs::directory_iterator(out1)) names.push_back(e.path().filename());
  std::map<std::string, std::string> first;
  for (const std::string& n : names) first[n] = read_file(out1 / n);

  fs::rename(out1, out2);
  run_simulate(dir / "b.json", {});
  for (const std::string& n : names) {
    if (n == "run_log.json") continue;
    INFO(n);
    REQUIRE(read_file(out1 / n) == first[n]);
  }

  fs::remove_all(dir);
}

TEST_CASE("project and sample drivers consume a saved state") {
  const fs::path dir = fresh_dir("project");
  const fs::path sim_out = dir / "sim";
  write_text(dir / "sim.json", sim_config(sim_out));
  run_simulate(dir / "sim.json", {});

  write_text(dir / "proj.json",
             "{\"schema_version\": 1, \"state\": \"sim/state.json\",\n"
             " \"observables\": [\"minus_projection\"],\n"
             " \"output\": {\"directory\": \"" + (dir / "p_out").string() + "\"}}\n");
  run_project_like("project", dir / "proj.json", {});
  const RealField2D minus = load_real_field(dir / "p_out" / "minus_projection.bpr1");
  const TwoPhotonState s = load_state(sim_out / "state.json");
  // far-field camera mapping relabels the lattice, values unchanged
  REQUIRE(minus.v == minus_projection(s).v);

  write_text(dir / "rm.json",
             "{\"schema_version\": 1, \"state\": \"sim/state.json\",\n"
             " \"output\": {\"directory\": \"" + (dir / "rm_out").string() + "\"}}\n");
  run_project_like("rowmap", dir / "rm.json", {});
  const cfg::json side = cfg::json::parse(read_file(dir / "rm_out" / "row_map.json"));
  REQUIRE(side.at("details").at("ridges").size() == 1);
  CHECK(std::abs(side.at("details").at("ridges")[0].at("offset_bins").get<double>()) <
        1.0);

  write_text(dir / "sample.json",
             "{\"schema_version\": 1, \"state\": \"sim/state.json\",\n"
             " \"measurement\": {\"frames\": 32, \"mean_pairs\": 1.0, \"seed\": 3},\n"
             " \"output\": {\"directory\": \"" + (dir / "s_out").string() + "\"}}\n");
  run_sample(dir / "sample.json", {});
  const FrameStack st = load_frames(dir / "s_out" / "frames.bpb1");
  CHECK(st.frames == 32);
  // the archived frames equal a direct render with the same seed
  const FrameStack direct = render_frames(s, CameraSpec{}, 32, 1.0, 3);
  CHECK(st.bits == direct.bits);

  fs::remove_all(dir);
}

TEST_CASE("config schema violations are rejected before computation") {
  const fs::path dir = fresh_dir("schema");
  const auto expect_config_error = [&](const std::string& name, const std::string& body) {
    write_text(dir / name, body);
    CHECK_THROWS_AS(run_simulate(dir / name, {}), config_error);
  };

  expect_config_error("v.json", "{\"schema_version\": 2}");
  expect_config_error("syntax.json", "{nope}");
  expect_config_error(
      "unknown.json",
      "{\"schema_version\": 1, \"grid\": {\"n\": 16, \"extent\": 1e-4, \"pitch\": 2},\n"
      " \"pump\": {\"waist\": 1e-4, \"mask\": {\"kind\": \"flat\"}},\n"
      " \"crystal\": {\"length\": 2e-3}, \"observables\": [\"intensity\"],\n"
      " \"output\": {\"directory\": \"x\"}}");
  expect_config_error(
      "empty_obs.json",
      "{\"schema_version\": 1, \"grid\": {\"n\": 16, \"extent\": 1e-4},\n"
      " \"pump\": {\"waist\": 1e-4, \"mask\": {\"kind\": \"flat\"}},\n"
      " \"crystal\": {\"length\": 2e-3}, \"observables\": [],\n"
      " \"output\": {\"directory\": \"x\"}}");
  expect_config_error(
      "bad_waist.json",
      "{\"schema_version\": 1, \"grid\": {\"n\": 16, \"extent\": 1e-4},\n"
      " \"pump\": {\"waist\": -1.0, \"mask\": {\"kind\": \"flat\"}},\n"
      " \"crystal\": {\"length\": 2e-3}, \"observables\": [\"intensity\"],\n"
      " \"output\": {\"directory\": \"x\"}}");

  // exit-code mapping of the dispatcher
  std::ostringstream err;
  CHECK(run_command("simulate", dir / "empty_obs.json", {}, err) == 2);
  CHECK(run_command("simulate", dir / "absent.json", {}, err) == 4);
  CHECK(run_command("bogus", dir / "empty_obs.json", {}, err) == 2);

  fs::remove_all(dir);
}

TEST_CASE("cli binary honors flags and exit codes") {
  const char* cli = std::getenv("SPDCSIM_CLI");
  if (!cli) SKIP("SPDCSIM_CLI not set; run under ctest");

  const fs::path dir = fresh_dir("cli");
  const fs::path out = dir / "out";
  write_text(dir / "sim.json", sim_config(out));

  const auto run = [&](const std::string& args) {
    const std::string cmd =
        std::string(cli) + " " + args + " > /dev/null 2> /dev/null";
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  };

  CHECK(run("simulate --config " + (dir / "sim.json").string()) == 0);
  REQUIRE(fs::exists(out / "meta.json"));

  // --out overrides the config's directory
  CHECK(run("simulate --config " + (dir / "sim.json").string() + " --out " +
            (dir / "other").string()) == 0);
  CHECK(fs::exists(dir / "other" / "meta.json"));

  // --seed changes the frames, not the state
  CHECK(run("simulate --config " + (dir / "sim.json").string() + " --out " +
            (dir / "seeded").string() + " --seed 99") == 0);
  CHECK(read_file(dir / "seeded" / "frames.bpb1") != read_file(out / "frames.bpb1"));
  CHECK(read_file(dir / "seeded" / "state_sum.bpf1") == read_file(out / "state_sum.bpf1"));

  write_text(dir / "bad.json", "{\"schema_version\": 1}");
  CHECK(run("simulate --config " + (dir / "bad.json").string()) == 2);
  CHECK(run("simulate --config " + (dir / "nope.json").string()) == 4);

  write_text(dir / "prev.json",
             "{\"schema_version\": 1, \"input\": \"out/sum_projection.bpr1\",\n"
             " \"scale\": \"log\", \"output\": {\"directory\": \"" +
                 (dir / "prev_out").string() + "\"}}\n");
  CHECK(run("preview --config " + (dir / "prev.json").string()) == 0);
  CHECK(fs::exists(dir / "prev_out" / "sum_projection_log.pgm"));

  fs::remove_all(dir);
}
