// Copyright (c) 2026 spdcsim contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "spdcsim/core.hpp"
#include "spdcsim/field.hpp"
#include "spdcsim/grid.hpp"
#include "spdcsim/measurement.hpp"

namespace spdcsim {

static_assert(std::numeric_limits<double>::is_iec559, "IEEE-754 doubles required");

/// Failure to read, parse, or write an artifact file.
class io_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

// All on-disk integers and doubles are little-endian regardless of host order.
inline void put_u32(std::string& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(char((v >> (8 * i)) & 0xFF));
}

inline void put_f64(std::string& buf, double x) {
  const std::uint64_t v = std::bit_cast<std::uint64_t>(x);
  for (int i = 0; i < 8; ++i) buf.push_back(char((v >> (8 * i)) & 0xFF));
}

/// Bounds-checked cursor over a loaded byte buffer.
struct ByteReader {
  const std::string& buf;
  std::size_t pos = 0;
  std::string name;

  void need(std::size_t k) const {
    if (pos + k > buf.size()) throw io_error(name + ": truncated file");
  }
  void expect_magic(std::string_view magic) {
    need(magic.size());
    if (std::string_view(buf).substr(pos, magic.size()) != magic)
      throw io_error(name + ": bad magic, expected " + std::string(magic));
    pos += magic.size();
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(std::uint8_t(buf[pos + i])) << (8 * i);
    pos += 4;
    return v;
  }
  double f64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(std::uint8_t(buf[pos + i])) << (8 * i);
    pos += 8;
    return std::bit_cast<double>(v);
  }
  void done() const {
    if (pos != buf.size()) throw io_error(name + ": trailing bytes after payload");
  }
};

/// In-memory fields are even square lattices; reject files that aren't.
inline Grid2D grid_for_loaded(std::uint32_t rows, std::uint32_t cols, const Grid2D* hint,
                              const std::string& name) {
  if (rows != cols || rows < 2 || rows % 2 != 0 || rows > 1u << 20)
    throw io_error(name + ": field must be square with even size >= 2");
  if (hint) {
    if (hint->n != int(rows))
      throw io_error(name + ": size " + std::to_string(rows) +
                     " does not match the expected lattice of " + std::to_string(hint->n));
    return *hint;
  }
  return Grid2D{int(rows), 1.0, Domain::Position};
}

}  // namespace detail

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open for reading: " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw io_error("read failed: " + path.string());
  return bytes;
}

/// Write via a sibling temp file and rename, so a crash never leaves a
/// half-written artifact under the final name. Single-process use: the temp
/// name is derived from the target, not randomized.
inline void write_file_atomic(const std::filesystem::path& path, std::string_view bytes) {
  namespace fs = std::filesystem;
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw io_error("cannot open for writing: " + tmp.string());
    out.write(bytes.data(), std::streamsize(bytes.size()));
    out.flush();
    if (!out) {
      std::error_code ec;
      fs::remove(tmp, ec);
      throw io_error("write failed: " + tmp.string());
    }
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    std::error_code ec2;
    fs::remove(tmp, ec2);
    throw io_error("rename failed: " + path.string() + ": " + ec.message());
  }
}

// ---------------------------------------------------------------------------
// Binary array formats: header then payload, little-endian throughout.
//   complex field: "BPF1", u32 rows, u32 cols, row-major (re, im) f64 pairs
//   real field:    "BPR1", u32 rows, u32 cols, row-major f64
//   frame stack:   "BPB1", u32 frames, u32 rows, u32 cols, packed frame rows
// Frame rows are padded to whole bytes; bit k of row byte j is column 8j + k.

inline void dump_field(const ComplexField2D& f, const std::filesystem::path& path) {
  std::string buf;
  buf.reserve(12 + f.v.size() * 16);
  buf += format_complex_field;
  detail::put_u32(buf, std::uint32_t(f.grid.n));
  detail::put_u32(buf, std::uint32_t(f.grid.n));
  for (const auto& z : f.v) {
    detail::put_f64(buf, z.real());
    detail::put_f64(buf, z.imag());
  }
  write_file_atomic(path, buf);
}

inline void dump_field(const RealField2D& f, const std::filesystem::path& path) {
  std::string buf;
  buf.reserve(12 + f.v.size() * 8);
  buf += format_real_field;
  detail::put_u32(buf, std::uint32_t(f.grid.n));
  detail::put_u32(buf, std::uint32_t(f.grid.n));
  for (double x : f.v) detail::put_f64(buf, x);
  write_file_atomic(path, buf);
}

/// Square matrix given as a flat row-major vector (correlation maps,
/// estimates); written in the real-field format.
inline void dump_matrix(const std::vector<double>& v, int n,
                        const std::filesystem::path& path) {
  if (n < 2 || v.size() != std::size_t(n) * std::size_t(n))
    throw std::invalid_argument("dump_matrix: vector does not fill an n x n matrix");
  std::string buf;
  buf.reserve(12 + v.size() * 8);
  buf += format_real_field;
  detail::put_u32(buf, std::uint32_t(n));
  detail::put_u32(buf, std::uint32_t(n));
  for (double x : v) detail::put_f64(buf, x);
  write_file_atomic(path, buf);
}

/// The binary header carries only the array shape; pass `grid` to restore
/// lattice metadata recorded in a sidecar. Without it the field comes back on
/// a unit-pitch position lattice.
inline ComplexField2D load_complex_field(const std::filesystem::path& path,
                                         const Grid2D* grid = nullptr) {
  const std::string bytes = read_file(path);
  detail::ByteReader r{bytes, 0, path.string()};
  r.expect_magic(format_complex_field);
  const std::uint32_t rows = r.u32(), cols = r.u32();
  ComplexField2D f(detail::grid_for_loaded(rows, cols, grid, path.string()));
  for (auto& z : f.v) {
    const double re = r.f64(), im = r.f64();
    z = {re, im};
  }
  r.done();
  return f;
}

inline RealField2D load_real_field(const std::filesystem::path& path,
                                   const Grid2D* grid = nullptr) {
  const std::string bytes = read_file(path);
  detail::ByteReader r{bytes, 0, path.string()};
  r.expect_magic(format_real_field);
  const std::uint32_t rows = r.u32(), cols = r.u32();
  RealField2D f(detail::grid_for_loaded(rows, cols, grid, path.string()));
  for (double& x : f.v) x = r.f64();
  r.done();
  return f;
}

inline void dump_frames(const FrameStack& st, const std::filesystem::path& path) {
  if (st.frames > 0xFFFFFFFFull) throw io_error("dump_frames: frame count exceeds format");
  std::string buf;
  buf.reserve(16 + st.bits.size());
  buf += format_frame_stack;
  detail::put_u32(buf, std::uint32_t(st.frames));
  detail::put_u32(buf, std::uint32_t(st.grid.n));
  detail::put_u32(buf, std::uint32_t(st.grid.n));
  buf.append(reinterpret_cast<const char*>(st.bits.data()), st.bits.size());
  write_file_atomic(path, buf);
}

inline FrameStack load_frames(const std::filesystem::path& path,
                              const Grid2D* grid = nullptr) {
  const std::string bytes = read_file(path);
  detail::ByteReader r{bytes, 0, path.string()};
  r.expect_magic(format_frame_stack);
  const std::uint32_t frames = r.u32();
  const std::uint32_t rows = r.u32(), cols = r.u32();
  FrameStack st =
      FrameStack::create(detail::grid_for_loaded(rows, cols, grid, path.string()), frames);
  r.need(st.bits.size());
  std::copy(bytes.begin() + std::ptrdiff_t(r.pos), bytes.end(), st.bits.begin());
  r.pos += st.bits.size();
  r.done();
  return st;
}

// ---------------------------------------------------------------------------
// Previews and text exports

enum class PreviewScale { Linear, Log };

/// 8-bit grayscale P5 bytes of a non-negative map. Linear stretches min..max
/// to 0..255; Log stretches log(value) with values floored at 1e-6 of the
/// maximum, exposing weak sidelobe structure. An all-zero map renders black
/// and warns on the diagnostic stream.
inline std::string render_pgm(const RealField2D& f, PreviewScale scale) {
  const int n = f.grid.n;
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (double x : f.v) {
    if (!(x >= 0) || !std::isfinite(x))
      throw std::invalid_argument("render_pgm: map must be non-negative and finite");
    lo = std::min(lo, x);
    hi = std::max(hi, x);
  }

  std::string out = "P5\n" + std::to_string(n) + " " + std::to_string(n) + "\n255\n";
  out.reserve(out.size() + f.v.size());
  if (!(hi > 0)) {
    std::cerr << "render_pgm: all-zero map, emitting a black image\n";
    out.append(f.v.size(), '\0');
    return out;
  }
  if (lo == hi) {  // constant positive map: full scale, not black
    out.append(f.v.size(), char(std::uint8_t(255)));
    return out;
  }

  auto emit = [&](auto value_of, double vlo, double vhi) {
    const double span = vhi - vlo;
    for (double x : f.v) {
      const double t = span > 0 ? (value_of(x) - vlo) / span : 0.0;
      out.push_back(char(std::uint8_t(std::lround(255.0 * t))));
    }
  };
  if (scale == PreviewScale::Linear) {
    emit([](double x) { return x; }, lo, hi);
  } else {
    const double floor_v = 1e-6 * hi;
    auto logv = [floor_v](double x) { return std::log(std::max(x, floor_v)); };
    emit(logv, logv(lo), logv(hi));
  }
  return out;
}

inline void render_preview(const RealField2D& f, const std::filesystem::path& path,
                           PreviewScale scale) {
  write_file_atomic(path, render_pgm(f, scale));
}

/// Radial profile rows as text: header line, then one "radius,value" pair per
/// ring with full double round-trip precision.
inline std::string radial_csv(const std::vector<std::pair<double, double>>& profile) {
  std::string out = "radius,value\n";
  char line[64];
  for (const auto& [r, v] : profile) {
    std::snprintf(line, sizeof line, "%.17g,%.17g\n", r, v);
    out += line;
  }
  return out;
}

inline void write_radial_csv(const std::vector<std::pair<double, double>>& profile,
                             const std::filesystem::path& path) {
  write_file_atomic(path, radial_csv(profile));
}

}  // namespace spdcsim
