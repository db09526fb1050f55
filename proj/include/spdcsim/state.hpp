// Copyright (c) 2026 spdcsim contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

#include "crystal.hpp"
#include "fft.hpp"
#include "field.hpp"
#include "grid.hpp"
#include "pump.hpp"

namespace spdcsim {

enum class StateRep { Momentum, Position };

/// Separable two-photon transverse state.
///
/// Momentum representation: amplitude(q1, q2) =
///   norm_constant * sum_factor(q1 + q2) * diff_factor(q1 - q2),
/// with both factors sampled on one shared momentum lattice (arg_stride = 1):
/// photon coordinates and factor arguments use the same grid, and arguments
/// falling off the stored range contribute zero amplitude. The diff factor's
/// index-0 row and column (the mirror-less edge of an even centered lattice)
/// are zeroed so the amplitude is exactly exchange-symmetric.
///
/// Position representation (from near_field_state): amplitude(x1, x2) =
///   norm_constant * sum_factor((x1+x2)/2) * diff_factor((x1-x2)/2),
/// where the factors are stored on a twice-finer lattice (arg_stride = 2) so
/// every photon-lattice pair hits exact factor samples.
///
/// norm_constant fixes the photon-lattice sum of |amplitude|^2 * pitch^4 to
/// one. For arg_stride 1 this is exact: each parity-matched factor index pair
/// is realized by exactly one photon pair, so the norm reduces to per-parity-
/// class power sums. For arg_stride 2 the half-coordinate change of variables
/// gives 0.5/sqrt(power product), exact up to window-boundary clipping.
struct TwoPhotonState {
  ComplexField2D sum_factor;
  ComplexField2D diff_factor;
  CrystalSpec crystal;
  StateRep rep = StateRep::Momentum;
  int arg_stride = 1;
  double norm_constant = 0.;
};

/// Lattice of per-photon coordinates (pixels, sampling bins).
inline Grid2D photon_grid(const TwoPhotonState& s) {
  if (s.arg_stride == 1) return s.sum_factor.grid;
  const Grid2D& f = s.sum_factor.grid;
  return Grid2D{f.n / 2, 2.0 * f.pitch, f.domain};
}

/// Per-axis factor index for the sum argument; -1 when off the stored range.
inline int factor_sum_index(const TwoPhotonState& s, int i1, int i2) {
  const int nf = s.sum_factor.grid.n;
  const int np = photon_grid(s).n;
  const int idx = i1 + i2 - np + nf / 2;
  return (idx < 0 || idx >= nf) ? -1 : idx;
}

/// Per-axis factor index for the difference argument; -1 when off range.
inline int factor_diff_index(const TwoPhotonState& s, int i1, int i2) {
  const int nf = s.diff_factor.grid.n;
  const int idx = i1 - i2 + nf / 2;
  return (idx < 0 || idx >= nf) ? -1 : idx;
}

namespace detail {

inline double factor_power(const ComplexField2D& f) {  // sum |v|^2 pitch^2
  return l2_norm_sq(f);
}

/// Exact shared-lattice normalization: a sum bin pairs only with difference
/// bins of the same per-axis index parity, and every such in-range pair comes
/// from exactly one photon pair, so the 4D probability total is the product
/// of per-parity-class power sums.
inline double norm_constant_shared(const ComplexField2D& p, const ComplexField2D& c,
                                   const char* who) {
  const int n = p.grid.n;
  long double sp[2][2] = {}, sc[2][2] = {};
  for (int r = 0; r < n; ++r)
    for (int col = 0; col < n; ++col) {
      sp[r % 2][col % 2] += std::norm(p.at(r, col));
      sc[r % 2][col % 2] += std::norm(c.at(r, col));
    }
  long double tot = 0;
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) tot += sp[a][b] * sc[a][b];
  if (!(tot > 0) || !std::isfinite(double(tot)))
    throw std::domain_error(std::string(who) + ": factor power must be positive and finite");
  return 1.0 / (p.grid.pitch * p.grid.pitch * std::sqrt(double(tot)));
}

/// Half-coordinate normalization (position representation): the change of
/// variables to half-sum/half-difference carries a 1/4 area factor. Exact up
/// to mass clipped at the window boundary, negligible for resolved factors.
inline double norm_constant_half(double sp, double sc, const char* who) {
  if (!(sp > 0) || !(sc > 0) || !std::isfinite(sp) || !std::isfinite(sc))
    throw std::domain_error(std::string(who) + ": factor power must be positive and finite");
  return 0.5 / std::sqrt(sp * sc);
}

}  // namespace detail

/// Assemble the momentum-representation state for a pump angular spectrum and
/// a crystal. The spectrum is taken as given (normalization is absorbed into
/// norm_constant); the diff factor samples the crystal's transverse
/// phase-matching profile on the same lattice, edge row/column zeroed.
inline TwoPhotonState build_state(const ComplexField2D& spectrum, const CrystalSpec& crystal) {
  validate(spectrum.grid, "build_state");
  validate(crystal, "build_state");
  if (spectrum.grid.domain != Domain::Momentum)
    throw std::invalid_argument("build_state: spectrum must be momentum-domain");
  if (spectrum.v.size() != spectrum.grid.size())
    throw std::invalid_argument("build_state: spectrum storage does not match grid");
  for (const auto& z : spectrum.v)
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag()))
      throw std::invalid_argument("build_state: spectrum contains non-finite samples");

  TwoPhotonState s;
  s.sum_factor = spectrum;
  s.crystal = crystal;
  s.rep = StateRep::Momentum;
  s.arg_stride = 1;

  const Grid2D& g = spectrum.grid;
  s.diff_factor = ComplexField2D(g);
  for (int r = 0; r < g.n; ++r)
    for (int c = 0; c < g.n; ++c) {
      if (r == 0 || c == 0) continue;  // keep exchange symmetry exact
      s.diff_factor.at(r, c) = phase_matching(std::hypot(g.coord(c), g.coord(r)), crystal);
    }

  s.norm_constant = detail::norm_constant_shared(s.sum_factor, s.diff_factor, "build_state");
  return s;
}

/// Closed-form state for a zero-order ring beam under the Gaussian
/// phase-matching stand-in: both factors analytic, no transform involved.
inline TwoPhotonState analytic_ring_state(const Grid2D& momentum_grid,
                                          const CrystalSpec& crystal, double k_r,
                                          double waist) {
  CrystalSpec c = crystal;
  c.model = PhaseMatchModel::Gauss;
  return build_state(bessel_gauss_spectrum_analytic(momentum_grid, 0, k_r, waist), c);
}

namespace detail {

inline std::complex<double> bilinear(const ComplexField2D& f, double x, double y) {
  const Grid2D& g = f.grid;
  const double u = x / g.pitch + g.n / 2;
  const double w = y / g.pitch + g.n / 2;
  const double fu = std::floor(u), fw = std::floor(w);
  const int c0 = int(fu), r0 = int(fw);
  const double du = u - fu, dw = w - fw;
  auto sample = [&](int r, int cc) -> std::complex<double> {
    if (r < 0 || r >= g.n || cc < 0 || cc >= g.n) return {0.0, 0.0};
    return f.at(r, cc);
  };
  return sample(r0, c0) * ((1 - du) * (1 - dw)) + sample(r0, c0 + 1) * (du * (1 - dw)) +
         sample(r0 + 1, c0) * ((1 - du) * dw) + sample(r0 + 1, c0 + 1) * (du * dw);
}

}  // namespace detail

/// Two-photon amplitude at continuous per-photon coordinates (bilinear between
/// lattice samples, zero outside the stored factor range). Throws
/// std::out_of_range if either photon leaves the photon lattice.
inline std::complex<double> evaluate_amplitude(const TwoPhotonState& s, double a1x,
                                               double a1y, double a2x, double a2y) {
  const Grid2D pg = photon_grid(s);
  if (!pg.contains(a1x, a1y) || !pg.contains(a2x, a2y))
    throw std::out_of_range("evaluate_amplitude: photon coordinate outside the lattice");
  const double k = s.arg_stride == 1 ? 1.0 : 0.5;
  const std::complex<double> p =
      detail::bilinear(s.sum_factor, k * (a1x + a2x), k * (a1y + a2y));
  const std::complex<double> c =
      detail::bilinear(s.diff_factor, k * (a1x - a2x), k * (a1y - a2y));
  return s.norm_constant * p * c;
}

/// Position-representation counterpart of a momentum state: both factors are
/// zero-padded to twice the lattice and inverse-transformed, landing on a
/// half-pitch position lattice (arg_stride 2) so photon-pair sums and
/// differences stay on exact samples. norm_constant is recomputed for the
/// half-coordinate measure.
inline TwoPhotonState near_field_state(const TwoPhotonState& s) {
  if (s.rep != StateRep::Momentum || s.arg_stride != 1)
    throw std::invalid_argument("near_field_state: momentum-representation input required");
  const Grid2D& g = s.sum_factor.grid;
  const Grid2D wide{2 * g.n, g.pitch, Domain::Momentum};

  auto pad_and_invert = [&](const ComplexField2D& f) {
    ComplexField2D padded(wide);
    const int off = g.n / 2;  // original lattice sits centered in the wide one
    for (int r = 0; r < g.n; ++r)
      for (int c = 0; c < g.n; ++c) padded.at(r + off, c + off) = f.at(r, c);
    return dft2_centered(padded, FftDirection::Inverse);
  };

  TwoPhotonState out;
  out.sum_factor = pad_and_invert(s.sum_factor);
  out.diff_factor = pad_and_invert(s.diff_factor);
  out.crystal = s.crystal;
  out.rep = StateRep::Position;
  out.arg_stride = 2;
  out.norm_constant = detail::norm_constant_half(detail::factor_power(out.sum_factor),
                                                 detail::factor_power(out.diff_factor),
                                                 "near_field_state");
  return out;
}

/// Diagnostic for phase-matching support collapse on the sampling lattice.
///
/// On the shared lattice a sum bin can only pair with difference bins of the
/// same per-axis index parity. A sum bin is "dead" when every difference bin
/// in its parity class carries less than 1% of the diff factor's peak
/// modulus: pairs created there are invisible. dead_fraction weights dead
/// bins by the sum factor's power; the state is considered observable while
/// less than half the pump power sits on dead bins.
struct KernelCheckReport {
  double dead_fraction = 0.;
  bool observable = true;
};

inline KernelCheckReport kernel_check(const TwoPhotonState& s) {
  if (s.rep != StateRep::Momentum || s.arg_stride != 1)
    throw std::invalid_argument("kernel_check: momentum-representation input required");
  const Grid2D& g = s.diff_factor.grid;
  double classmax[2][2] = {{0, 0}, {0, 0}};
  double peak = 0;
  for (int r = 0; r < g.n; ++r)
    for (int c = 0; c < g.n; ++c) {
      const double a = std::abs(s.diff_factor.at(r, c));
      classmax[r % 2][c % 2] = std::max(classmax[r % 2][c % 2], a);
      peak = std::max(peak, a);
    }
  if (!(peak > 0)) throw std::domain_error("kernel_check: diff factor is identically zero");

  long double dead = 0, total = 0;
  for (int r = 0; r < g.n; ++r)
    for (int c = 0; c < g.n; ++c) {
      const double w = std::norm(s.sum_factor.at(r, c));
      total += w;
      if (classmax[r % 2][c % 2] < 0.01 * peak) dead += w;
    }
  KernelCheckReport rep;
  rep.dead_fraction = double(dead / total);
  rep.observable = rep.dead_fraction < 0.5;
  return rep;
}

}  // namespace spdcsim
