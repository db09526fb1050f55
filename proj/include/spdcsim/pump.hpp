// Copyright (c) 2026 spdcsim contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "fft.hpp"
#include "field.hpp"
#include "grid.hpp"
#include "rng.hpp"
#include "special.hpp"

namespace spdcsim {

/// Pump beam at the shaping plane: a Gaussian envelope exp(-r^2/waist^2)
/// sampled on a position-domain grid.
struct PumpSpec {
  Grid2D grid;                   ///< position-domain lattice at the shaper
  double waist = 0.;             ///< 1/e field radius [m]
  double wavelength = 405e-9;    ///< vacuum wavelength [m]
};

inline void validate(const PumpSpec& p, const char* who) {
  validate(p.grid, who);
  if (p.grid.domain != Domain::Position)
    throw std::invalid_argument(std::string(who) + ": pump grid must be position-domain");
  if (!(p.waist > 0) || !std::isfinite(p.waist))
    throw std::invalid_argument(std::string(who) + ": waist must be positive");
  if (p.waist < 4.0 * p.grid.pitch)
    throw std::invalid_argument(std::string(who) +
                                ": waist must be at least 4 grid pitches (undersampled)");
  if (!(p.wavelength > 0) || !std::isfinite(p.wavelength))
    throw std::invalid_argument(std::string(who) + ": wavelength must be positive");
}

/// Unit-norm Gaussian envelope on the pump grid.
inline ComplexField2D gaussian_envelope(const PumpSpec& p) {
  validate(p, "gaussian_envelope");
  ComplexField2D f(p.grid);
  const double inv_w2 = 1.0 / (p.waist * p.waist);
  for (int r = 0; r < p.grid.n; ++r)
    for (int c = 0; c < p.grid.n; ++c) {
      const double x = p.grid.coord(c), y = p.grid.coord(r);
      f.at(r, c) = std::exp(-(x * x + y * y) * inv_w2);
    }
  normalize_l2(f);
  return f;
}

// ---------------------------------------------------------------------------
// Phase masks

enum class MaskKind { Flat, Axicon, Checkerboard, Random, RingFourier, Custom };

/// Phase-only shaper pattern on the pump grid. Phases are radians in [0, 2pi).
/// carrier_kx > 0 marks an amplitude-encoding mask whose payload rides on a
/// blazed carrier and must be isolated with select_first_order downstream.
struct SlmMask {
  MaskKind kind = MaskKind::Flat;
  Grid2D grid;
  std::vector<double> phase;
  double carrier_kx = 0.;

  double& at(int row, int col) { return phase[std::size_t(row) * grid.n + col]; }
  double at(int row, int col) const { return phase[std::size_t(row) * grid.n + col]; }
};

namespace detail {

inline double wrap_2pi(double a) {
  double r = std::fmod(a, 2.0 * pi);
  if (r < 0) r += 2.0 * pi;
  return r;
}

/// Periodic Gaussian low-pass of a real map via the transform pair.
inline RealField2D lowpass_gaussian(const RealField2D& in, double sigma_spatial) {
  ComplexField2D f(in.grid);
  for (std::size_t i = 0; i < in.v.size(); ++i) f.v[i] = in.v[i];
  ComplexField2D F = dft2_centered(f, FftDirection::Forward);
  const Grid2D kg = F.grid;
  const double s2 = sigma_spatial * sigma_spatial;
  for (int r = 0; r < kg.n; ++r)
    for (int c = 0; c < kg.n; ++c) {
      const double kx = kg.coord(c), ky = kg.coord(r);
      F.at(r, c) *= std::exp(-0.5 * (kx * kx + ky * ky) * s2);
    }
  ComplexField2D back = dft2_centered(F, FftDirection::Inverse);
  RealField2D out(in.grid);
  for (std::size_t i = 0; i < out.v.size(); ++i) out.v[i] = back.v[i].real();
  return out;
}

}  // namespace detail

inline SlmMask flat_mask(const Grid2D& g) {
  validate(g, "flat_mask");
  if (g.domain != Domain::Position)
    throw std::invalid_argument("flat_mask: grid must be position-domain");
  return SlmMask{MaskKind::Flat, g, std::vector<double>(g.size(), 0.0), 0.0};
}

/// Conical phase (-k_r * r) mod 2pi: shifts the spectrum radially outward to
/// a ring of radius k_r. Requires k_r below the one-sided lattice bandwidth.
inline SlmMask axicon_mask(const Grid2D& g, double k_r) {
  validate(g, "axicon_mask");
  if (g.domain != Domain::Position)
    throw std::invalid_argument("axicon_mask: grid must be position-domain");
  if (!(k_r >= 0) || !std::isfinite(k_r))
    throw std::invalid_argument("axicon_mask: k_r must be >= 0 and finite");
  if (k_r >= pi / g.pitch)
    throw std::invalid_argument("axicon_mask: k_r exceeds the lattice bandwidth pi/pitch");
  SlmMask m{MaskKind::Axicon, g, std::vector<double>(g.size()), 0.0};
  for (int r = 0; r < g.n; ++r)
    for (int c = 0; c < g.n; ++c) {
      const double x = g.coord(c), y = g.coord(r);
      m.at(r, c) = detail::wrap_2pi(-k_r * std::hypot(x, y));
    }
  return m;
}

/// Two-level tiling: square tiles of `tile` samples alternating 0 / depth.
inline SlmMask checkerboard_mask(const Grid2D& g, int tile, double depth) {
  validate(g, "checkerboard_mask");
  if (g.domain != Domain::Position)
    throw std::invalid_argument("checkerboard_mask: grid must be position-domain");
  if (tile < 1) throw std::invalid_argument("checkerboard_mask: tile must be >= 1");
  if (!std::isfinite(depth))
    throw std::invalid_argument("checkerboard_mask: depth must be finite");
  SlmMask m{MaskKind::Checkerboard, g, std::vector<double>(g.size()), 0.0};
  const double d = detail::wrap_2pi(depth);
  for (int r = 0; r < g.n; ++r)
    for (int c = 0; c < g.n; ++c)
      m.at(r, c) = ((r / tile + c / tile) % 2 == 0) ? 0.0 : d;
  return m;
}

/// Smooth pseudo-random phase: i.i.d. uniform phases low-pass filtered to the
/// requested correlation length, rescaled to a 2.0 rad standard deviation and
/// rewrapped. The filter kernel width 0.93 * correlation_length makes the
/// *field* autocorrelation 1/e width land on correlation_length.
inline SlmMask random_mask(const Grid2D& g, double correlation_length, std::uint64_t seed) {
  validate(g, "random_mask");
  if (g.domain != Domain::Position)
    throw std::invalid_argument("random_mask: grid must be position-domain");
  if (!(correlation_length >= 2.0 * g.pitch) || !std::isfinite(correlation_length))
    throw std::invalid_argument(
        "random_mask: correlation length must be >= 2 pitches and finite");
  if (correlation_length > g.extent() / 4.0)
    throw std::invalid_argument("random_mask: correlation length exceeds extent/4");
  const CounterRng rng{seed};
  RealField2D base(g);
  for (std::size_t i = 0; i < base.v.size(); ++i)
    base.v[i] = rng.uniform(Stream::MaskPhase, i) - 0.5;
  RealField2D smooth = detail::lowpass_gaussian(base, 0.93 * correlation_length);
  long double mean = 0;
  for (double x : smooth.v) mean += x;
  mean /= (long double)smooth.v.size();
  long double var = 0;
  for (double x : smooth.v) var += ((long double)x - mean) * ((long double)x - mean);
  var /= (long double)smooth.v.size();
  const double scale = 2.0 / double(std::sqrt(var));
  SlmMask m{MaskKind::Random, g, std::vector<double>(g.size()), 0.0};
  for (std::size_t i = 0; i < m.phase.size(); ++i)
    m.phase[i] = detail::wrap_2pi((smooth.v[i] - double(mean)) * scale);
  return m;
}

inline SlmMask custom_mask(const Grid2D& g, std::vector<double> phase) {
  validate(g, "custom_mask");
  if (g.domain != Domain::Position)
    throw std::invalid_argument("custom_mask: grid must be position-domain");
  if (phase.size() != g.size())
    throw std::invalid_argument("custom_mask: phase size does not match grid");
  for (double& p : phase) {
    if (!std::isfinite(p)) throw std::invalid_argument("custom_mask: non-finite phase");
    p = detail::wrap_2pi(p);
  }
  return SlmMask{MaskKind::Custom, g, std::move(phase), 0.0};
}

/// Amplitude-encoding mask for an annular spectrum target of radius k_r and
/// Gaussian radial width `width` (both rad/m): the annulus is transformed to
/// the shaper plane and its modulus/argument encoded as
///   phase = A(x, y) * ((k_c x + psi(x, y)) mod 2pi),
/// which places the payload on the first diffraction order at k_c = n/4 lattice
/// steps. Recover the shaped spectrum with select_first_order.
inline SlmMask ring_fourier_mask(const Grid2D& g, double k_r, double width) {
  validate(g, "ring_fourier_mask");
  if (g.domain != Domain::Position)
    throw std::invalid_argument("ring_fourier_mask: grid must be position-domain");
  if (!(k_r >= 0) || !(width > 0) || !std::isfinite(k_r) || !std::isfinite(width))
    throw std::invalid_argument("ring_fourier_mask: k_r >= 0 and width > 0 required");
  const Grid2D kg = conjugate_grid(g);
  const double carrier = (g.n / 4) * kg.pitch;
  if (k_r + 2.0 * width >= 0.5 * carrier)
    throw std::invalid_argument(
        "ring_fourier_mask: target ring does not fit inside the first-order window "
        "(k_r + 2*width must stay below n/8 lattice steps)");
  ComplexField2D annulus(kg);
  for (int r = 0; r < kg.n; ++r)
    for (int c = 0; c < kg.n; ++c) {
      const double q = std::hypot(kg.coord(c), kg.coord(r));
      const double d = (q - k_r) / width;
      annulus.at(r, c) = std::exp(-d * d);
    }
  ComplexField2D target = dft2_centered(annulus, FftDirection::Inverse);
  target.grid = g;  // same lattice; avoids the one-ulp round-trip pitch drift
  double peak = 0;
  for (const auto& z : target.v) peak = std::max(peak, std::abs(z));
  SlmMask m{MaskKind::RingFourier, g, std::vector<double>(g.size()), carrier};
  for (int r = 0; r < g.n; ++r)
    for (int c = 0; c < g.n; ++c) {
      const std::complex<double> t = target.at(r, c);
      const double amp = std::abs(t) / peak;
      const double psi = std::arg(t);
      m.at(r, c) = amp * detail::wrap_2pi(carrier * g.coord(c) + psi);
    }
  return m;
}

/// Multiply a position-domain field by exp(i * phase). Norm is preserved.
inline ComplexField2D apply_mask(const ComplexField2D& field, const SlmMask& mask) {
  if (field.grid.domain != Domain::Position)
    throw std::invalid_argument("apply_mask: field must be position-domain");
  if (!(field.grid == mask.grid))
    throw std::invalid_argument("apply_mask: mask and field grids differ");
  if (mask.phase.size() != mask.grid.size())
    throw std::invalid_argument("apply_mask: mask storage does not match grid");
  ComplexField2D out = field;
  for (std::size_t i = 0; i < out.v.size(); ++i)
    out.v[i] *= std::polar(1.0, mask.phase[i]);
  return out;
}

/// Forward transform of a position-domain field, unit-normalized on the
/// conjugate momentum lattice.
inline ComplexField2D pump_angular_spectrum(const ComplexField2D& field) {
  if (field.grid.domain != Domain::Position)
    throw std::invalid_argument("pump_angular_spectrum: field must be position-domain");
  ComplexField2D F = dft2_centered(field, FftDirection::Forward);
  normalize_l2(F);
  return F;
}

/// Isolate the first diffraction order of an amplitude-encoding mask: keep a
/// disc of radius carrier/2 around (+carrier, 0), recenter it to zero, zero
/// everything else, and renormalize.
inline ComplexField2D select_first_order(const ComplexField2D& spectrum, double carrier_kx) {
  if (spectrum.grid.domain != Domain::Momentum)
    throw std::invalid_argument("select_first_order: spectrum must be momentum-domain");
  if (!(carrier_kx > 0))
    throw std::invalid_argument("select_first_order: carrier must be positive");
  const Grid2D& g = spectrum.grid;
  const long long shift = std::llround(carrier_kx / g.pitch);
  if (shift <= 0 || shift >= g.n / 2)
    throw std::invalid_argument("select_first_order: carrier outside the lattice");
  const double r2max = 0.25 * carrier_kx * carrier_kx;
  ComplexField2D out(g);
  for (int r = 0; r < g.n; ++r)
    for (int c = 0; c < g.n; ++c) {
      const long long src = c + shift;
      if (src >= g.n) continue;
      const double dx = spectrum.grid.coord((int)src) - carrier_kx;
      const double dy = spectrum.grid.coord(r);
      if (dx * dx + dy * dy < r2max) out.at(r, c) = spectrum.at(r, (int)src);
    }
  normalize_l2(out);
  return out;
}

/// Full shaping pipeline: envelope -> phase mask -> far field, including
/// first-order isolation for carrier masks. Returns the unit-norm spectrum.
inline ComplexField2D shaped_pump_spectrum(const PumpSpec& pump, const SlmMask& mask) {
  const ComplexField2D env = gaussian_envelope(pump);
  const ComplexField2D masked = apply_mask(env, mask);
  ComplexField2D F = dft2_centered(masked, FftDirection::Forward);
  if (mask.carrier_kx > 0) return select_first_order(F, mask.carrier_kx);
  normalize_l2(F);
  return F;
}

// ---------------------------------------------------------------------------
// Ring-carrying beams with orbital angular momentum

/// Position-domain ring beam J_l(k_r r) e^{i l phi} exp(-r^2/waist^2),
/// unit-normalized. Order l in [0, 20]; k_r below the lattice bandwidth.
inline ComplexField2D bessel_gauss_field(const PumpSpec& p, int l, double k_r) {
  validate(p, "bessel_gauss_field");
  detail::require_order(l, "bessel_gauss_field");
  if (!(k_r >= 0) || !std::isfinite(k_r))
    throw std::invalid_argument("bessel_gauss_field: k_r must be >= 0 and finite");
  if (k_r >= pi / p.grid.pitch)
    throw std::invalid_argument("bessel_gauss_field: k_r exceeds the lattice bandwidth");
  ComplexField2D f(p.grid);
  const double inv_w2 = 1.0 / (p.waist * p.waist);
  for (int r = 0; r < p.grid.n; ++r)
    for (int c = 0; c < p.grid.n; ++c) {
      const double x = p.grid.coord(c), y = p.grid.coord(r);
      const double rad = std::hypot(x, y);
      const double mag = bessel_j(l, k_r * rad) * std::exp(-(x * x + y * y) * inv_w2);
      f.at(r, c) = std::polar(mag, l * std::atan2(y, x));
    }
  normalize_l2(f);
  return f;
}

/// Closed-form unit-norm spectrum of bessel_gauss_field under the forward
/// convention F(q) = integral f(r) exp(-i q.r) d^2r:
///   (-i)^l e^{i l phi_q} exp(-w^2 (|q| - k_r)^2 / 4) * ie_l(k_r |q| w^2 / 2),
/// where ie_l is the scaled Bessel I. The exponentially stable pairing of the
/// Gaussian with the scaled I avoids overflow at any lattice size.
inline ComplexField2D bessel_gauss_spectrum_analytic(const Grid2D& momentum_grid, int l,
                                                     double k_r, double waist) {
  validate(momentum_grid, "bessel_gauss_spectrum_analytic");
  if (momentum_grid.domain != Domain::Momentum)
    throw std::invalid_argument("bessel_gauss_spectrum_analytic: momentum grid required");
  detail::require_order(l, "bessel_gauss_spectrum_analytic");
  if (!(k_r >= 0) || !std::isfinite(k_r))
    throw std::invalid_argument("bessel_gauss_spectrum_analytic: k_r must be >= 0");
  if (!(waist > 0) || !std::isfinite(waist))
    throw std::invalid_argument("bessel_gauss_spectrum_analytic: waist must be positive");
  const std::complex<double> il = [&] {
    switch (l % 4) {  // (-i)^l
      case 0: return std::complex<double>(1, 0);
      case 1: return std::complex<double>(0, -1);
      case 2: return std::complex<double>(-1, 0);
      default: return std::complex<double>(0, 1);
    }
  }();
  ComplexField2D F(momentum_grid);
  const double w2 = waist * waist;
  for (int r = 0; r < momentum_grid.n; ++r)
    for (int c = 0; c < momentum_grid.n; ++c) {
      const double qx = momentum_grid.coord(c), qy = momentum_grid.coord(r);
      const double q = std::hypot(qx, qy);
      const double ring = (q - k_r) * (q - k_r) * w2 / 4.0;
      const double mag = std::exp(-ring) * bessel_i_scaled(l, k_r * q * w2 / 2.0);
      F.at(r, c) = il * std::polar(mag, l * std::atan2(qy, qx));
    }
  normalize_l2(F);
  return F;
}

}  // namespace spdcsim
