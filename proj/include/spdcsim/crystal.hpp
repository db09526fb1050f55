// Copyright (c) 2026 spdcsim contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <stdexcept>

#include "core.hpp"
#include "special.hpp"

namespace spdcsim {

/// Transverse phase-matching profile family for a thin nonlinear slab under
/// collinear, frequency-degenerate operation.
enum class PhaseMatchModel {
  Sinc,   ///< exact thin-slab profile, sinc in |q|^2
  Gauss,  ///< single-Gaussian stand-in with a matched width parameter
};

struct CrystalSpec {
  double length = 2.0e-3;            ///< slab thickness along the pump axis [m]
  double pump_wavelength = 405e-9;   ///< vacuum pump wavelength [m]
  double refractive_index = 1.0;     ///< index seen by the pump
  PhaseMatchModel model = PhaseMatchModel::Sinc;

  /// Pump wavenumber inside the medium.
  double pump_wavenumber() const { return 2.0 * pi * refractive_index / pump_wavelength; }

  /// Width parameter of the Gaussian stand-in profile.
  double gaussian_width() const {
    return 0.257 * std::sqrt(length / (4.0 * pump_wavenumber()));
  }
};

inline void validate(const CrystalSpec& c, const char* who) {
  if (!(c.length > 0) || !std::isfinite(c.length))
    throw std::invalid_argument(std::string(who) + ": crystal length must be positive");
  if (!(c.pump_wavelength > 0) || !std::isfinite(c.pump_wavelength))
    throw std::invalid_argument(std::string(who) + ": pump wavelength must be positive");
  if (!(c.refractive_index > 0) || !std::isfinite(c.refractive_index))
    throw std::invalid_argument(std::string(who) + ": refractive index must be positive");
}

/// Exact transverse profile: (1/pi) * sqrt(2L/K) * sinc(L |q|^2 / (4K)).
inline double phase_matching_sinc(double q_mag, const CrystalSpec& c) {
  const double K = c.pump_wavenumber();
  return (1.0 / pi) * std::sqrt(2.0 * c.length / K) *
         sinc(c.length * q_mag * q_mag / (4.0 * K));
}

/// Gaussian stand-in: d * exp(-d^2 |q|^2 / 2) with d = gaussian_width().
inline double phase_matching_gauss(double q_mag, const CrystalSpec& c) {
  const double d = c.gaussian_width();
  return d * std::exp(-0.5 * d * d * q_mag * q_mag);
}

inline double phase_matching(double q_mag, const CrystalSpec& c) {
  return c.model == PhaseMatchModel::Sinc ? phase_matching_sinc(q_mag, c)
                                          : phase_matching_gauss(q_mag, c);
}

}  // namespace spdcsim
