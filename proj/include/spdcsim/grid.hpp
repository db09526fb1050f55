// Copyright (c) 2026 spdcsim contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>

#include "core.hpp"

namespace spdcsim {

/// Which conjugate plane a lattice (and anything sampled on it) lives in.
enum class Domain { Position, Momentum };

/// Square, even-sized, zero-centered sampling lattice.
///
/// Sample i of an axis sits at (i - n/2) * pitch, so index n/2 is the exact
/// origin and index 0 is the one edge sample without a mirror partner.
struct Grid2D {
  int n = 0;          ///< samples per axis; even, >= 2
  double pitch = 0.;  ///< sample spacing; > 0
  Domain domain = Domain::Position;

  double coord(int i) const { return (i - n / 2) * pitch; }
  double extent() const { return n * pitch; }
  int center() const { return n / 2; }
  std::size_t size() const { return std::size_t(n) * std::size_t(n); }

  /// Index of the sample nearest to x, rounding halves away from zero.
  /// Returns -1 when x falls outside the lattice.
  int index_of(double x) const {
    const long long k = std::llround(x / pitch);
    const long long i = k + n / 2;
    return (i < 0 || i >= n) ? -1 : int(i);
  }

  bool contains(double x, double y) const {
    return index_of(x) >= 0 && index_of(y) >= 0;
  }

  bool operator==(const Grid2D&) const = default;
};

inline void validate(const Grid2D& g, const char* who) {
  if (g.n < 2 || g.n % 2 != 0)
    throw std::invalid_argument(std::string(who) + ": grid n must be even and >= 2");
  if (!(g.pitch > 0.) || !std::isfinite(g.pitch))
    throw std::invalid_argument(std::string(who) + ": grid pitch must be positive and finite");
}

inline Grid2D make_grid(int n, double extent, Domain domain) {
  if (n < 2 || n % 2 != 0) throw std::invalid_argument("make_grid: n must be even and >= 2");
  if (!(extent > 0.) || !std::isfinite(extent))
    throw std::invalid_argument("make_grid: extent must be positive and finite");
  return Grid2D{n, extent / n, domain};
}

/// Conjugate lattice of the centered unitary DFT: same n, pitch 2*pi/(n*pitch),
/// opposite domain tag. The pitch is evaluated in extended precision; applying
/// the map twice returns the original pitch to within one ulp (exactness is
/// unattainable because the pitch product 2*pi/n is irrational). Code that
/// transforms back and forth should therefore carry the original grid along
/// rather than reconstruct it through a round trip.
inline Grid2D conjugate_grid(const Grid2D& g) {
  validate(g, "conjugate_grid");
  const long double p = 2.0L * pi_l / ((long double)g.n * (long double)g.pitch);
  return Grid2D{g.n, double(p),
                g.domain == Domain::Position ? Domain::Momentum : Domain::Position};
}

}  // namespace spdcsim
