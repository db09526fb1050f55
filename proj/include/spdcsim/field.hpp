// Copyright (c) 2026 spdcsim contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <complex>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

#include "grid.hpp"

namespace spdcsim {

/// Dense row-major samples over a Grid2D. Row index is the y axis, column x.
template <class T>
struct Field2D {
  Grid2D grid;
  std::vector<T> v;

  Field2D() = default;
  explicit Field2D(const Grid2D& g, T fill = T{}) : grid(g), v(g.size(), fill) {}

  T& at(int row, int col) { return v[std::size_t(row) * grid.n + col]; }
  const T& at(int row, int col) const { return v[std::size_t(row) * grid.n + col]; }

  double x(int col) const { return grid.coord(col); }
  double y(int row) const { return grid.coord(row); }
};

using RealField2D = Field2D<double>;
using ComplexField2D = Field2D<std::complex<double>>;

/// Plain sum of all samples (extended-precision accumulation, fixed order).
template <class T>
T field_sum(const Field2D<T>& f) {
  if constexpr (std::is_same_v<T, double>) {
    long double acc = 0;
    for (double x : f.v) acc += x;
    return double(acc);
  } else {
    long double re = 0, im = 0;
    for (const auto& z : f.v) { re += z.real(); im += z.imag(); }
    return T(double(re), double(im));
  }
}

/// Measure-weighted squared norm: sum |v|^2 * pitch^2.
template <class T>
double l2_norm_sq(const Field2D<T>& f) {
  long double acc = 0;
  for (const auto& z : f.v) acc += (long double)std::norm(z);
  return double(acc * (long double)f.grid.pitch * (long double)f.grid.pitch);
}

template <class T>
double l2_norm(const Field2D<T>& f) {
  return std::sqrt(l2_norm_sq(f));
}

/// Scale so that sum |v|^2 * pitch^2 == 1. Throws on zero / non-finite input.
template <class T>
void normalize_l2(Field2D<T>& f) {
  const double nrm = l2_norm(f);
  if (!(nrm > 0.) || !std::isfinite(nrm))
    throw std::domain_error("normalize_l2: field norm is zero or not finite");
  const double s = 1.0 / nrm;
  for (auto& z : f.v) z *= s;
}

/// Scale a non-negative map so its plain sample sum is 1.
inline void normalize_sum(RealField2D& f) {
  const double s = field_sum(f);
  if (!(s > 0.) || !std::isfinite(s))
    throw std::domain_error("normalize_sum: field sum is zero or not finite");
  const double inv = 1.0 / s;
  for (auto& x : f.v) x *= inv;
}

inline RealField2D squared_modulus(const ComplexField2D& f) {
  RealField2D out(f.grid);
  for (std::size_t i = 0; i < f.v.size(); ++i) out.v[i] = std::norm(f.v[i]);
  return out;
}

template <class A, class B>
void require_same_grid(const Field2D<A>& a, const Field2D<B>& b, const char* who) {
  if (!(a.grid == b.grid))
    throw std::invalid_argument(std::string(who) + ": fields live on different grids");
}

}  // namespace spdcsim
