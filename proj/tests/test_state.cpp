// Copyright (c) 2026 spdcsim contributors
// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <complex>

#include <spdcsim/observables.hpp>
#include <spdcsim/state.hpp>

#include "oracles.hpp"

using namespace spdcsim;

namespace {

/// Narrow Gaussian angular spectrum written directly on a momentum lattice,
/// with a linear phase so nothing is accidentally real or symmetric.
ComplexField2D synthetic_spectrum(const Grid2D& g, double sigma_bins, double chirp = 0.3) {
  ComplexField2D f(g);
  const double s = sigma_bins * g.pitch;
  for (int r = 0; r < g.n; ++r)
    for (int c = 0; c < g.n; ++c) {
      const double qx = g.coord(c), qy = g.coord(r);
      f.at(r, c) = std::exp(-(qx * qx + qy * qy) / (2 * s * s)) *
                   std::polar(1.0, chirp * (qx + 0.7 * qy) / g.pitch);
    }
  return f;
}

long double jpd_total(const Jpd4& jpd) {
  long double t = 0;
  for (double v : jpd.v) t += v;
  return t * jpd.pitch * jpd.pitch * jpd.pitch * jpd.pitch;
}

}  // namespace

TEST_CASE("photon-lattice probability sums to one for a narrow spectrum") {
  const Grid2D g = make_grid(16, 16.0, Domain::Momentum);
  const TwoPhotonState s = build_state(synthetic_spectrum(g, 1.65), CrystalSpec{});
  CHECK(std::abs(double(jpd_total(brute_force_jpd(s)) - 1.0L)) < 1e-12);
}

TEST_CASE("probability stays unit-normalized across spectrum widths") {
  const Grid2D g = make_grid(16, 16.0, Domain::Momentum);
  for (double sigma : {0.8, 1.65, 3.0}) {
    const TwoPhotonState s = build_state(synthetic_spectrum(g, sigma), CrystalSpec{});
    CHECK(std::abs(double(jpd_total(brute_force_jpd(s)) - 1.0L)) < 1e-12);
  }
}

TEST_CASE("amplitude is exactly exchange-symmetric") {
  const Grid2D g = make_grid(12, 12.0, Domain::Momentum);
  const TwoPhotonState s = build_state(synthetic_spectrum(g, 2.1, 0.9), CrystalSpec{});
  const Jpd4 jpd = brute_force_jpd(s);
  for (int r1 = 0; r1 < g.n; ++r1)
    for (int c1 = 0; c1 < g.n; ++c1)
      for (int r2 = 0; r2 < g.n; ++r2)
        for (int c2 = 0; c2 < g.n; ++c2)
          REQUIRE(jpd.at(r1, c1, r2, c2) == jpd.at(r2, c2, r1, c1));

  const std::complex<double> a =
      evaluate_amplitude(s, g.coord(3), g.coord(8), g.coord(7), g.coord(2));
  const std::complex<double> b =
      evaluate_amplitude(s, g.coord(7), g.coord(2), g.coord(3), g.coord(8));
  CHECK(a == b);
}

TEST_CASE("factor index maps and their range guards") {
  const Grid2D g = make_grid(8, 8.0, Domain::Momentum);
  const TwoPhotonState s = build_state(synthetic_spectrum(g, 1.0), CrystalSpec{});
  const int n = g.n;
  for (int i1 = 0; i1 < n; ++i1)
    for (int i2 = 0; i2 < n; ++i2) {
      const int si = factor_sum_index(s, i1, i2);
      const int di = factor_diff_index(s, i1, i2);
      // manual images of the maps
      const int s_raw = i1 + i2 - n / 2, d_raw = i1 - i2 + n / 2;
      CHECK(si == ((s_raw < 0 || s_raw >= n) ? -1 : s_raw));
      CHECK(di == ((d_raw < 0 || d_raw >= n) ? -1 : d_raw));
      if (si >= 0 && di >= 0) {
        CHECK((si + di) % 2 == 0);       // parity lock
        CHECK((si + di) / 2 == i1);      // photon one recoverable
      }
    }
}

TEST_CASE("difference factor edge row and column are zeroed") {
  const Grid2D g = make_grid(16, 16.0, Domain::Momentum);
  const TwoPhotonState s = build_state(synthetic_spectrum(g, 1.65), CrystalSpec{});
  for (int i = 0; i < g.n; ++i) {
    CHECK(s.diff_factor.at(0, i) == std::complex<double>(0, 0));
    CHECK(s.diff_factor.at(i, 0) == std::complex<double>(0, 0));
  }
  CHECK(s.diff_factor.at(1, 1) != std::complex<double>(0, 0));
}

TEST_CASE("amplitude evaluation reproduces factor products on the lattice") {
  const Grid2D g = make_grid(16, 16.0, Domain::Momentum);
  const TwoPhotonState s = build_state(synthetic_spectrum(g, 1.65), CrystalSpec{});
  const int n = g.n;
  for (int i1 = 2; i1 < n; i1 += 3)
    for (int i2 = 1; i2 < n; i2 += 4) {
      const std::complex<double> got =
          evaluate_amplitude(s, g.coord(i1), g.coord(i2), g.coord(i2), g.coord(i1));
      const int sx = factor_sum_index(s, i1, i2), sy = factor_sum_index(s, i2, i1);
      const int dx = factor_diff_index(s, i1, i2), dy = factor_diff_index(s, i2, i1);
      std::complex<double> want(0, 0);
      if (sx >= 0 && sy >= 0 && dx >= 0 && dy >= 0)
        want = s.norm_constant * s.sum_factor.at(sy, sx) * s.diff_factor.at(dy, dx);
      CHECK(std::abs(got - want) < 1e-12 * (std::abs(want) + s.norm_constant));
    }

  CHECK_THROWS_AS(evaluate_amplitude(s, g.extent(), 0, 0, 0), std::out_of_range);
  CHECK_THROWS_AS(evaluate_amplitude(s, 0, 0, 0, -g.extent()), std::out_of_range);
}

TEST_CASE("amplitude evaluation interpolates between samples") {
  const Grid2D g = make_grid(16, 16.0, Domain::Momentum);
  const TwoPhotonState s = build_state(synthetic_spectrum(g, 1.65), CrystalSpec{});
  // photon one half a step off-lattice in x only: each factor blends its two
  // x-neighbors at equal weight, rows stay on-lattice
  const double x1 = 0.5 * (g.coord(7) + g.coord(8));
  const std::complex<double> got = evaluate_amplitude(s, x1, g.coord(6), g.coord(9), g.coord(5));
  const int sy = factor_sum_index(s, 6, 5), dy = factor_diff_index(s, 6, 5);
  const int sx_lo = 7 + 9 - g.n / 2, dx_lo = 7 - 9 + g.n / 2;
  const std::complex<double> p = 0.5 * (s.sum_factor.at(sy, sx_lo) + s.sum_factor.at(sy, sx_lo + 1));
  const std::complex<double> c = 0.5 * (s.diff_factor.at(dy, dx_lo) + s.diff_factor.at(dy, dx_lo + 1));
  const std::complex<double> want = s.norm_constant * p * c;
  CHECK(std::abs(got - want) < 1e-12 * std::abs(want));
}

TEST_CASE("closed-form ring state uses the Gaussian stand-in and stays normalized") {
  const Grid2D g = make_grid(16, 4e5, Domain::Momentum);
  CrystalSpec cr;
  cr.model = PhaseMatchModel::Sinc;  // must be overridden internally
  const double k_r = 4.0 * g.pitch, waist = 18.0 / g.extent();
  const TwoPhotonState s = analytic_ring_state(g, cr, k_r, waist);

  CHECK(s.crystal.model == PhaseMatchModel::Gauss);
  const ComplexField2D ref = bessel_gauss_spectrum_analytic(g, 0, k_r, waist);
  CHECK(oracle::rel_l2(s.sum_factor.v, ref.v) < 1e-14);
  CHECK(std::abs(double(jpd_total(brute_force_jpd(s)) - 1.0L)) < 1e-12);
}

TEST_CASE("position representation carries the transformed factors") {
  const int n = 32;
  const Grid2D g = make_grid(n, 4e5, Domain::Momentum);
  const double w = 21.0 / g.extent();
  ComplexField2D spec(g);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) {
      const double q2 = g.coord(c) * g.coord(c) + g.coord(r) * g.coord(r);
      spec.at(r, c) = std::exp(-q2 * w * w / 4.0);
    }
  CrystalSpec cr;
  cr.model = PhaseMatchModel::Gauss;
  const double delta = 0.5 * w;
  cr.length = delta * delta * 4.0 * cr.pump_wavenumber() / (0.257 * 0.257);
  REQUIRE(cr.gaussian_width() == Catch::Approx(delta).epsilon(1e-12));

  const TwoPhotonState far = build_state(spec, cr);
  const TwoPhotonState near = near_field_state(far);

  CHECK(near.rep == StateRep::Position);
  CHECK(near.arg_stride == 2);
  const Grid2D fine = near.sum_factor.grid;
  CHECK(fine.n == 2 * n);
  CHECK(fine.domain == Domain::Position);
  const Grid2D pg = photon_grid(near);
  CHECK(pg.n == n);
  CHECK(pg.pitch == Catch::Approx(2.0 * fine.pitch));

  // transform pairs: exp(-q^2 w^2/4) <-> exp(-x^2/w^2),
  //                  exp(-delta^2 q^2/2) <-> exp(-x^2/(2 delta^2))
  RealField2D want_p(fine), want_c(fine);
  for (int r = 0; r < fine.n; ++r)
    for (int c = 0; c < fine.n; ++c) {
      const double x2 = fine.coord(c) * fine.coord(c) + fine.coord(r) * fine.coord(r);
      want_p.at(r, c) = std::exp(-x2 / (w * w));
      want_c.at(r, c) = std::exp(-x2 / (2 * delta * delta));
    }
  RealField2D got_p(fine), got_c(fine);
  for (std::size_t i = 0; i < got_p.v.size(); ++i) {
    got_p.v[i] = std::abs(near.sum_factor.v[i]);
    got_c.v[i] = std::abs(near.diff_factor.v[i]);
  }
  normalize_l2(want_p);
  normalize_l2(want_c);
  normalize_l2(got_p);
  normalize_l2(got_c);
  CHECK(oracle::rel_l2(got_p.v, want_p.v) < 1e-5);
  CHECK(oracle::rel_l2(got_c.v, want_c.v) < 1e-5);
}

TEST_CASE("position-representation probability is unit within clipping error") {
  // both factors equally wide so all four window edges sit at the numerical
  // floor; otherwise truncation ringing leaks measurable mass off the lattice
  const int n = 32;
  const Grid2D g = make_grid(n, 4e5, Domain::Momentum);
  const double w = 16.9 / g.extent();
  ComplexField2D spec(g);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) {
      const double q2 = g.coord(c) * g.coord(c) + g.coord(r) * g.coord(r);
      spec.at(r, c) = std::exp(-q2 * w * w / 4.0);
    }
  CrystalSpec cr;
  cr.model = PhaseMatchModel::Gauss;
  const double delta = w;
  cr.length = delta * delta * 4.0 * cr.pump_wavenumber() / (0.257 * 0.257);

  const TwoPhotonState near = near_field_state(build_state(spec, cr));
  const Grid2D pg = photon_grid(near);
  long double tot = 0;
  for (int r1 = 0; r1 < pg.n; ++r1)
    for (int c1 = 0; c1 < pg.n; ++c1)
      for (int r2 = 0; r2 < pg.n; ++r2)
        for (int c2 = 0; c2 < pg.n; ++c2) {
          const int sy = factor_sum_index(near, r1, r2), sx = factor_sum_index(near, c1, c2);
          const int dy = factor_diff_index(near, r1, r2), dx = factor_diff_index(near, c1, c2);
          if (sy < 0 || sx < 0 || dy < 0 || dx < 0) continue;
          tot += (long double)std::norm(near.sum_factor.at(sy, sx)) *
                 std::norm(near.diff_factor.at(dy, dx));
        }
  tot *= (long double)near.norm_constant * near.norm_constant;
  tot *= std::pow((long double)pg.pitch, 4.0L);
  CHECK(std::abs(double(tot - 1.0L)) < 1e-10);
}

TEST_CASE("support diagnostic passes resolved states and flags collapsed ones") {
  // resolved: broad phase matching on a fine momentum lattice
  const Grid2D fine = make_grid(16, 16.0, Domain::Momentum);
  const KernelCheckReport ok = kernel_check(build_state(synthetic_spectrum(fine, 1.65), CrystalSpec{}));
  CHECK(ok.observable);
  CHECK(ok.dead_fraction < 0.1);

  // collapsed: a 40 um position window makes the momentum pitch so coarse
  // that a 2 m crystal's phase matching fits inside one bin
  const int n = 64;
  const Grid2D coarse = make_grid(n, n * 2 * pi / 4e-5, Domain::Momentum);
  const double w = 3e-6;
  ComplexField2D spec(coarse);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) {
      const double q2 = coarse.coord(c) * coarse.coord(c) + coarse.coord(r) * coarse.coord(r);
      spec.at(r, c) = std::exp(-q2 * w * w / 4.0);
    }

  double prev = -1.0;
  for (double length : {2e-3, 2e-2, 2e-1, 2.0}) {
    CrystalSpec cr;
    cr.length = length;
    const KernelCheckReport rep = kernel_check(build_state(spec, cr));
    CHECK(rep.dead_fraction >= prev - 1e-12);  // decade sweep only worsens
    prev = rep.dead_fraction;
    if (length == 2e-3) CHECK(rep.observable);
    if (length == 2.0) {
      CHECK_FALSE(rep.observable);
      CHECK(rep.dead_fraction > 0.5);
    }
  }
}

TEST_CASE("support diagnostic rejects degenerate inputs") {
  const Grid2D g = make_grid(8, 8.0, Domain::Momentum);
  TwoPhotonState s;
  s.sum_factor = ComplexField2D(g);
  s.sum_factor.v.assign(s.sum_factor.v.size(), {1.0, 0.0});
  s.diff_factor = ComplexField2D(g);  // identically zero
  s.arg_stride = 1;
  s.rep = StateRep::Momentum;
  s.norm_constant = 1.0;
  CHECK_THROWS_AS(kernel_check(s), std::domain_error);

  const TwoPhotonState near = near_field_state(
      build_state(synthetic_spectrum(make_grid(16, 16.0, Domain::Momentum), 1.65),
                  CrystalSpec{}));
  CHECK_THROWS_AS(kernel_check(near), std::invalid_argument);
}

TEST_CASE("state assembly validates its inputs") {
  const Grid2D pos = make_grid(16, 1e-3, Domain::Position);
  ComplexField2D posf(pos);
  posf.v.assign(posf.v.size(), {1.0, 0.0});
  CHECK_THROWS_AS(build_state(posf, CrystalSpec{}), std::invalid_argument);

  const Grid2D g = make_grid(16, 16.0, Domain::Momentum);
  ComplexField2D bad(g);
  bad.v.assign(bad.v.size(), {1.0, 0.0});
  bad.v[7] = {std::nan(""), 0.0};
  CHECK_THROWS_AS(build_state(bad, CrystalSpec{}), std::invalid_argument);

  ComplexField2D zero(g);  // all-zero spectrum has no normalizable state
  CHECK_THROWS_AS(build_state(zero, CrystalSpec{}), std::domain_error);

  ComplexField2D small(g);
  small.v.resize(4);
  CHECK_THROWS_AS(build_state(small, CrystalSpec{}), std::invalid_argument);

  CHECK_THROWS_AS(near_field_state(near_field_state(
                      build_state(synthetic_spectrum(g, 1.65), CrystalSpec{}))),
                  std::invalid_argument);
}
