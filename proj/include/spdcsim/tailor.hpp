// Copyright (c) 2026 spdcsim contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "fft.hpp"
#include "field.hpp"
#include "pump.hpp"
#include "rng.hpp"

namespace spdcsim {

struct TailorResult {
  SlmMask mask;                  ///< phase pattern achieving the result
  ComplexField2D spectrum;       ///< realized unit-norm far-field spectrum
  double residual = 0.;          ///< lowest residual reached, == min(history)
  std::vector<double> history;   ///< one residual per iteration, then final
};

namespace detail {

/// One retrieval run from the given initial phase. `target_modulus` must
/// carry the same plain vector norm as the envelope so the two modulus
/// constraints exchange equal power.
///
/// Plain alternating projections between the envelope-modulus and
/// target-modulus sets stagnate far from reachable targets, so the first 60%
/// of the budget runs a relaxed Douglas-Rachford reflection update
/// (beta = 0.7) that escapes those plateaus, and the remainder polishes with
/// plain projections, which are non-increasing in the mismatch. Every
/// iteration logs the residual of a constraint-satisfying candidate and the
/// best candidate seen is returned, so `residual == min(history)` even
/// though the reflection phase may oscillate. The residual is normalized by
/// the target norm, making it a dimensionless relative error.
inline TailorResult tailor_run(const ComplexField2D& envelope,
                               const std::vector<double>& target_modulus,
                               const std::vector<double>& init_phase, int iterations) {
  const Grid2D pos_grid = envelope.grid;

  long double tn2 = 0;
  for (double t : target_modulus) tn2 += (long double)t * t;
  const double target_norm = std::sqrt(double(tn2));

  // Project onto the target-modulus set, returned in the shaper plane.
  auto project_target = [&](const ComplexField2D& f) {
    ComplexField2D V = dft2_centered(f, FftDirection::Forward);
    for (std::size_t i = 0; i < V.v.size(); ++i) {
      const double a = std::abs(V.v[i]);
      V.v[i] = a > 0 ? V.v[i] * (target_modulus[i] / a)
                     : std::complex<double>(target_modulus[i], 0.0);
    }
    ComplexField2D h = dft2_centered(V, FftDirection::Inverse);
    h.grid = pos_grid;  // re-pin: round-trip pitch may drift one ulp
    return h;
  };
  // Project onto the envelope-modulus set (keep phase, impose |envelope|).
  auto project_envelope = [&](const ComplexField2D& f) {
    ComplexField2D g(pos_grid);
    for (std::size_t i = 0; i < g.v.size(); ++i) {
      const double a = std::abs(f.v[i]);
      g.v[i] = a > 0 ? envelope.v[i] * (f.v[i] / a) : envelope.v[i];
    }
    return g;
  };
  auto residual_of = [&](const ComplexField2D& f) {
    const ComplexField2D V = dft2_centered(f, FftDirection::Forward);
    long double acc = 0;
    for (std::size_t i = 0; i < V.v.size(); ++i) {
      const double d = std::abs(V.v[i]) - target_modulus[i];
      acc += (long double)d * d;
    }
    return std::sqrt(double(acc)) / target_norm;
  };

  TailorResult out;
  ComplexField2D best(pos_grid);
  double best_r = std::numeric_limits<double>::infinity();
  auto record = [&](const ComplexField2D& cand) {
    const double r = residual_of(cand);
    out.history.push_back(r);
    if (r < best_r) {
      best_r = r;
      best = cand;
    }
  };

  ComplexField2D s(pos_grid);
  for (std::size_t i = 0; i < s.v.size(); ++i)
    s.v[i] = envelope.v[i] * std::polar(1.0, init_phase[i]);

  const double beta = 0.7;
  const int n_relax = (iterations * 3) / 5;
  for (int it = 0; it < n_relax; ++it) {
    const ComplexField2D pv = project_target(s);
    record(project_envelope(pv));
    ComplexField2D refl(pos_grid);
    for (std::size_t i = 0; i < refl.v.size(); ++i) refl.v[i] = 2.0 * pv.v[i] - s.v[i];
    const ComplexField2D pe = project_envelope(refl);
    for (std::size_t i = 0; i < s.v.size(); ++i) s.v[i] += beta * (pe.v[i] - pv.v[i]);
  }

  ComplexField2D f = n_relax > 0 ? project_envelope(project_target(s)) : s;
  for (int it = n_relax; it < iterations; ++it) {
    record(f);
    f = project_envelope(project_target(f));
  }
  record(f);

  out.residual = best_r;
  out.spectrum = dft2_centered(best, FftDirection::Forward);
  normalize_l2(out.spectrum);
  out.mask.kind = MaskKind::Custom;
  out.mask.grid = pos_grid;
  out.mask.phase.resize(best.v.size());
  for (std::size_t i = 0; i < best.v.size(); ++i)
    out.mask.phase[i] = wrap_2pi(std::arg(best.v[i]));
  return out;
}

}  // namespace detail

/// Shape the far-field intensity |V|^2 toward `target_intensity` using
/// phase-only control of a Gaussian pump: relaxed reflections between the
/// envelope-modulus constraint (shaper plane) and the target-modulus
/// constraint (far field), polished by plain alternating projections.
///
/// Two deterministic starts are run -- a flat phase and a seeded smooth random
/// phase -- and the lower-residual result is returned, with its per-iteration
/// residual history (length iterations + 1; the final polish segment is
/// non-increasing).
inline TailorResult tailor_pump(const RealField2D& target_intensity, const PumpSpec& pump,
                                int iterations, std::uint64_t seed) {
  validate(pump, "tailor_pump");
  if (iterations < 1) throw std::invalid_argument("tailor_pump: iterations must be >= 1");
  const Grid2D kg = conjugate_grid(pump.grid);
  if (!(target_intensity.grid == kg))
    throw std::invalid_argument(
        "tailor_pump: target must live on the conjugate momentum grid of the pump");
  std::vector<double> t(target_intensity.v.size());
  long double sum = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double w = target_intensity.v[i];
    if (!(w >= 0) || !std::isfinite(w))
      throw std::invalid_argument("tailor_pump: target intensity must be >= 0 and finite");
    sum += w;
  }
  if (!(sum > 0)) throw std::invalid_argument("tailor_pump: target intensity is all zero");

  const ComplexField2D env = gaussian_envelope(pump);
  // Match the target's plain vector norm to the envelope's so the alternating
  // modulus constraints exchange equal power through the unitary transform.
  long double env2 = 0;
  for (const auto& z : env.v) env2 += (long double)std::norm(z);
  const double env_norm = std::sqrt(double(env2));
  for (std::size_t i = 0; i < t.size(); ++i)
    t[i] = std::sqrt(target_intensity.v[i] / double(sum)) * env_norm;

  const std::vector<double> flat(env.v.size(), 0.0);
  TailorResult best = detail::tailor_run(env, t, flat, iterations);

  // Smooth seeded start: low-pass filtered noise, 0.5 rad spread.
  {
    const CounterRng rng{seed};
    RealField2D noise(pump.grid);
    for (std::size_t i = 0; i < noise.v.size(); ++i)
      noise.v[i] = rng.uniform(Stream::TailorInit, i) - 0.5;
    RealField2D smooth = detail::lowpass_gaussian(noise, pump.grid.extent() / 16.0);
    long double m = 0, var = 0;
    for (double x : smooth.v) m += x;
    m /= (long double)smooth.v.size();
    for (double x : smooth.v) var += ((long double)x - m) * ((long double)x - m);
    var /= (long double)smooth.v.size();
    const double scale = var > 0 ? 0.5 / double(std::sqrt(var)) : 0.0;
    std::vector<double> init(smooth.v.size());
    for (std::size_t i = 0; i < init.size(); ++i)
      init[i] = (smooth.v[i] - double(m)) * scale;
    TailorResult alt = detail::tailor_run(env, t, init, iterations);
    if (alt.residual < best.residual) best = std::move(alt);
  }
  return best;
}

}  // namespace spdcsim
