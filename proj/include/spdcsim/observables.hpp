// Copyright (c) 2026 spdcsim contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

#include "fft.hpp"
#include "field.hpp"
#include "state.hpp"

namespace spdcsim {

/// Distribution of the pair-sum coordinate over the factor lattice, unit sum.
/// By separability this is exactly proportional to |sum_factor|^2; all
/// proportionality constants cancel under the normalization.
inline RealField2D sum_projection(const TwoPhotonState& s) {
  RealField2D a = squared_modulus(s.sum_factor);
  normalize_sum(a);
  return a;
}

/// Distribution of the pair-difference coordinate, unit sum; exactly
/// proportional to |diff_factor|^2.
inline RealField2D minus_projection(const TwoPhotonState& s) {
  RealField2D b = squared_modulus(s.diff_factor);
  normalize_sum(b);
  return b;
}

/// Singles image: the photon-lattice marginal over the partner photon,
/// unit sum on the photon grid.
///
/// The photon-pair sum runs over factor indices with
/// sum_index + diff_index = 2 i + const, so the marginal is the linear
/// convolution of |sum_factor|^2 with |diff_factor|^2 sampled at stride-2
/// offsets -- term for term the same sum the brute-force definition performs.
inline RealField2D intensity_marginal(const TwoPhotonState& s) {
  const Grid2D pg = photon_grid(s);
  const int nf = s.sum_factor.grid.n;
  const int np = pg.n;
  const int cf = nf / 2;
  std::vector<double> a(std::size_t(nf) * nf), b(std::size_t(nf) * nf);
  for (std::size_t i = 0; i < a.size(); ++i) {
    a[i] = std::norm(s.sum_factor.v[i]);
    b[i] = std::norm(s.diff_factor.v[i]);
  }
  const std::vector<double> conv = linear_convolve_2d(a, b, nf);
  const int full = 2 * nf - 1;
  RealField2D out(pg);
  for (int r = 0; r < np; ++r) {
    const int cr = 2 * r - np + 2 * cf;
    for (int c = 0; c < np; ++c) {
      const int cc = 2 * c - np + 2 * cf;
      out.at(r, c) = std::max(0.0, conv[std::size_t(cr) * full + cc]);
    }
  }
  normalize_sum(out);
  return out;
}

/// Pairwise distribution of the two photons' x indices with both y axes
/// marginalized: the quantity a column-summed coincidence camera estimates.
struct RowCorrelationMap {
  Grid2D axis;            ///< per-photon x lattice
  std::vector<double> m;  ///< n x n, row = photon-1 x index, col = photon-2 x index

  double& at(int i1, int i2) { return m[std::size_t(i1) * axis.n + i2]; }
  double at(int i1, int i2) const { return m[std::size_t(i1) * axis.n + i2]; }
};

/// Exact O(n^2) evaluation via per-parity column sums: the y marginalization
/// factorizes because a photon pair reaches exactly the factor rows whose
/// index parities match, once each. Unit sum.
inline RowCorrelationMap row_correlation_map(const TwoPhotonState& s) {
  const Grid2D pg = photon_grid(s);
  const Grid2D& fg = s.sum_factor.grid;
  const int nf = fg.n, np = pg.n, cf = nf / 2;

  // column sums of |factor|^2 split by row-index parity: [parity][x index]
  std::vector<double> pa[2] = {std::vector<double>(nf, 0.0), std::vector<double>(nf, 0.0)};
  std::vector<double> pb[2] = {std::vector<double>(nf, 0.0), std::vector<double>(nf, 0.0)};
  for (int r = 0; r < nf; ++r)
    for (int c = 0; c < nf; ++c) {
      pa[r % 2][c] += std::norm(s.sum_factor.at(r, c));
      pb[r % 2][c] += std::norm(s.diff_factor.at(r, c));
    }

  RowCorrelationMap out{pg, std::vector<double>(std::size_t(np) * np, 0.0)};
  long double total = 0;
  for (int i1 = 0; i1 < np; ++i1)
    for (int i2 = 0; i2 < np; ++i2) {
      const int sx = i1 + i2 - np + cf;
      const int dx = i1 - i2 + cf;
      if (sx < 0 || sx >= nf || dx < 0 || dx >= nf) continue;
      const double v = pa[0][sx] * pb[0][dx] + pa[1][sx] * pb[1][dx];
      out.at(i1, i2) = v;
      total += v;
    }
  if (!(total > 0))
    throw std::domain_error("row_correlation_map: map is identically zero");
  const double inv = double(1.0L / total);
  for (double& x : out.m) x *= inv;
  return out;
}

// ---------------------------------------------------------------------------
// Ridge extraction

/// One diagonal ridge of a row correlation map: photon-2 x sits near
/// (-photon-1 x + offset), i.e. the pair-sum coordinate clusters at `offset`.
struct RidgeCluster {
  double offset = 0.;    ///< pair-sum coordinate of the ridge [axis units]
  double strength = 0.;  ///< mean peak value (map is unit-sum normalized)
  int members = 0;       ///< number of column peaks merged into this cluster
};

struct RidgeParams {
  double threshold = 0.5;      ///< per-column local maxima >= threshold * column max
  double column_floor = 1e-3;  ///< skip columns with max < column_floor * map max
  double cluster_floor = 0.05; ///< drop clusters weaker than this fraction of the best
  double radius_bins = 2.0;    ///< greedy merge radius along the offset axis
};

/// Collect per-column local maxima of the map and greedily merge them into
/// clusters along the pair-sum offset axis. Strong peaks seed clusters first;
/// centers are strength-weighted means. Returns clusters sorted by offset.
inline std::vector<RidgeCluster> ridge_extract(const RowCorrelationMap& map,
                                               const RidgeParams& p = {}) {
  if (!(p.threshold > 0) || p.threshold > 1)
    throw std::invalid_argument("ridge_extract: threshold must be in (0, 1]");
  if (!(p.radius_bins > 0))
    throw std::invalid_argument("ridge_extract: radius must be positive");
  const int n = map.axis.n;
  const double pitch = map.axis.pitch;
  double global = 0;
  for (double v : map.m) global = std::max(global, v);
  if (!(global > 0)) return {};

  struct Peak { double offset; double value; };
  std::vector<Peak> peaks;
  for (int i1 = 0; i1 < n; ++i1) {
    double colmax = 0;
    for (int i2 = 0; i2 < n; ++i2) colmax = std::max(colmax, map.at(i1, i2));
    if (colmax < p.column_floor * global) continue;
    for (int i2 = 0; i2 < n; ++i2) {
      const double v = map.at(i1, i2);
      if (v < p.threshold * colmax) continue;
      const double prev = i2 > 0 ? map.at(i1, i2 - 1) : -1.0;
      const double next = i2 + 1 < n ? map.at(i1, i2 + 1) : -1.0;
      if (v >= prev && v > next) {  // local max; plateaus resolve to their right edge
        peaks.push_back({map.axis.coord(i1) + map.axis.coord(i2), v});
      }
    }
  }
  if (peaks.empty()) return {};

  std::sort(peaks.begin(), peaks.end(), [](const Peak& a, const Peak& b) {
    if (a.value != b.value) return a.value > b.value;
    if (std::abs(a.offset) != std::abs(b.offset))
      return std::abs(a.offset) < std::abs(b.offset);
    return a.offset < b.offset;
  });

  struct Cluster { double center; double wsum; double vsum; int members; };
  std::vector<Cluster> clusters;
  const double merge = p.radius_bins * pitch;
  for (const Peak& pk : peaks) {
    // nearest cluster within the merge radius; distance ties keep the earlier
    // (stronger-seeded) cluster
    Cluster* best = nullptr;
    double bestDist = 0;
    for (Cluster& cl : clusters) {
      const double d = std::abs(pk.offset - cl.center);
      if (d <= merge && (best == nullptr || d < bestDist)) {
        bestDist = d;
        best = &cl;
      }
    }
    if (best) {
      best->wsum += pk.value;
      best->vsum += pk.value * pk.offset;
      best->members += 1;
      best->center = best->vsum / best->wsum;
    } else {
      clusters.push_back({pk.offset, pk.value, pk.value * pk.offset, 1});
    }
  }

  std::vector<RidgeCluster> out;
  double strongest = 0;
  for (const Cluster& cl : clusters)
    strongest = std::max(strongest, cl.wsum / cl.members);
  for (const Cluster& cl : clusters) {
    const double mean = cl.wsum / cl.members;
    if (mean < p.cluster_floor * strongest) continue;
    out.push_back({cl.center, mean, cl.members});
  }
  std::sort(out.begin(), out.end(),
            [](const RidgeCluster& a, const RidgeCluster& b) { return a.offset < b.offset; });
  return out;
}

// ---------------------------------------------------------------------------
// Brute force

/// Dense photon-lattice joint probability density |amplitude|^2, indexed
/// [i1y][i1x][i2y][i2x]. Guarded to n <= 16 (n^4 doubles).
struct Jpd4 {
  int n = 0;
  double pitch = 0.;
  std::vector<double> v;

  double& at(int r1, int c1, int r2, int c2) {
    return v[((std::size_t(r1) * n + c1) * n + r2) * n + c2];
  }
  double at(int r1, int c1, int r2, int c2) const {
    return v[((std::size_t(r1) * n + c1) * n + r2) * n + c2];
  }
};

inline Jpd4 brute_force_jpd(const TwoPhotonState& s) {
  const Grid2D pg = photon_grid(s);
  if (pg.n > 16)
    throw std::invalid_argument("brute_force_jpd: photon lattice larger than 16 bins");
  Jpd4 jpd{pg.n, pg.pitch, std::vector<double>(std::size_t(pg.n) * pg.n * pg.n * pg.n, 0.0)};
  const double n2 = s.norm_constant * s.norm_constant;
  for (int r1 = 0; r1 < pg.n; ++r1)
    for (int c1 = 0; c1 < pg.n; ++c1)
      for (int r2 = 0; r2 < pg.n; ++r2)
        for (int c2 = 0; c2 < pg.n; ++c2) {
          const int sy = factor_sum_index(s, r1, r2), sx = factor_sum_index(s, c1, c2);
          const int dy = factor_diff_index(s, r1, r2), dx = factor_diff_index(s, c1, c2);
          if (sy < 0 || sx < 0 || dy < 0 || dx < 0) continue;
          jpd.at(r1, c1, r2, c2) = n2 * std::norm(s.sum_factor.at(sy, sx)) *
                                   std::norm(s.diff_factor.at(dy, dx));
        }
  return jpd;
}

// ---------------------------------------------------------------------------
// Camera mapping

enum class CameraPlane { FarField, NearField };

/// Ideal single-lens imaging between the shaping/crystal plane and a camera a
/// fixed span away: the far-field arm focuses the angular spectrum (focal =
/// span/2), the near-field arm re-images the source at unit magnification,
/// inverted (focal = span/4).
struct ImagingConfig {
  double span = 0.4;                    ///< source-to-camera distance [m]
  CameraPlane plane = CameraPlane::FarField;
  double detected_wavelength = 810e-9;  ///< wavelength at the camera [m]

  double focal() const { return plane == CameraPlane::FarField ? span / 2 : span / 4; }
};

inline void validate(const ImagingConfig& cfg, const char* who) {
  if (!(cfg.span > 0) || !std::isfinite(cfg.span))
    throw std::invalid_argument(std::string(who) + ": span must be positive");
  if (!(cfg.detected_wavelength > 0) || !std::isfinite(cfg.detected_wavelength))
    throw std::invalid_argument(std::string(who) + ": wavelength must be positive");
}

/// Far-field arm: transverse wavenumber q lands at x = focal * wavelength *
/// q / (2 pi) on the camera; the lattice is relabeled accordingly.
/// Near-field arm: unit magnification with inversion; same pitch, indices
/// flipped about the center (the mirror-less edge sample maps to itself).
inline RealField2D map_to_camera(const RealField2D& map, const ImagingConfig& cfg) {
  validate(cfg, "map_to_camera");
  const Grid2D& g = map.grid;
  validate(g, "map_to_camera");
  if (cfg.plane == CameraPlane::FarField) {
    if (g.domain != Domain::Momentum)
      throw std::invalid_argument("map_to_camera: far-field arm expects a momentum map");
    RealField2D out = map;
    out.grid = Grid2D{g.n, cfg.focal() * cfg.detected_wavelength * g.pitch / (2.0 * pi),
                      Domain::Position};
    return out;
  }
  if (g.domain != Domain::Position)
    throw std::invalid_argument("map_to_camera: near-field arm expects a position map");
  RealField2D out(g);
  for (int r = 0; r < g.n; ++r)
    for (int c = 0; c < g.n; ++c)
      out.at(r, c) = map.at((g.n - r) % g.n, (g.n - c) % g.n);
  return out;
}

/// Ring-averaged profile: samples grouped by nearest-integer radius in pitch
/// units; returns (radius, mean value) up to n/2 rings.
inline std::vector<std::pair<double, double>> radial_profile(const RealField2D& map) {
  validate(map.grid, "radial_profile");
  const Grid2D& g = map.grid;
  const int nr = g.n / 2 + 1;
  std::vector<long double> acc(nr, 0.0L);
  std::vector<long long> cnt(nr, 0);
  for (int r = 0; r < g.n; ++r)
    for (int c = 0; c < g.n; ++c) {
      const long long k = std::llround(std::hypot(g.coord(c), g.coord(r)) / g.pitch);
      if (k >= nr) continue;
      acc[k] += map.at(r, c);
      cnt[k] += 1;
    }
  std::vector<std::pair<double, double>> out;
  for (int k = 0; k < nr; ++k)
    if (cnt[k] > 0) out.push_back({k * g.pitch, double(acc[k] / cnt[k])});
  return out;
}

}  // namespace spdcsim
