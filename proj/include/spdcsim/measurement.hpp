// Copyright (c) 2026 spdcsim contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <utility>
#include <vector>

#include "fft.hpp"
#include "observables.hpp"
#include "rng.hpp"
#include "state.hpp"

namespace spdcsim {

/// Binary single-photon camera: per-photon detection probability and a
/// per-pixel, per-frame dark count probability. The pixel lattice is the
/// state's photon lattice.
struct CameraSpec {
  double efficiency = 1.0;
  double dark_count_prob = 0.0;
};

inline void validate(const CameraSpec& c, const char* who) {
  if (!(c.efficiency >= 0) || !(c.efficiency <= 1) || !std::isfinite(c.efficiency))
    throw std::invalid_argument(std::string(who) + ": efficiency must be in [0, 1]");
  if (!(c.dark_count_prob >= 0) || !(c.dark_count_prob < 1) ||
      !std::isfinite(c.dark_count_prob))
    throw std::invalid_argument(std::string(who) + ": dark count prob must be in [0, 1)");
}

/// One down-converted photon pair, as pixel indices on the photon lattice.
struct PhotonPair {
  int i1x, i1y, i2x, i2y;
};

namespace detail {

/// Exact inverse-CDF sampler for the pair distribution. On the shared
/// factor lattice only (sum, diff) index pairs with matching per-axis
/// parity correspond to photon pixels, and those pairs are in one-to-one
/// correspondence with them. Drawing one of the four (row, column) parity
/// classes with probability proportional to Sp[class] * Sc[class] and then
/// each factor index within that class therefore reproduces the state's
/// joint distribution with no rounding step at all.
class PairSampler {
 public:
  explicit PairSampler(const TwoPhotonState& s) : n_(s.sum_factor.grid.n) {
    if (s.rep != StateRep::Momentum || s.arg_stride != 1)
      throw std::invalid_argument("PairSampler: momentum-representation input required");
    const int n = n_;
    std::vector<double> a(std::size_t(n) * n), b(std::size_t(n) * n);
    long double sp[4] = {}, sc[4] = {};
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < n; ++c) {
        const std::size_t i = std::size_t(r) * n + c;
        a[i] = std::norm(s.sum_factor.v[i]);
        b[i] = std::norm(s.diff_factor.v[i]);
        sp[(r % 2) * 2 + c % 2] += a[i];
        sc[(r % 2) * 2 + c % 2] += b[i];
      }
    std::vector<double> cw(4);
    for (int k = 0; k < 4; ++k) cw[std::size_t(k)] = double(sp[k] * sc[k]);
    class_ = std::make_unique<DiscreteSampler>(cw);
    std::vector<double> masked(std::size_t(n) * n);
    const auto restricted = [&](const std::vector<double>& w, int cls) {
      for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c) {
          const std::size_t i = std::size_t(r) * n + c;
          masked[i] = ((r % 2) * 2 + c % 2) == cls ? w[i] : 0.0;
        }
      return std::make_unique<DiscreteSampler>(masked);
    };
    for (int k = 0; k < 4; ++k)
      if (cw[std::size_t(k)] > 0) {
        sum_[k] = restricted(a, k);
        diff_[k] = restricted(b, k);
      }
  }

  /// Draw number `ctr` consumes counter `ctr` on the PairClass, PairPlus
  /// and PairMinus streams.
  PhotonPair draw(const CounterRng& rng, std::uint64_t ctr) const {
    const std::size_t cls = class_->draw(rng, Stream::PairClass, ctr);
    const std::size_t si = sum_[cls]->draw(rng, Stream::PairPlus, ctr);
    const std::size_t di = diff_[cls]->draw(rng, Stream::PairMinus, ctr);
    PhotonPair p{};
    const auto one_axis = [this](int s, int d, int& i1, int& i2) {
      i1 = (s + d) / 2;  // exact: s and d share parity within a class
      i2 = s - i1 + n_ / 2;
    };
    one_axis(int(si % n_), int(di % n_), p.i1x, p.i2x);
    one_axis(int(si / n_), int(di / n_), p.i1y, p.i2y);
    return p;
  }

 private:
  int n_;
  std::unique_ptr<DiscreteSampler> class_;
  std::unique_ptr<DiscreteSampler> sum_[4], diff_[4];
};

}  // namespace detail

/// Draw photon pairs from the state's joint distribution: a factor-lattice
/// parity class, then the pair-sum index from |sum_factor|^2 and the
/// pair-difference index from |diff_factor|^2 within that class. Both
/// recorded pair coordinates are exact; draw i consumes counter i on the
/// PairClass / PairPlus / PairMinus streams.
inline std::vector<PhotonPair> sample_pairs(const TwoPhotonState& s, std::size_t count,
                                            std::uint64_t seed) {
  if (s.rep != StateRep::Momentum || s.arg_stride != 1)
    throw std::invalid_argument("sample_pairs: momentum-representation input required");
  const detail::PairSampler sampler(s);
  const CounterRng rng{seed};
  const int n = s.sum_factor.grid.n;
  std::vector<PhotonPair> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    const PhotonPair p = sampler.draw(rng, i);
    if (p.i1x < 0 || p.i1x >= n || p.i1y < 0 || p.i1y >= n || p.i2x < 0 || p.i2x >= n ||
        p.i2y < 0 || p.i2y >= n)
      throw std::logic_error("sample_pairs: drawn pair left the lattice");
    out[i] = p;
  }
  return out;
}

/// Stack of binary frames, one bit per pixel, rows padded to whole bytes.
struct FrameStack {
  Grid2D grid;
  std::size_t frames = 0;
  std::size_t row_bytes = 0;
  std::vector<std::uint8_t> bits;

  static FrameStack create(const Grid2D& g, std::size_t frames) {
    validate(g, "FrameStack");
    FrameStack s;
    s.grid = g;
    s.frames = frames;
    s.row_bytes = (std::size_t(g.n) + 7) / 8;
    s.bits.assign(frames * g.n * s.row_bytes, 0);
    return s;
  }

  bool get(std::size_t f, int r, int c) const {
    return (bits[(f * grid.n + r) * row_bytes + c / 8] >> (c % 8)) & 1;
  }
  void set(std::size_t f, int r, int c) {
    bits[(f * grid.n + r) * row_bytes + c / 8] |= std::uint8_t(1u << (c % 8));
  }
};

/// Render seeded camera frames: pair count ~ Poisson(mean_pairs) per frame,
/// each photon kept with probability `efficiency`, dark counts drawn as a
/// per-frame binomial over all pixels and placed uniformly; landing photons
/// OR into the binary frame. Every draw is counter-keyed by (frame, index),
/// so frames are independent of rendering order.
inline FrameStack render_frames(const TwoPhotonState& s, const CameraSpec& cam,
                                std::size_t frames, double mean_pairs,
                                std::uint64_t seed) {
  if (s.rep != StateRep::Momentum || s.arg_stride != 1)
    throw std::invalid_argument("render_frames: momentum-representation input required");
  validate(cam, "render_frames");
  if (!(mean_pairs >= 0) || mean_pairs >= 500.0)
    throw std::invalid_argument("render_frames: mean_pairs must be in [0, 500)");
  if (frames == 0) throw std::invalid_argument("render_frames: frames must be >= 1");
  if (frames >= (std::uint64_t(1) << 32))
    throw std::invalid_argument("render_frames: frame count exceeds the counter budget");

  const Grid2D pg = photon_grid(s);
  const int n = pg.n;
  const detail::PairSampler sampler(s);
  const CounterRng rng{seed};
  FrameStack stack = FrameStack::create(pg, frames);

  const std::uint64_t npix = std::uint64_t(n) * std::uint64_t(n);
  for (std::size_t f = 0; f < frames; ++f) {
    const std::uint64_t fbase = std::uint64_t(f) << 32;
    const std::uint64_t m = rng.poisson(mean_pairs, Stream::FramePairCount, f);
    for (std::uint64_t j = 0; j < m; ++j) {
      const std::uint64_t ctr = fbase | j;
      const PhotonPair p = sampler.draw(rng, ctr);
      if (rng.uniform(Stream::Detection, ctr * 2) < cam.efficiency)
        stack.set(f, p.i1y, p.i1x);
      if (rng.uniform(Stream::Detection, ctr * 2 + 1) < cam.efficiency)
        stack.set(f, p.i2y, p.i2x);
    }
    const std::uint64_t darks = rng.binomial(npix, cam.dark_count_prob, Stream::DarkCount, f);
    for (std::uint64_t t = 0; t < darks; ++t) {
      const std::uint64_t pix = rng.below(Stream::DarkPlace, fbase | t, npix);
      stack.set(f, int(pix / std::uint64_t(n)), int(pix % std::uint64_t(n)));
    }
  }
  return stack;
}

// ---------------------------------------------------------------------------
// Correlation estimation

enum class EstimateKind { Sum, RowMap };

/// Pixel-pair covariance accumulated into a physics-aligned 2D summary.
///
/// Sum: histogram over the pair-sum coordinate lattice (same pitch and size
/// as the pixel lattice); pixel pairs whose sum bin leaves the lattice are
/// dropped. RowMap: ordered pixel pairs grouped by their two column indices,
/// rows marginalized.
///
/// The same-pixel diagonal is excluded: a binary pixel's self-product carries
/// singles shot noise, not pair correlation. `raw` keeps the signed
/// estimate, `value` clips negatives to zero, `se` is a delete-group
/// jackknife standard error over at most 32 frame groups.
struct CorrelationEstimate {
  EstimateKind kind = EstimateKind::Sum;
  Grid2D axis;
  std::vector<double> value;
  std::vector<double> raw;
  std::vector<double> se;

  double at(int r, int c) const { return value[std::size_t(r) * axis.n + c]; }
};

namespace detail {

/// Per-frame set-pixel extraction from the packed rows.
inline void set_pixels_of_frame(const FrameStack& st, std::size_t f,
                                std::vector<std::pair<int, int>>& out) {
  out.clear();
  const int n = st.grid.n;
  for (int r = 0; r < n; ++r) {
    const std::uint8_t* row = st.bits.data() + (f * n + r) * st.row_bytes;
    for (std::size_t byte = 0; byte < st.row_bytes; ++byte) {
      std::uint8_t v = row[byte];
      while (v) {
        const int bit = int(byte) * 8 + std::countr_zero(v);
        if (bit < n) out.push_back({r, bit});
        v = std::uint8_t(v & (v - 1));
      }
    }
  }
}

/// Mean-product term for the Sum kind: for each pair-sum bin, the sum of
/// m_i * m_j over unordered pixel pairs mapping there, via one linear
/// autoconvolution with the same-pixel (even-offset) diagonal removed.
inline std::vector<double> sum_mean_product(const std::vector<double>& mean, int n) {
  const std::vector<double> conv = linear_convolve_2d(mean, mean, n);
  const int full = 2 * n - 1, h = n / 2;
  std::vector<double> out(std::size_t(n) * n, 0.0);
  for (int sr = 0; sr < n; ++sr) {
    const int ur = sr + h;  // conv index = sum index + n/2 per axis
    for (int sc = 0; sc < n; ++sc) {
      const int uc = sc + h;
      double d = conv[std::size_t(ur) * full + uc];
      if (ur % 2 == 0 && uc % 2 == 0) {
        const double mi = mean[std::size_t(ur / 2) * n + uc / 2];
        d -= mi * mi;
      }
      out[std::size_t(sr) * n + sc] = 0.5 * d;
    }
  }
  return out;
}

/// Mean-product term for the RowMap kind: ordered pixel pairs (i != j)
/// grouped by column indices.
inline std::vector<double> rowmap_mean_product(const std::vector<double>& mean, int n) {
  std::vector<double> colsum(n, 0.0), colsq(n, 0.0);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) {
      const double m = mean[std::size_t(r) * n + c];
      colsum[c] += m;
      colsq[c] += m * m;
    }
  std::vector<double> out(std::size_t(n) * n);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) {
      double t = colsum[a] * colsum[b];
      if (a == b) t -= colsq[a];
      out[std::size_t(a) * n + b] = t;
    }
  return out;
}

}  // namespace detail

inline CorrelationEstimate estimate_correlations(const FrameStack& st, EstimateKind kind) {
  if (st.frames < 2)
    throw std::invalid_argument("estimate_correlations: need at least 2 frames");
  const int n = st.grid.n;
  const std::size_t npix = st.grid.size();
  const std::size_t G = std::min<std::size_t>(st.frames, 32);

  std::vector<std::vector<double>> gcount(G, std::vector<double>(npix, 0.0));
  std::vector<std::vector<double>> gpairs(G, std::vector<double>(std::size_t(n) * n, 0.0));
  std::vector<std::size_t> gframes(G, 0);

  std::vector<std::pair<int, int>> px;
  const int h = n / 2;
  for (std::size_t f = 0; f < st.frames; ++f) {
    const std::size_t g = f * G / st.frames;
    gframes[g] += 1;
    detail::set_pixels_of_frame(st, f, px);
    auto& cnt = gcount[g];
    auto& pair = gpairs[g];
    for (const auto& [r, c] : px) cnt[std::size_t(r) * n + c] += 1.0;
    if (kind == EstimateKind::Sum) {
      for (std::size_t i = 0; i < px.size(); ++i)
        for (std::size_t j = i + 1; j < px.size(); ++j) {
          const int sr = px[i].first + px[j].first - h;
          const int sc = px[i].second + px[j].second - h;
          if (sr < 0 || sr >= n || sc < 0 || sc >= n) continue;
          pair[std::size_t(sr) * n + sc] += 1.0;
        }
    } else {
      for (std::size_t i = 0; i < px.size(); ++i)
        for (std::size_t j = i + 1; j < px.size(); ++j) {
          pair[std::size_t(px[i].second) * n + px[j].second] += 1.0;
          pair[std::size_t(px[j].second) * n + px[i].second] += 1.0;
        }
    }
  }

  auto estimate_from = [&](const std::vector<double>& count,
                           const std::vector<double>& pairs, double frames) {
    std::vector<double> mean(npix);
    for (std::size_t i = 0; i < npix; ++i) mean[i] = count[i] / frames;
    std::vector<double> prod = kind == EstimateKind::Sum
                                   ? detail::sum_mean_product(mean, n)
                                   : detail::rowmap_mean_product(mean, n);
    std::vector<double> est(prod.size());
    for (std::size_t i = 0; i < est.size(); ++i) est[i] = pairs[i] / frames - prod[i];
    return est;
  };

  std::vector<double> count(npix, 0.0), pairs(std::size_t(n) * n, 0.0);
  for (std::size_t g = 0; g < G; ++g) {
    for (std::size_t i = 0; i < npix; ++i) count[i] += gcount[g][i];
    for (std::size_t i = 0; i < pairs.size(); ++i) pairs[i] += gpairs[g][i];
  }

  CorrelationEstimate out;
  out.kind = kind;
  out.axis = st.grid;
  out.raw = estimate_from(count, pairs, double(st.frames));
  out.value.resize(out.raw.size());
  for (std::size_t i = 0; i < out.raw.size(); ++i) out.value[i] = std::max(0.0, out.raw[i]);

  // delete-group jackknife
  out.se.assign(out.raw.size(), 0.0);
  if (G >= 2) {
    std::vector<std::vector<double>> theta(G);
    std::vector<double> cnt_g(npix), pr_g(pairs.size());
    for (std::size_t g = 0; g < G; ++g) {
      for (std::size_t i = 0; i < npix; ++i) cnt_g[i] = count[i] - gcount[g][i];
      for (std::size_t i = 0; i < pr_g.size(); ++i) pr_g[i] = pairs[i] - gpairs[g][i];
      theta[g] = estimate_from(cnt_g, pr_g, double(st.frames - gframes[g]));
    }
    for (std::size_t i = 0; i < out.se.size(); ++i) {
      double mean_theta = 0;
      for (std::size_t g = 0; g < G; ++g) mean_theta += theta[g][i];
      mean_theta /= double(G);
      double ss = 0;
      for (std::size_t g = 0; g < G; ++g) {
        const double d = theta[g][i] - mean_theta;
        ss += d * d;
      }
      out.se[i] = std::sqrt(ss * double(G - 1) / double(G));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Convergence

struct ConvergencePoint {
  std::size_t frames = 0;
  double mean_l1 = 0.;  ///< L1 distance of unit-normalized maps, seed average
};

struct ConvergenceReport {
  EstimateKind kind = EstimateKind::Sum;
  std::vector<ConvergencePoint> points;
  double slope = 0.;  ///< log-log least-squares slope of mean_l1 vs frames
};

/// Run the full chain (render, estimate, clip, normalize) at each frame
/// count, seed-averaged, against the exact observable of the state.
inline ConvergenceReport convergence_report(const TwoPhotonState& s, const CameraSpec& cam,
                                            const std::vector<std::size_t>& frame_counts,
                                            int seeds, double mean_pairs,
                                            EstimateKind kind, std::uint64_t base_seed) {
  if (frame_counts.size() < 2)
    throw std::invalid_argument("convergence_report: need at least 2 frame counts");
  if (seeds < 1) throw std::invalid_argument("convergence_report: seeds must be >= 1");

  std::vector<double> exact;
  if (kind == EstimateKind::Sum) {
    exact = sum_projection(s).v;
  } else {
    exact = row_correlation_map(s).m;
  }

  ConvergenceReport rep;
  rep.kind = kind;
  for (std::size_t fc : frame_counts) {
    double acc = 0;
    for (int sd = 0; sd < seeds; ++sd) {
      const FrameStack st = render_frames(s, cam, fc, mean_pairs,
                                          base_seed + std::uint64_t(sd) * 0x10001ULL);
      const CorrelationEstimate est = estimate_correlations(st, kind);
      long double tot = 0;
      for (double v : est.value) tot += v;
      double l1 = 2.0;  // maximal distance when the estimate is empty
      if (tot > 0) {
        long double d = 0;
        for (std::size_t i = 0; i < exact.size(); ++i)
          d += std::abs(est.value[i] / double(tot) - exact[i]);
        l1 = double(d);
      }
      acc += l1;
    }
    rep.points.push_back({fc, acc / seeds});
  }

  // least-squares slope in log-log
  const std::size_t m = rep.points.size();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& p : rep.points) {
    const double lx = std::log(double(p.frames));
    const double ly = std::log(std::max(p.mean_l1, 1e-300));
    sx += lx; sy += ly; sxx += lx * lx; sxy += lx * ly;
  }
  rep.slope = (double(m) * sxy - sx * sy) / (double(m) * sxx - sx * sx);
  return rep;
}

}  // namespace spdcsim
