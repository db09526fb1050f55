// Copyright (c) 2026 spdcsim contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace spdcsim {

/// Purpose tags separating the independent random streams of a run.
/// Values are part of the reproducibility contract: renumbering changes
/// every seeded artifact.
enum class Stream : std::uint64_t {
  MaskPhase = 1,
  TailorInit = 2,
  PairPlus = 3,
  PairMinus = 4,
  FramePairCount = 5,
  Detection = 6,
  DarkCount = 7,
  DarkPlace = 8,
  PairClass = 9,
};

/// Stateless counter-keyed generator. Every draw is a pure hash of
/// (seed, stream, counter), so results never depend on call order and any
/// single draw can be reproduced in isolation. Mixing is three rounds of the
/// splitmix64 finalizer.
struct CounterRng {
  std::uint64_t seed = 0;

  static constexpr std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t u64(Stream stream, std::uint64_t counter) const {
    std::uint64_t h = mix(seed + 0x9e3779b97f4a7c15ULL);
    h = mix(h ^ ((std::uint64_t)stream + 0xff51afd7ed558ccdULL) * 0xc4ceb9fe1a85ec53ULL);
    h = mix(h ^ (counter + 0x452821e638d01377ULL) * 0x9e3779b97f4a7c15ULL);
    return h;
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform(Stream stream, std::uint64_t counter) const {
    return double(u64(stream, counter) >> 11) * 0x1.0p-53;
  }

  /// Uniform integer in [0, bound) by modulo; bound must be > 0. The modulo
  /// bias is < bound / 2^64, irrelevant at the bounds used here.
  std::uint64_t below(Stream stream, std::uint64_t counter, std::uint64_t bound) const {
    if (bound == 0) throw std::invalid_argument("CounterRng::below: bound must be > 0");
    return u64(stream, counter) % bound;
  }

  /// Poisson draw by cumulative inversion from a single uniform.
  /// Valid for mean in (0, 700) before the initial weight underflows.
  std::uint64_t poisson(double mean, Stream stream, std::uint64_t counter) const {
    if (!(mean >= 0) || mean >= 700.0)
      throw std::invalid_argument("CounterRng::poisson: mean must be in [0, 700)");
    if (mean == 0) return 0;
    const double u = uniform(stream, counter);
    double p = std::exp(-mean), cdf = p;
    std::uint64_t k = 0;
    const std::uint64_t cap = (std::uint64_t)(mean + 60.0 * std::sqrt(mean) + 120.0);
    while (u > cdf && k < cap) {
      ++k;
      p *= mean / double(k);
      cdf += p;
    }
    return k;
  }

  /// Binomial draw by cumulative inversion from a single uniform; intended
  /// for the small-probability regime (n*p up to a few hundred).
  std::uint64_t binomial(std::uint64_t n, double p, Stream stream,
                         std::uint64_t counter) const {
    if (!(p >= 0.0) || p > 1.0)
      throw std::invalid_argument("CounterRng::binomial: p must be in [0, 1]");
    if (n == 0 || p == 0.0) return 0;
    if (p == 1.0) return n;
    const double logq = std::log1p(-p);
    if (double(n) * logq < -700.0)
      throw std::invalid_argument("CounterRng::binomial: n*p too large for inversion");
    const double u = uniform(stream, counter);
    double w = std::exp(double(n) * logq), cdf = w;
    std::uint64_t k = 0;
    const double r = p / (1.0 - p);
    while (u > cdf && k < n) {
      w *= r * double(n - k) / double(k + 1);
      ++k;
      cdf += w;
    }
    return k;
  }
};

/// Cumulative table over a non-negative weight vector for O(log n) inverse-CDF
/// draws. Weights are accumulated in extended precision and the final entry is
/// pinned to exactly 1.
class DiscreteSampler {
 public:
  explicit DiscreteSampler(const std::vector<double>& weights) {
    if (weights.empty()) throw std::invalid_argument("DiscreteSampler: empty weights");
    long double total = 0;
    for (double w : weights) {
      if (!(w >= 0) || !std::isfinite(w))
        throw std::invalid_argument("DiscreteSampler: weights must be finite and >= 0");
      total += w;
    }
    if (!(total > 0)) throw std::invalid_argument("DiscreteSampler: all weights are zero");
    cdf_.resize(weights.size());
    long double acc = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      acc += weights[i];
      cdf_[i] = double(acc / total);
    }
    cdf_.back() = 1.0;
  }

  std::size_t size() const { return cdf_.size(); }

  /// Smallest index i with u < cdf[i]; u must be in [0, 1).
  std::size_t index_for(double u) const {
    std::size_t lo = 0, hi = cdf_.size() - 1;
    while (lo < hi) {
      const std::size_t midpoint = (lo + hi) / 2;
      if (u < cdf_[midpoint]) hi = midpoint; else lo = midpoint + 1;
    }
    return lo;
  }

  std::size_t draw(const CounterRng& rng, Stream stream, std::uint64_t counter) const {
    return index_for(rng.uniform(stream, counter));
  }

 private:
  std::vector<double> cdf_;
};

}  // namespace spdcsim
