// Copyright (c) 2026 spdcsim contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <complex>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "field.hpp"

namespace spdcsim {

enum class FftDirection { Forward, Inverse };

namespace detail {

using cd = std::complex<double>;

inline bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

inline std::size_t next_pow2(std::size_t n) {
  std::size_t m = 1;
  while (m < n) m <<= 1;
  return m;
}

/// exp(-i*pi*num/den) with extended-precision angle evaluation.
inline cd unit_phase(long long num, long long den) {
  const long double a = -pi_l * (long double)num / (long double)den;
  return cd(double(std::cos(a)), double(std::sin(a)));
}

/// 1D DFT engine for a fixed even size: radix-2 when the size is a power of
/// two, Bluestein (chirp-z through a padded power of two) otherwise.
/// forward() computes the plain unscaled sum_j a_j exp(-2*pi*i*j*k/n).
class Fft1D {
 public:
  explicit Fft1D(std::size_t n) : n_(n) {
    if (n < 2) throw std::invalid_argument("Fft1D: size must be >= 2");
    if (is_pow2(n_)) {
      fill_twiddles(tw_, n_);
    } else {
      m_ = next_pow2(2 * n_ - 1);
      fill_twiddles(twm_, m_);
      chirp_.resize(n_);
      // exp(-i*pi*j^2/n); j^2 reduced mod 2n keeps the angle argument small.
      for (std::size_t j = 0; j < n_; ++j)
        chirp_[j] = unit_phase((long long)((j * j) % (2 * n_)), (long long)n_);
      bfft_.assign(m_, cd(0, 0));
      bfft_[0] = std::conj(chirp_[0]);
      for (std::size_t j = 1; j < n_; ++j)
        bfft_[j] = bfft_[m_ - j] = std::conj(chirp_[j]);
      pow2_transform(bfft_.data(), m_, twm_);
    }
  }

  std::size_t size() const { return n_; }

  void forward(cd* a) const {
    if (tw_.size()) {
      pow2_transform(a, n_, tw_);
    } else {
      bluestein(a);
    }
  }

  void inverse(cd* a) const {  // unscaled: sum_j a_j exp(+2*pi*i*j*k/n)
    for (std::size_t j = 0; j < n_; ++j) a[j] = std::conj(a[j]);
    forward(a);
    for (std::size_t j = 0; j < n_; ++j) a[j] = std::conj(a[j]);
  }

 private:
  static void fill_twiddles(std::vector<cd>& tw, std::size_t n) {
    tw.resize(n / 2);
    for (std::size_t k = 0; k < n / 2; ++k)
      tw[k] = unit_phase(2 * (long long)k, (long long)n);
  }

  /// In-place iterative Cooley-Tukey; tw holds exp(-2*pi*i*k/n), k < n/2.
  static void pow2_transform(cd* a, std::size_t n, const std::vector<cd>& tw) {
    for (std::size_t i = 1, j = 0; i < n; ++i) {
      std::size_t bit = n >> 1;
      for (; j & bit; bit >>= 1) j ^= bit;
      j ^= bit;
      if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
      const std::size_t stride = n / len;
      for (std::size_t blk = 0; blk < n; blk += len) {
        for (std::size_t k = 0; k < len / 2; ++k) {
          const cd w = tw[k * stride];
          cd& lo = a[blk + k];
          cd& hi = a[blk + k + len / 2];
          const cd t = hi * w;
          hi = lo - t;
          lo += t;
        }
      }
    }
  }

  void bluestein(cd* a) const {
    std::vector<cd> tmp(m_, cd(0, 0));
    for (std::size_t j = 0; j < n_; ++j) tmp[j] = a[j] * chirp_[j];
    pow2_transform(tmp.data(), m_, twm_);
    for (std::size_t j = 0; j < m_; ++j) tmp[j] *= bfft_[j];
    // unscaled inverse on the padded buffer
    for (auto& z : tmp) z = std::conj(z);
    pow2_transform(tmp.data(), m_, twm_);
    const double s = 1.0 / double(m_);
    for (std::size_t k = 0; k < n_; ++k) a[k] = std::conj(tmp[k]) * s * chirp_[k];
  }

  std::size_t n_ = 0;
  std::vector<cd> tw_;  // radix-2 path
  // Bluestein workspace
  std::size_t m_ = 0;
  std::vector<cd> twm_, chirp_, bfft_;
};

}  // namespace detail

/// Centered unitary 2D DFT.
///
/// With c = n/2, the forward transform computes
///   B[k] = (1/n) * sum_j f[j] * exp(-2*pi*i*(kx-c)*(jx-c)/n) * (same in y),
/// i.e. both input and output are indexed with the origin at sample n/2.
/// Inverse uses the conjugated kernel and the same 1/n scale, so the pair is
/// unitary and mutually inverse. The returned grid is conjugate_grid(input).
inline ComplexField2D dft2_centered(const ComplexField2D& f, FftDirection dir) {
  validate(f.grid, "dft2_centered");
  const int n = f.grid.n;
  if (f.v.size() != f.grid.size())
    throw std::invalid_argument("dft2_centered: field storage does not match grid");
  const detail::Fft1D plan((std::size_t)n);
  const int h = n / 2;

  ComplexField2D out(conjugate_grid(f.grid));
  // Index rotation by n/2 on both axes re-bases the centered lattice onto the
  // standard DFT lattice; for even n the same rotation undoes itself.
  std::vector<std::complex<double>> buf((std::size_t)n);

  // rows (y fixed), with pre/post rotation folded into the copy indices
  ComplexField2D mid(out.grid);
  for (int r = 0; r < n; ++r) {
    const int rs = (r + h) % n;
    for (int c = 0; c < n; ++c) buf[(std::size_t)c] = f.at(rs, (c + h) % n);
    if (dir == FftDirection::Forward)
      plan.forward(buf.data());
    else
      plan.inverse(buf.data());
    for (int c = 0; c < n; ++c) mid.at(rs, (c + h) % n) = buf[(std::size_t)c];
  }
  // columns
  for (int c = 0; c < n; ++c) {
    const int cs = (c + h) % n;
    for (int r = 0; r < n; ++r) buf[(std::size_t)r] = mid.at((r + h) % n, cs);
    if (dir == FftDirection::Forward)
      plan.forward(buf.data());
    else
      plan.inverse(buf.data());
    for (int r = 0; r < n; ++r) out.at((r + h) % n, cs) = buf[(std::size_t)r];
  }

  const double s = 1.0 / double(n);
  for (auto& z : out.v) z *= s;
  return out;
}

/// Linear (zero-padded) convolution of two real n x n maps, returned as the
/// full (2n-1) x (2n-1) array with index [d] holding offset d - (n-1)... i.e.
/// out[a][b] = sum_{r,c} f[r][c] * g[a-r][b-c], 0 <= a,b <= 2n-2.
inline std::vector<double> linear_convolve_2d(const std::vector<double>& f,
                                              const std::vector<double>& g, int n) {
  if ((int)f.size() != n * n || (int)g.size() != n * n)
    throw std::invalid_argument("linear_convolve_2d: size mismatch");
  const int full = 2 * n - 1;
  const std::size_t m = detail::next_pow2((std::size_t)full);
  const detail::Fft1D plan(m);

  auto load = [&](const std::vector<double>& src) {
    std::vector<std::complex<double>> a(m * m, {0, 0});
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < n; ++c) a[(std::size_t)r * m + c] = src[(std::size_t)r * n + c];
    return a;
  };
  auto fft2 = [&](std::vector<std::complex<double>>& a, bool inv) {
    std::vector<std::complex<double>> buf(m);
    for (std::size_t r = 0; r < m; ++r) {
      std::complex<double>* row = a.data() + r * m;
      if (inv) plan.inverse(row); else plan.forward(row);
    }
    for (std::size_t c = 0; c < m; ++c) {
      for (std::size_t r = 0; r < m; ++r) buf[r] = a[r * m + c];
      if (inv) plan.inverse(buf.data()); else plan.forward(buf.data());
      for (std::size_t r = 0; r < m; ++r) a[r * m + c] = buf[r];
    }
  };

  auto A = load(f), B = load(g);
  fft2(A, false);
  fft2(B, false);
  for (std::size_t i = 0; i < A.size(); ++i) A[i] *= B[i];
  fft2(A, true);
  const double s = 1.0 / (double(m) * double(m));
  std::vector<double> out((std::size_t)full * full);
  for (int a = 0; a < full; ++a)
    for (int b = 0; b < full; ++b)
      out[(std::size_t)a * full + b] = A[(std::size_t)a * m + b].real() * s;
  return out;
}

}  // namespace spdcsim
