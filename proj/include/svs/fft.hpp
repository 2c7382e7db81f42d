#pragma once

#include <complex>
#include <vector>

#include "svs/common.hpp"

namespace svs {

// Iterative radix-2 Cooley-Tukey FFT, in place. n must be a power of two.
inline void fft_inplace(std::vector<std::complex<double>>& a, bool inverse) {
  size_t n = a.size();
  if (n == 0 || (n & (n - 1)) != 0)
    throw ValueError("fft_inplace: length must be a power of two");
  // bit reversal permutation
  for (size_t i = 1, j = 0; i < n; ++i) {
    size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  const double pi = 3.14159265358979323846;
  for (size_t len = 2; len <= n; len <<= 1) {
    double ang = 2.0 * pi / static_cast<double>(len) * (inverse ? 1.0 : -1.0);
    std::complex<double> wl(std::cos(ang), std::sin(ang));
    for (size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (size_t j = 0; j < len / 2; ++j) {
        std::complex<double> u = a[i + j];
        std::complex<double> v = a[i + j + len / 2] * w;
        a[i + j] = u + v;
        a[i + j + len / 2] = u - v;
        w *= wl;
      }
    }
  }
  if (inverse)
    for (auto& x : a) x /= static_cast<double>(n);
}

// Forward real-input FFT returning the n/2+1 non-redundant bins.
inline std::vector<std::complex<double>> rfft(const std::vector<double>& x) {
  std::vector<std::complex<double>> a(x.begin(), x.end());
  fft_inplace(a, false);
  a.resize(x.size() / 2 + 1);
  return a;
}

// Inverse of rfft for a real signal of length n (power of two).
inline std::vector<double> irfft(const std::vector<std::complex<double>>& half,
                                 size_t n) {
  if (half.size() != n / 2 + 1) throw ShapeError("irfft: bin count mismatch");
  std::vector<std::complex<double>> a(n);
  for (size_t i = 0; i <= n / 2; ++i) a[i] = half[i];
  for (size_t i = n / 2 + 1; i < n; ++i) a[i] = std::conj(half[n - i]);
  fft_inplace(a, true);
  std::vector<double> out(n);
  for (size_t i = 0; i < n; ++i) out[i] = a[i].real();
  return out;
}

}  // namespace svs
