#pragma once

// Shared helpers for the unit and acceptance suites.

#include <cmath>
#include <vector>

#include "svs/tensor.hpp"
#include "svs/wav.hpp"

namespace svs::testutil {

inline Waveform make_sine(double hz, double seconds, int sr = 22050,
                          float amp = 0.5f) {
  Waveform w;
  w.sample_rate = sr;
  size_t n = static_cast<size_t>(seconds * sr);
  w.samples.resize(n);
  const double pi = 3.14159265358979323846;
  for (size_t i = 0; i < n; ++i)
    w.samples[i] = amp * static_cast<float>(std::sin(2.0 * pi * hz * i / sr));
  return w;
}

// Reconstruction SNR of `x` against an amplitude-matched sine at `hz`,
// fitted per 512-sample window over the interior (phase retrieval leaves a
// slowly drifting global phase, so the match is local).
inline double sine_fit_snr_db(const Waveform& x, double hz, size_t edge = 2048,
                              size_t win = 512) {
  const double pi = 3.14159265358979323846;
  double sig = 0.0, err = 0.0;
  size_t lo = edge, hi = x.samples.size() > edge ? x.samples.size() - edge : 0;
  for (size_t s = lo; s + win <= hi; s += win) {
    double ss = 0, sc = 0, cc = 0, xs = 0, xc = 0;
    for (size_t i = 0; i < win; ++i) {
      double ph = 2.0 * pi * hz * static_cast<double>(s + i) / x.sample_rate;
      double sn = std::sin(ph), cs = std::cos(ph);
      double v = x.samples[s + i];
      ss += sn * sn;
      sc += sn * cs;
      cc += cs * cs;
      xs += v * sn;
      xc += v * cs;
    }
    double det = ss * cc - sc * sc;
    if (std::abs(det) < 1e-12) continue;
    double a = (xs * cc - xc * sc) / det;
    double b = (xc * ss - xs * sc) / det;
    for (size_t i = 0; i < win; ++i) {
      double ph = 2.0 * pi * hz * static_cast<double>(s + i) / x.sample_rate;
      double f = a * std::sin(ph) + b * std::cos(ph);
      double v = x.samples[s + i];
      sig += f * f;
      err += (v - f) * (v - f);
    }
  }
  return 10.0 * std::log10(sig / std::max(err, 1e-30));
}

template <typename T>
Tensor<T> random_tensor(std::vector<int> shape, Rng& rng, double lo = -1.0,
                        double hi = 1.0) {
  Tensor<T> t = Tensor<T>::zeros(std::move(shape));
  for (size_t i = 0; i < t.numel(); ++i)
    t.data()[i] = static_cast<T>(rng.uniform(lo, hi));
  return t;
}

}  // namespace svs::testutil
