#pragma once

#include <vector>

#include "svs/dsp.hpp"
#include "svs/wav.hpp"

namespace svs {

// Per-coarse-frame fundamental frequency; 0 marks an unvoiced frame.
struct F0Track {
  std::vector<float> hz;
  static constexpr float kUnvoiced = 0.0f;

  bool voiced(size_t i) const { return hz[i] > 0.0f; }
  size_t frames() const { return hz.size(); }
};

struct YinParams {
  int window = 2048;
  int hop = kCoarseHop;  // one estimate per coarse frame
  double fmin = 50.0;
  double fmax = 1100.0;
  double threshold = 0.15;
  double energy_floor = 1e-4;  // RMS below this is silence
};

// YIN: difference function over a fixed integration window, cumulative-mean
// normalization, absolute threshold with local-minimum descent, parabolic
// interpolation of the selected lag. Analysis windows are centered on the
// middles of the coarse frames.
inline F0Track estimate_f0(const Waveform& w, const YinParams& p = {},
                           int n_frames = -1) {
  long len = static_cast<long>(w.samples.size());
  if (len < p.window) throw ValueError("estimate_f0: waveform shorter than window");
  int sr = w.sample_rate;
  int tau_min = std::max(2, static_cast<int>(sr / p.fmax));
  int tau_max = std::min(p.window / 2, static_cast<int>(sr / p.fmin) + 1);
  int integ = p.window - tau_max;  // fixed integration length for all lags
  if (n_frames < 0)
    n_frames = static_cast<int>((len + p.hop - 1) / p.hop);

  F0Track track;
  track.hz.assign(static_cast<size_t>(n_frames), F0Track::kUnvoiced);
  std::vector<double> d(static_cast<size_t>(tau_max) + 1);
  std::vector<double> cmnd(static_cast<size_t>(tau_max) + 1);

  for (int fr = 0; fr < n_frames; ++fr) {
    long center = static_cast<long>(fr) * p.hop + p.hop / 2;
    long start = center - p.window / 2;
    start = std::max(0L, std::min(start, len - p.window));
    const float* x = w.samples.data() + start;

    double energy = 0.0;
    for (int i = 0; i < p.window; ++i) energy += static_cast<double>(x[i]) * x[i];
    if (std::sqrt(energy / p.window) < p.energy_floor) continue;

    d[0] = 0.0;
    for (int tau = 1; tau <= tau_max; ++tau) {
      double s = 0.0;
      for (int j = 0; j < integ; ++j) {
        double diff = static_cast<double>(x[j]) - x[j + tau];
        s += diff * diff;
      }
      d[static_cast<size_t>(tau)] = s;
    }

    cmnd[0] = 1.0;
    double running = 0.0;
    for (int tau = 1; tau <= tau_max; ++tau) {
      running += d[static_cast<size_t>(tau)];
      cmnd[static_cast<size_t>(tau)] =
          running > 0.0 ? d[static_cast<size_t>(tau)] * tau / running : 1.0;
    }

    int best = -1;
    for (int tau = tau_min; tau <= tau_max; ++tau) {
      if (cmnd[static_cast<size_t>(tau)] < p.threshold) {
        while (tau + 1 <= tau_max &&
               cmnd[static_cast<size_t>(tau) + 1] < cmnd[static_cast<size_t>(tau)])
          ++tau;
        best = tau;
        break;
      }
    }
    if (best < 0) continue;

    double refined = static_cast<double>(best);
    if (best > tau_min && best < tau_max) {
      double s0 = cmnd[static_cast<size_t>(best) - 1];
      double s1 = cmnd[static_cast<size_t>(best)];
      double s2 = cmnd[static_cast<size_t>(best) + 1];
      double denom = 2.0 * (2.0 * s1 - s2 - s0);
      if (std::abs(denom) > 1e-12) refined += (s2 - s0) / denom;
    }
    double f0 = sr / refined;
    if (f0 >= p.fmin && f0 <= p.fmax)
      track.hz[static_cast<size_t>(fr)] = static_cast<float>(f0);
  }
  return track;
}

}  // namespace svs
