#pragma once

#include <complex>
#include <optional>
#include <vector>

#include "svs/fft.hpp"
#include "svs/tensor.hpp"
#include "svs/wav.hpp"

namespace svs {

// Default analysis parameters for the whole pipeline.
struct StftParams {
  int n_fft = 1024;
  int hop = 256;
};

inline constexpr int kMelBins = 80;
inline constexpr int kCoarseHop = 1024;  // samples per coarse frame (= 4 fine hops)
inline constexpr float kPreEmphasis = 0.6f;
inline constexpr float kPostEmphasis = 1.3f;

// Frame-major complex spectrogram: data[t * bins + b].
struct ComplexSpectrogram {
  int bins = 0;
  int frames = 0;
  std::vector<std::complex<double>> data;

  std::complex<double>& at(int b, int t) { return data[static_cast<size_t>(t) * bins + b]; }
  std::complex<double> at(int b, int t) const { return data[static_cast<size_t>(t) * bins + b]; }
};

namespace detail {
inline std::vector<double> hann_window(int n) {
  std::vector<double> w(static_cast<size_t>(n));
  const double pi = 3.14159265358979323846;
  for (int i = 0; i < n; ++i)
    w[static_cast<size_t>(i)] = 0.5 - 0.5 * std::cos(2.0 * pi * i / n);
  return w;
}

// Reflect-padded sample access: pad n_fft/2 on each side, librosa-style.
inline double reflect_sample(const std::vector<float>& x, long i) {
  long n = static_cast<long>(x.size());
  if (n == 1) return x[0];
  while (i < 0 || i >= n) {
    if (i < 0) i = -i;
    if (i >= n) i = 2 * (n - 1) - i;
  }
  return x[static_cast<size_t>(i)];
}
}  // namespace detail

// Centered STFT with reflect padding; frames = 1 + floor(len / hop).
inline ComplexSpectrogram stft(const Waveform& w, const StftParams& p = {}) {
  if (w.samples.empty()) throw ValueError("stft: empty waveform");
  int n_fft = p.n_fft, hop = p.hop;
  ComplexSpectrogram out;
  out.bins = n_fft / 2 + 1;
  out.frames = 1 + static_cast<int>(w.samples.size()) / hop;
  out.data.resize(static_cast<size_t>(out.bins) * out.frames);
  std::vector<double> win = detail::hann_window(n_fft);
  std::vector<double> frame(static_cast<size_t>(n_fft));
  for (int t = 0; t < out.frames; ++t) {
    long start = static_cast<long>(t) * hop - n_fft / 2;
    for (int i = 0; i < n_fft; ++i)
      frame[static_cast<size_t>(i)] =
          detail::reflect_sample(w.samples, start + i) * win[static_cast<size_t>(i)];
    auto spec = rfft(frame);
    std::copy(spec.begin(), spec.end(),
              out.data.begin() + static_cast<size_t>(t) * out.bins);
  }
  return out;
}

// Least-squares inverse via window-weighted overlap-add.
inline Waveform istft(const ComplexSpectrogram& s, size_t length,
                      const StftParams& p = {}, int sample_rate = 22050) {
  int n_fft = p.n_fft, hop = p.hop;
  if (s.bins != n_fft / 2 + 1) throw ShapeError("istft: bin count mismatch");
  std::vector<double> win = detail::hann_window(n_fft);
  size_t padded = static_cast<size_t>(n_fft) + static_cast<size_t>(s.frames - 1) * hop;
  std::vector<double> acc(padded, 0.0), norm(padded, 0.0);
  std::vector<std::complex<double>> half(static_cast<size_t>(s.bins));
  for (int t = 0; t < s.frames; ++t) {
    std::copy(s.data.begin() + static_cast<size_t>(t) * s.bins,
              s.data.begin() + static_cast<size_t>(t + 1) * s.bins, half.begin());
    std::vector<double> frame = irfft(half, static_cast<size_t>(n_fft));
    size_t off = static_cast<size_t>(t) * hop;
    for (int i = 0; i < n_fft; ++i) {
      acc[off + i] += frame[static_cast<size_t>(i)] * win[static_cast<size_t>(i)];
      norm[off + i] += win[static_cast<size_t>(i)] * win[static_cast<size_t>(i)];
    }
  }
  Waveform w;
  w.sample_rate = sample_rate;
  w.samples.resize(length);
  size_t pad = static_cast<size_t>(n_fft) / 2;
  for (size_t i = 0; i < length; ++i) {
    size_t j = i + pad;
    w.samples[i] = j < padded && norm[j] > 1e-9
                       ? static_cast<float>(acc[j] / norm[j])
                       : 0.0f;
  }
  return w;
}

inline Tensor<float> magnitude(const ComplexSpectrogram& s) {
  Tensor<float> m = Tensor<float>::zeros({s.bins, s.frames});
  for (int b = 0; b < s.bins; ++b)
    for (int t = 0; t < s.frames; ++t)
      m.data()[static_cast<size_t>(b) * s.frames + t] =
          static_cast<float>(std::abs(s.at(b, t)));
  return m;
}

// S <- (|S| / max|S|)^delta. The maximum element maps to exactly 1.
inline Tensor<float> normalize_mag(const Tensor<float>& s, float delta = kPreEmphasis) {
  float mx = 0.0f;
  for (size_t i = 0; i < s.numel(); ++i) mx = std::max(mx, std::abs(s.data()[i]));
  if (mx <= 0.0f) throw ValueError("normalize_mag: all-zero spectrogram");
  Tensor<float> out = Tensor<float>::zeros(s.shape());
  for (size_t i = 0; i < s.numel(); ++i)
    out.data()[i] = std::pow(std::abs(s.data()[i]) / mx, delta);
  return out;
}

// S <- S^(zeta/delta), undoing the training compression before inversion.
inline Tensor<float> post_emphasize(const Tensor<float>& s,
                                    float zeta = kPostEmphasis,
                                    float delta = kPreEmphasis) {
  Tensor<float> out = Tensor<float>::zeros(s.shape());
  float e = zeta / delta;
  for (size_t i = 0; i < s.numel(); ++i) {
    if (s.data()[i] < 0.0f) throw ValueError("post_emphasize: negative input");
    out.data()[i] = std::pow(s.data()[i], e);
  }
  return out;
}

// HTK-mel triangular filterbank over [0, sr/2], rows {n_mels, n_fft/2+1}.
inline Tensor<float> mel_filterbank(int n_mels = kMelBins, int n_fft = 1024,
                                    int sample_rate = 22050) {
  auto hz_to_mel = [](double f) { return 2595.0 * std::log10(1.0 + f / 700.0); };
  auto mel_to_hz = [](double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); };
  int bins = n_fft / 2 + 1;
  double mel_max = hz_to_mel(sample_rate / 2.0);
  std::vector<double> centers(static_cast<size_t>(n_mels) + 2);
  for (int i = 0; i < n_mels + 2; ++i)
    centers[static_cast<size_t>(i)] = mel_to_hz(mel_max * i / (n_mels + 1));
  Tensor<float> fb = Tensor<float>::zeros({n_mels, bins});
  for (int m = 0; m < n_mels; ++m) {
    double lo = centers[static_cast<size_t>(m)];
    double mid = centers[static_cast<size_t>(m) + 1];
    double hi = centers[static_cast<size_t>(m) + 2];
    for (int b = 0; b < bins; ++b) {
      double f = static_cast<double>(b) * sample_rate / n_fft;
      double v = 0.0;
      if (f > lo && f < hi)
        v = f <= mid ? (f - lo) / (mid - lo) : (hi - f) / (hi - mid);
      fb.data()[static_cast<size_t>(m) * bins + b] = static_cast<float>(v);
    }
  }
  return fb;
}

// Coarse mel target: 80-band projection of the raw magnitudes, normalized the
// same way as S, then decimated by keeping frames 0, 4, 8, ...
inline Tensor<float> to_mel(const Tensor<float>& s_unnormalized,
                            float delta = kPreEmphasis) {
  if (s_unnormalized.ndim() != 2 || s_unnormalized.dim(0) != 513)
    throw ShapeError("to_mel: expected a {513, frames} magnitude spectrogram");
  static thread_local Tensor<float> fb = mel_filterbank();
  int bins = s_unnormalized.dim(0);
  int frames = s_unnormalized.dim(1);
  Tensor<float> mel_full = Tensor<float>::zeros({kMelBins, frames});
  const float* ps = s_unnormalized.data();
  for (int m = 0; m < kMelBins; ++m) {
    const float* w = fb.data() + static_cast<size_t>(m) * bins;
    float* out = mel_full.data() + static_cast<size_t>(m) * frames;
    for (int b = 0; b < bins; ++b) {
      float wv = w[b];
      if (wv == 0.0f) continue;
      const float* row = ps + static_cast<size_t>(b) * frames;
      for (int t = 0; t < frames; ++t) out[t] += wv * row[t];
    }
  }
  bool all_zero = true;
  for (size_t i = 0; i < mel_full.numel() && all_zero; ++i)
    if (mel_full.data()[i] != 0.0f) all_zero = false;
  Tensor<float> norm = all_zero ? mel_full : normalize_mag(mel_full, delta);
  int lo = (frames + 3) / 4;  // ceil(frames / 4)
  Tensor<float> out = Tensor<float>::zeros({kMelBins, lo});
  for (int m = 0; m < kMelBins; ++m)
    for (int t = 0; t < lo; ++t)
      out.data()[static_cast<size_t>(m) * lo + t] =
          norm.data()[static_cast<size_t>(m) * frames + 4 * t];
  return out;
}

// Zero-pad frames on the right until the count is divisible by 4 so that the
// fine/coarse frame relationship is exact.
inline Tensor<float> pad_frames_mod4(const Tensor<float>& s) {
  int bins = s.dim(0), frames = s.dim(1);
  int target = (frames + 3) / 4 * 4;
  if (target == frames) return s;
  Tensor<float> out = Tensor<float>::zeros({bins, target});
  for (int b = 0; b < bins; ++b)
    std::copy(s.data() + static_cast<size_t>(b) * frames,
              s.data() + static_cast<size_t>(b + 1) * frames,
              out.data() + static_cast<size_t>(b) * target);
  return out;
}

// Iterative phase reconstruction with momentum acceleration (fast
// Griffin-Lim). Plain alternating projections stall on quasi-stationary
// tones; momentum 0.9 converges well and keeps the per-iteration residual
// non-increasing on every magnitude in the test suite. Returns the final
// waveform; when `residuals` is given it receives ||  |STFT(x_k)| - mag ||_F
// per iteration.
inline Waveform griffin_lim(const Tensor<float>& mag, int iters = 60,
                            std::optional<uint64_t> rng_seed = std::nullopt,
                            const StftParams& p = {}, int sample_rate = 22050,
                            std::vector<double>* residuals = nullptr,
                            double momentum = 0.9) {
  if (iters < 1) throw ValueError("griffin_lim: iters must be >= 1");
  if (mag.ndim() != 2 || mag.dim(0) != p.n_fft / 2 + 1)
    throw ShapeError("griffin_lim: magnitude bin count mismatch");
  int bins = mag.dim(0), frames = mag.dim(1);
  size_t length = static_cast<size_t>(frames - 1) * p.hop + 1;
  if (frames < 2) length = static_cast<size_t>(p.hop);

  ComplexSpectrogram s;
  s.bins = bins;
  s.frames = frames;
  s.data.assign(static_cast<size_t>(bins) * frames, {0.0, 0.0});
  const double pi = 3.14159265358979323846;
  if (rng_seed) {
    Rng rng(*rng_seed);
    for (int t = 0; t < frames; ++t)
      for (int b = 0; b < bins; ++b) {
        double ph = rng.uniform(0.0, 2.0 * pi);
        s.at(b, t) = std::polar(
            static_cast<double>(mag.data()[static_cast<size_t>(b) * frames + t]), ph);
      }
  } else {
    for (int t = 0; t < frames; ++t)
      for (int b = 0; b < bins; ++b)
        s.at(b, t) = {static_cast<double>(mag.data()[static_cast<size_t>(b) * frames + t]), 0.0};
  }

  Waveform x;
  ComplexSpectrogram prev;
  for (int k = 0; k < iters; ++k) {
    x = istft(s, length, p, sample_rate);
    ComplexSpectrogram c = stft(x, p);
    if (residuals) {
      double r = 0.0;
      for (int t = 0; t < frames; ++t)
        for (int b = 0; b < bins; ++b) {
          double d = std::abs(c.at(b, t)) -
                     static_cast<double>(mag.data()[static_cast<size_t>(b) * frames + t]);
          r += d * d;
        }
      residuals->push_back(std::sqrt(r));
    }
    bool use_momentum = momentum > 0.0 && k > 0;
    for (int t = 0; t < frames; ++t)
      for (int b = 0; b < bins; ++b) {
        std::complex<double> v = c.at(b, t);
        if (use_momentum) v += momentum * (v - prev.at(b, t));
        double a = std::abs(v);
        std::complex<double> phase = a > 1e-12 ? v / a : std::complex<double>(0.0, 0.0);
        s.at(b, t) = phase * static_cast<double>(
                                 mag.data()[static_cast<size_t>(b) * frames + t]);
      }
    prev = std::move(c);
  }
  return istft(s, length, p, sample_rate);
}

inline double hz_to_midi(double f_hz) {
  if (f_hz <= 0.0) throw ValueError("hz_to_midi: frequency must be positive");
  return 69.0 + 12.0 * std::log2(f_hz / 440.0);
}

inline double midi_to_hz(double m) { return 440.0 * std::pow(2.0, (m - 69.0) / 12.0); }

inline int quantize_midi(double x) { return static_cast<int>(std::lround(x)); }

}  // namespace svs
