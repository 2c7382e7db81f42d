#pragma once

#include <map>
#include <utility>
#include <vector>

#include "svs/score.hpp"
#include "svs/wav.hpp"

namespace svs {

// Deterministic synthetic vocal generator: additive harmonics shaped by a
// per-nucleus two-formant envelope, optional vibrato, and a short noise burst
// on sounding onset consonants. Note boundaries land exactly on the coarse
// frame grid so scores and audio agree by construction.
struct SynthSongConfig {
  uint64_t seed = 0;
  int note_count = 24;
  double tempo_bpm_lo = 70.0, tempo_bpm_hi = 110.0;
  int pitch_lo = 52, pitch_hi = 74;  // must stay within the 36..84 note range
  double vibrato_cents = 20.0;
  double vibrato_rate_hz = 5.5;
  double rest_prob = 0.25;
  int rest_frames_max = 3;
  double noise_burst_amp = 0.12;
  double noise_burst_ms = 25.0;
  int sample_rate = 22050;
  // nucleus jamo index -> (F1, F2) in Hz
  std::map<int, std::pair<double, double>> formants = {
      {0, {850.0, 1220.0}},   // ㅏ
      {5, {530.0, 2100.0}},   // ㅔ
      {8, {450.0, 880.0}},    // ㅗ
      {13, {350.0, 800.0}},   // ㅜ
      {20, {300.0, 2500.0}},  // ㅣ
  };
  // syllable inventory: four onsets crossed with the formant table's nuclei
  std::vector<int> onsets = {0, 2, 6, 9};  // ㄱ ㄴ ㅁ ㅅ

  void validate() const {
    if (note_count < 1) throw ValueError("SynthSongConfig: note_count must be >= 1");
    if (pitch_lo < 36 || pitch_hi > 84 || pitch_lo > pitch_hi)
      throw ValueError("SynthSongConfig: pitch range outside the 36..84 vocabulary");
    if (tempo_bpm_lo <= 0 || tempo_bpm_hi < tempo_bpm_lo)
      throw ValueError("SynthSongConfig: bad tempo range");
    if (formants.empty()) throw ValueError("SynthSongConfig: empty formant table");
  }
};

namespace detail {
inline double formant_gain(double f, double f1, double f2) {
  auto res = [f](double fc, double bw) {
    double d = (f - fc) / bw;
    return 1.0 / (1.0 + d * d);
  };
  return res(f1, 160.0) + 0.7 * res(f2, 220.0) + 0.05;
}
}  // namespace detail

inline std::pair<Score, Waveform> generate_synthetic_song(const SynthSongConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  const int sr = cfg.sample_rate;
  const double frame_dur = static_cast<double>(kCoarseHop) / sr;
  const double bpm = rng.uniform(cfg.tempo_bpm_lo, cfg.tempo_bpm_hi);
  std::vector<int> nuclei;
  for (const auto& [nucleus, f] : cfg.formants) nuclei.push_back(nucleus);

  Score score;
  score.sample_rate = sr;
  int frame = 1;  // leading rest frame keeps note onsets off the file edge
  int pitch = cfg.pitch_lo + static_cast<int>(rng.next_below(
                                  static_cast<uint64_t>(cfg.pitch_hi - cfg.pitch_lo + 1)));
  static const double kBeats[4] = {0.5, 1.0, 1.5, 2.0};
  for (int i = 0; i < cfg.note_count; ++i) {
    if (i > 0 && rng.uniform() < cfg.rest_prob)
      frame += 1 + static_cast<int>(rng.next_below(
                       static_cast<uint64_t>(std::max(1, cfg.rest_frames_max))));
    double beats = kBeats[rng.next_below(4)];
    int frames = std::max(3, static_cast<int>(std::lround(beats * 60.0 / bpm / frame_dur)));
    frames = std::min(frames, 24);

    if (i > 0) {  // random-walk melody, never repeating the previous pitch
      int step = 0;
      while (step == 0) step = rng.uniform_int(-5, 5);
      pitch = std::min(cfg.pitch_hi, std::max(cfg.pitch_lo, pitch + step));
      if (pitch == score.notes.back().pitch_midi)
        pitch = pitch > cfg.pitch_lo ? pitch - 1 : pitch + 1;
    }
    int onset_jamo = cfg.onsets[rng.next_below(cfg.onsets.size())];
    int nucleus = nuclei[rng.next_below(nuclei.size())];

    Note n;
    n.pitch_midi = pitch;
    n.onset_s = frame * frame_dur;
    n.offset_s = (frame + frames) * frame_dur;
    n.syllable = codepoint_to_utf8(recompose_hangul({onset_jamo, nucleus, 0}));
    score.notes.push_back(n);
    frame += frames;
  }
  frame += 2;  // trailing rest

  Waveform wav;
  wav.sample_rate = sr;
  wav.samples.assign(static_cast<size_t>(frame) * kCoarseHop, 0.0f);

  const double pi = 3.14159265358979323846;
  for (const Note& n : score.notes) {
    size_t s0 = static_cast<size_t>(std::lround(n.onset_s * sr));
    size_t s1 = static_cast<size_t>(std::lround(n.offset_s * sr));
    double f_nom = midi_to_hz(n.pitch_midi);
    Jamo j = decompose_hangul(utf8_single_codepoint(n.syllable));
    auto fit = cfg.formants.find(j.nucleus);
    double f1 = fit->second.first, f2 = fit->second.second;

    int n_harm = std::max(1, std::min(10, static_cast<int>(8000.0 / f_nom)));
    std::vector<double> amps(static_cast<size_t>(n_harm));
    double norm = 0.0;
    for (int k = 1; k <= n_harm; ++k) {
      double a = detail::formant_gain(k * f_nom, f1, f2) / k;
      amps[static_cast<size_t>(k) - 1] = a;
      norm += a;
    }
    for (auto& a : amps) a /= norm;

    int ramp = sr * 8 / 1000;  // 8 ms attack/release
    double phase = rng.uniform(0.0, 2.0 * pi);
    for (size_t s = s0; s < s1 && s < wav.samples.size(); ++s) {
      double t_rel = static_cast<double>(s - s0) / sr;
      double vib = cfg.vibrato_cents == 0.0
                       ? 1.0
                       : std::pow(2.0, cfg.vibrato_cents *
                                           std::sin(2.0 * pi * cfg.vibrato_rate_hz * t_rel) /
                                           1200.0);
      phase += 2.0 * pi * f_nom * vib / sr;
      double env = 1.0;
      long into = static_cast<long>(s - s0);
      long left = static_cast<long>(s1 - s) - 1;
      if (into < ramp) env = 0.5 - 0.5 * std::cos(pi * into / ramp);
      if (left < ramp) env = std::min(env, 0.5 - 0.5 * std::cos(pi * left / ramp));
      double v = 0.0;
      for (int k = 1; k <= n_harm; ++k)
        v += amps[static_cast<size_t>(k) - 1] * std::sin(k * phase);
      wav.samples[s] += static_cast<float>(0.5 * env * v);
    }

    if (j.onset != kSilentOnset && cfg.noise_burst_amp > 0.0) {
      size_t burst = static_cast<size_t>(cfg.noise_burst_ms * sr / 1000.0);
      for (size_t i = 0; i < burst && s0 + i < s1; ++i) {
        double env = 0.5 - 0.5 * std::cos(2.0 * pi * i / burst);
        wav.samples[s0 + i] += static_cast<float>(cfg.noise_burst_amp * env *
                                                  rng.uniform(-1.0, 1.0));
      }
    }
  }

  float peak = 0.0f;
  for (float s : wav.samples) peak = std::max(peak, std::abs(s));
  if (peak > 0.0f)
    for (float& s : wav.samples) s *= 0.75f / peak;
  return {std::move(score), std::move(wav)};
}

}  // namespace svs
