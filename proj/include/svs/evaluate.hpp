#pragma once

#include <future>
#include <string>
#include <vector>

#include "svs/dataset.hpp"
#include "svs/melsyn.hpp"
#include "svs/pitch.hpp"
#include "svs/srnet.hpp"

namespace svs {

// Per-coarse-frame quantized MIDI numbers; -1 marks an unvoiced frame.
inline constexpr int kUnvoicedFrame = -1;
using PitchSequence = std::vector<int>;

inline PitchSequence extract_pitch_sequence(const Waveform& w, int n_frames = -1) {
  F0Track track = estimate_f0(w, {}, n_frames);
  PitchSequence seq(track.frames(), kUnvoicedFrame);
  for (size_t i = 0; i < track.frames(); ++i)
    if (track.voiced(i))
      seq[i] = quantize_midi(hz_to_midi(static_cast<double>(track.hz[i])));
  return seq;
}

// REST maps to UNVOICED; everything else is its MIDI number.
inline PitchSequence pitch_sequence_from_aligned(const std::vector<int>& pitch_ids) {
  PitchSequence seq(pitch_ids.size(), kUnvoicedFrame);
  for (size_t i = 0; i < pitch_ids.size(); ++i)
    if (pitch_ids[i] != PitchVocab::kRest && pitch_ids[i] != PitchVocab::kPad)
      seq[i] = pitch_ids[i];
  return seq;
}

struct Prf {
  double precision = 0, recall = 0, f1 = 0;
  long matched = 0, pred_voiced = 0, ref_voiced = 0;
  bool empty_precision = false, empty_recall = false;
};

// Frame-wise precision/recall/F1: a match needs both frames voiced with equal
// quantized MIDI. Empty denominators yield 0 with a flag.
inline Prf frame_prf(const PitchSequence& pred, const PitchSequence& ref) {
  if (pred.size() != ref.size()) throw ShapeError("frame_prf: length mismatch");
  Prf r;
  for (size_t i = 0; i < pred.size(); ++i) {
    bool pv = pred[i] != kUnvoicedFrame;
    bool rv = ref[i] != kUnvoicedFrame;
    if (pv) ++r.pred_voiced;
    if (rv) ++r.ref_voiced;
    if (pv && rv && pred[i] == ref[i]) ++r.matched;
  }
  r.empty_precision = r.pred_voiced == 0;
  r.empty_recall = r.ref_voiced == 0;
  r.precision = r.empty_precision ? 0.0
                                  : static_cast<double>(r.matched) / r.pred_voiced;
  r.recall = r.empty_recall ? 0.0 : static_cast<double>(r.matched) / r.ref_voiced;
  r.f1 = (r.precision + r.recall) > 0
             ? 2.0 * r.precision * r.recall / (r.precision + r.recall)
             : 0.0;
  return r;
}

struct ClipReport {
  std::string id;
  Prf prf;
  long frames = 0;
  double voiced_ratio = 0;       // extraction diagnostic
  PitchSequence pred, ref;       // per-frame decisions, for CSV inspection
};

struct EvalReport {
  std::vector<ClipReport> clips;
  Prf aggregate;  // micro-averaged over frames

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["aggregate"] = {{"precision", aggregate.precision},
                      {"recall", aggregate.recall},
                      {"f1", aggregate.f1},
                      {"matched", aggregate.matched},
                      {"pred_voiced", aggregate.pred_voiced},
                      {"ref_voiced", aggregate.ref_voiced}};
    j["clips"] = nlohmann::json::array();
    for (const auto& c : clips)
      j["clips"].push_back({{"id", c.id},
                            {"precision", c.prf.precision},
                            {"recall", c.prf.recall},
                            {"f1", c.prf.f1},
                            {"frames", c.frames},
                            {"voiced_ratio", c.voiced_ratio}});
    return j;
  }
};

namespace detail {
inline void finish_report(EvalReport& report) {
  Prf agg;
  for (const auto& c : report.clips) {
    agg.matched += c.prf.matched;
    agg.pred_voiced += c.prf.pred_voiced;
    agg.ref_voiced += c.prf.ref_voiced;
  }
  agg.empty_precision = agg.pred_voiced == 0;
  agg.empty_recall = agg.ref_voiced == 0;
  agg.precision = agg.empty_precision
                      ? 0.0
                      : static_cast<double>(agg.matched) / agg.pred_voiced;
  agg.recall =
      agg.empty_recall ? 0.0 : static_cast<double>(agg.matched) / agg.ref_voiced;
  agg.f1 = (agg.precision + agg.recall) > 0
               ? 2.0 * agg.precision * agg.recall / (agg.precision + agg.recall)
               : 0.0;
  report.aggregate = agg;
}

inline ClipReport score_clip(const std::string& id, const Waveform& wav,
                             const std::vector<int>& pitch_ids) {
  ClipReport clip;
  clip.id = id;
  int frames = static_cast<int>(pitch_ids.size());
  clip.pred = extract_pitch_sequence(wav, frames);
  clip.ref = pitch_sequence_from_aligned(pitch_ids);
  clip.prf = frame_prf(clip.pred, clip.ref);
  clip.frames = frames;
  long voiced = 0;
  for (int v : clip.pred)
    if (v != kUnvoicedFrame) ++voiced;
  clip.voiced_ratio = frames > 0 ? static_cast<double>(voiced) / frames : 0.0;
  return clip;
}
}  // namespace detail

// End-to-end synthesis of one score: autoregressive mel generation, SR
// upsampling, post-emphasis, Griffin-Lim.
template <typename T>
Waveform synthesize_score(const MelSynNet<T>& melsyn, const SRNet<T>& sr,
                          const Score& score, int tail_frames = 2,
                          int gl_iters = 60) {
  double frame_dur = static_cast<double>(kCoarseHop) / score.sample_rate;
  int frames = static_cast<int>(std::ceil(score.span_seconds() / frame_dur)) + tail_frames;
  auto aligned = align_frames(score, score.sample_rate, kCoarseHop, frames);
  NoGradGuard ng;
  RunMode mode;
  auto ms = synth_autoregressive(melsyn, aligned.text, aligned.pitch, frames);
  auto cond = sr.make_conditioning(ms.text, ms.pitch_enc, mode);
  auto srout = sr.forward(ms.mel, cond, mode);
  Tensor<float> mag = Tensor<float>::zeros(srout.s_hat.shape());
  for (size_t i = 0; i < mag.numel(); ++i)
    mag.data()[i] = static_cast<float>(srout.s_hat.data()[i]);
  return griffin_lim(post_emphasize(mag), gl_iters, std::nullopt, {},
                     score.sample_rate);
}

// Ground-truth oracle loop: the recorded audio evaluated against its own
// score. This is the metric ceiling on the dataset.
inline EvalReport evaluate_ground_truth(const Manifest& manifest,
                                        const std::string& split) {
  std::vector<std::future<ClipReport>> futures;
  for (const auto& item : manifest.items) {
    if (item.split != split) continue;
    futures.push_back(std::async(std::launch::async, [item] {
      Score score = parse_score_json(item.score_path);
      Waveform wav = read_wav(item.wav_path);
      int frames = coarse_frame_count(wav.samples.size());
      auto aligned = align_frames(score, wav.sample_rate, kCoarseHop, frames);
      return detail::score_clip(item.score_path, wav, aligned.pitch);
    }));
  }
  if (futures.empty()) throw ValueError("evaluate: split '" + split + "' is empty");
  EvalReport report;
  for (auto& f : futures) report.clips.push_back(f.get());
  detail::finish_report(report);
  return report;
}

// Model evaluation: synthesize each test score, extract its pitch sequence,
// and compare frame-wise against the input pitch sequence.
template <typename T>
EvalReport evaluate_model(const MelSynNet<T>& melsyn, const SRNet<T>& sr,
                          const Manifest& manifest, const std::string& split) {
  std::vector<std::future<ClipReport>> futures;
  for (const auto& item : manifest.items) {
    if (item.split != split) continue;
    futures.push_back(std::async(std::launch::async, [&melsyn, &sr, item] {
      Score score = parse_score_json(item.score_path);
      Waveform wav = synthesize_score(melsyn, sr, score);
      int frames = coarse_frame_count(wav.samples.size());
      auto aligned = align_frames(score, score.sample_rate, kCoarseHop, frames);
      return detail::score_clip(item.score_path, wav, aligned.pitch);
    }));
  }
  if (futures.empty()) throw ValueError("evaluate: split '" + split + "' is empty");
  EvalReport report;
  for (auto& f : futures) report.clips.push_back(f.get());
  detail::finish_report(report);
  return report;
}

}  // namespace svs
