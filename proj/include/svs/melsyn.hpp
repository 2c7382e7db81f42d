#pragma once

#include <string>
#include <vector>

#include "svs/hangul.hpp"
#include "svs/nn.hpp"

namespace svs {

// Sizes and block layouts for every network in the system. The paper fixes
// the overall wiring; depths, widths and dilation schedules follow the DCTTS
// reference at desk scale and stay configurable.
struct NetConfig {
  int d_model = 64;
  double dropout = 0.05;
  std::vector<int> text_enc_dilations = {1, 3, 9, 27, 1};
  std::vector<int> audio_enc_dilations = {1, 3, 9, 27};
  std::vector<int> audio_dec_dilations = {1, 3, 9, 27, 1};
  std::vector<int> mask_dec_dilations = {1, 3, 9};
  std::vector<int> sr_dilations = {1, 3};  // highway blocks per resolution stage
  double attention_g = 0.2;
  bool mask_concat_key = false;  // mask decoder input: V only, or [V;K]
  int mel_bins = 80;
  int lin_bins = 513;
  int disc_channels = 8;
};

template <typename T>
struct TextEncoding {
  Tensor<T> key, value;  // each {d, L}
};

template <typename T>
struct MelSynOutput {
  Tensor<T> mel;   // M_hat = mask .* dm, {80, La}
  Tensor<T> mask;  // {80, La} (cropped to the audio length)
  Tensor<T> dm;    // {80, La}
  Tensor<T> attn;  // {L, La}, every column sums to 1
  TextEncoding<T> text;  // reused by the super-resolution stage
  Tensor<T> pitch_enc;   // E_P {d, L}
};

// Test hooks for the multiplicative-mask identity.
struct MelSynForce {
  bool mask_one = false;
  bool dm_zero = false;
};

// Autoregressive mel-synthesis network: text/pitch encoders, causal audio
// encoder, guided attention, mel decoder with pitch local conditioning, and
// a text-only phonetic enhancement mask decoder.
template <typename T>
class MelSynNet {
 public:
  MelSynNet(ParamStore<T>& ps, const NetConfig& cfg, Rng& rng,
            const std::string& prefix = "melsyn")
      : cfg_(cfg) {
    int d = cfg.d_model, d2 = 2 * cfg.d_model;
    text_emb_ = EmbeddingLayer<T>(ps, prefix + ".textenc.emb", PhonemeVocab::kSize, d, rng);
    text_conv1_ = Conv1dLayer<T>(ps, prefix + ".textenc.conv1", d, d2, 1, 1, Pad::Same, rng);
    text_conv2_ = Conv1dLayer<T>(ps, prefix + ".textenc.conv2", d2, d2, 1, 1, Pad::Same, rng);
    for (size_t i = 0; i < cfg.text_enc_dilations.size(); ++i)
      text_hc_.emplace_back(ps, prefix + ".textenc.hc" + std::to_string(i), d2, 3,
                            cfg.text_enc_dilations[i], Pad::Same, rng);

    pitch_emb_ = EmbeddingLayer<T>(ps, prefix + ".pitchenc.emb", PitchVocab::kSize, d, rng);
    pitch_conv1_ = Conv1dLayer<T>(ps, prefix + ".pitchenc.conv1", d, d2, 1, 1, Pad::Same, rng);
    pitch_conv2_ = Conv1dLayer<T>(ps, prefix + ".pitchenc.conv2", d2, d2, 1, 1, Pad::Same, rng);
    for (size_t i = 0; i < cfg.text_enc_dilations.size(); ++i)
      pitch_hc_.emplace_back(ps, prefix + ".pitchenc.hc" + std::to_string(i), d2, 3,
                             cfg.text_enc_dilations[i], Pad::Same, rng);
    pitch_out_ = Conv1dLayer<T>(ps, prefix + ".pitchenc.out", d2, d, 1, 1, Pad::Same, rng);

    audio_conv1_ = Conv1dLayer<T>(ps, prefix + ".audioenc.conv1", cfg.mel_bins, d, 1, 1, Pad::Causal, rng);
    audio_conv2_ = Conv1dLayer<T>(ps, prefix + ".audioenc.conv2", d, d, 1, 1, Pad::Causal, rng);
    audio_conv3_ = Conv1dLayer<T>(ps, prefix + ".audioenc.conv3", d, d, 1, 1, Pad::Causal, rng);
    for (size_t i = 0; i < cfg.audio_enc_dilations.size(); ++i)
      audio_hc_.emplace_back(ps, prefix + ".audioenc.hc" + std::to_string(i), d, 3,
                             cfg.audio_enc_dilations[i], Pad::Causal, rng);

    dec_in_ = Conv1dLayer<T>(ps, prefix + ".meldec.in", d2, d, 1, 1, Pad::Causal, rng);
    for (size_t i = 0; i < cfg.audio_dec_dilations.size(); ++i)
      dec_hc_.emplace_back(ps, prefix + ".meldec.hc" + std::to_string(i), d, 3,
                           cfg.audio_dec_dilations[i], Pad::Causal, rng,
                           std::vector<int>{d});  // pitch local conditioning
    dec_mid_ = Conv1dLayer<T>(ps, prefix + ".meldec.mid", d, d, 1, 1, Pad::Causal, rng);
    dec_out_ = Conv1dLayer<T>(ps, prefix + ".meldec.out", d, cfg.mel_bins, 1, 1, Pad::Causal, rng);

    int mask_in = cfg.mask_concat_key ? d2 : d;
    mask_in_ = Conv1dLayer<T>(ps, prefix + ".maskdec.in", mask_in, d, 1, 1, Pad::Same, rng);
    for (size_t i = 0; i < cfg.mask_dec_dilations.size(); ++i)
      mask_hc_.emplace_back(ps, prefix + ".maskdec.hc" + std::to_string(i), d, 3,
                            cfg.mask_dec_dilations[i], Pad::Same, rng);
    mask_out_ = Conv1dLayer<T>(ps, prefix + ".maskdec.out", d, cfg.mel_bins, 1, 1, Pad::Same, rng);
  }

  const NetConfig& config() const { return cfg_; }

  TextEncoding<T> encode_text(const std::vector<int>& text_ids, const RunMode& mode) const {
    check_ids(text_ids, PhonemeVocab::kSize, "text");
    Tensor<T> h = text_emb_.forward(text_ids);
    h = relu(text_conv1_.forward(h));
    h = drop(h, mode);
    h = text_conv2_.forward(h);
    for (const auto& hc : text_hc_) h = drop(hc.forward(h), mode);
    int d = cfg_.d_model;
    return {slice_rows(h, 0, d), slice_rows(h, d, 2 * d)};
  }

  Tensor<T> encode_pitch(const std::vector<int>& pitch_ids, const RunMode& mode) const {
    check_ids(pitch_ids, PitchVocab::kSize, "pitch");
    Tensor<T> h = pitch_emb_.forward(pitch_ids);
    h = relu(pitch_conv1_.forward(h));
    h = drop(h, mode);
    h = pitch_conv2_.forward(h);
    for (const auto& hc : pitch_hc_) h = drop(hc.forward(h), mode);
    return pitch_out_.forward(h);
  }

  // M_prev may be shorter than the text when generating autoregressively;
  // the mask (a function of text only) is cropped to the audio length.
  MelSynOutput<T> forward(const std::vector<int>& text_ids,
                          const std::vector<int>& pitch_ids,
                          const Tensor<T>& mel_prev, const RunMode& mode,
                          const MelSynForce& force = {}) const {
    if (text_ids.size() != pitch_ids.size())
      throw ShapeError("melsyn: text/pitch length mismatch");
    if (mel_prev.ndim() != 2 || mel_prev.dim(0) != cfg_.mel_bins)
      throw ShapeError("melsyn: mel_prev must be {80, frames}");
    int L = static_cast<int>(text_ids.size());
    int La = mel_prev.dim(1);
    if (La > L) throw ShapeError("melsyn: mel_prev longer than the aligned text");

    TextEncoding<T> text = encode_text(text_ids, mode);
    Tensor<T> pitch = encode_pitch(pitch_ids, mode);

    // causal audio encoder over the shifted mel
    Tensor<T> q = relu(audio_conv1_.forward(mel_prev));
    q = drop(q, mode);
    q = relu(audio_conv2_.forward(q));
    q = audio_conv3_.forward(q);
    for (const auto& hc : audio_hc_) q = drop(hc.forward(q), mode);

    // attention: A = softmax(K^T Q / sqrt(d)) over text positions
    T inv_sqrt_d = static_cast<T>(1.0 / std::sqrt(static_cast<double>(cfg_.d_model)));
    Tensor<T> attn = softmax_cols(scale(matmul_tn(text.key, q), inv_sqrt_d));
    Tensor<T> context = matmul(text.value, attn);  // {d, La}

    Tensor<T> pitch_a = La == L ? pitch : crop_time(pitch, 0, La);
    Tensor<T> h = dec_in_.forward(concat_rows(context, q));
    for (const auto& hc : dec_hc_) h = drop(hc.forward(h, {pitch_a}), mode);
    h = relu(dec_mid_.forward(h));
    Tensor<T> dm_logits = dec_out_.forward(h);
    Tensor<T> dm = force.dm_zero ? Tensor<T>::zeros({cfg_.mel_bins, La})
                                 : sigmoid(dm_logits);

    Tensor<T> mask;
    if (force.mask_one) {
      mask = Tensor<T>::full({cfg_.mel_bins, La}, T(1));
    } else {
      Tensor<T> m_in = cfg_.mask_concat_key ? concat_rows(text.value, text.key)
                                            : text.value;
      Tensor<T> m = relu(mask_in_.forward(m_in));
      for (const auto& hc : mask_hc_) m = drop(hc.forward(m), mode);
      mask = sigmoid(mask_out_.forward(m));
      if (La != L) mask = crop_time(mask, 0, La);
    }

    MelSynOutput<T> out;
    out.mel = mul(mask, dm);
    out.mask = mask;
    out.dm = dm;
    out.attn = attn;
    out.text = text;
    out.pitch_enc = pitch;
    return out;
  }

 private:
  static void check_ids(const std::vector<int>& ids, int vocab, const char* what) {
    if (ids.empty()) throw ShapeError(std::string("melsyn: empty ") + what + " ids");
    for (int id : ids)
      if (id < 0 || id >= vocab)
        throw ValueError(std::string("melsyn: ") + what + " id out of range");
  }

  Tensor<T> drop(const Tensor<T>& x, const RunMode& mode) const {
    if (!mode.train || cfg_.dropout <= 0.0) return x;
    if (!mode.rng) throw ValueError("melsyn: training mode requires an rng");
    return dropout(x, cfg_.dropout, *mode.rng, true);
  }

  NetConfig cfg_;
  EmbeddingLayer<T> text_emb_, pitch_emb_;
  Conv1dLayer<T> text_conv1_, text_conv2_, pitch_conv1_, pitch_conv2_, pitch_out_;
  std::vector<HighwayConv1dLayer<T>> text_hc_, pitch_hc_;
  Conv1dLayer<T> audio_conv1_, audio_conv2_, audio_conv3_;
  std::vector<HighwayConv1dLayer<T>> audio_hc_;
  Conv1dLayer<T> dec_in_, dec_mid_, dec_out_;
  std::vector<HighwayConv1dLayer<T>> dec_hc_;
  Conv1dLayer<T> mask_in_, mask_out_;
  std::vector<HighwayConv1dLayer<T>> mask_hc_;
};

template <typename T>
struct MelSynLosses {
  Tensor<T> l1, ld, latt, l1_diff, total;
};

// Guided attention weights W[n, t] = 1 - exp(-((n/L - t/L)^2) / (2 g^2)).
// The diagonal weighs exactly zero.
template <typename T>
std::vector<T> guided_attention_weights(int rows, int cols, double g) {
  std::vector<T> w(static_cast<size_t>(rows) * cols);
  for (int n = 0; n < rows; ++n)
    for (int t = 0; t < cols; ++t) {
      double d = static_cast<double>(n) / rows - static_cast<double>(t) / cols;
      w[static_cast<size_t>(n) * cols + t] =
          static_cast<T>(1.0 - std::exp(-(d * d) / (2.0 * g * g)));
    }
  return w;
}

// L_MS = L1(M_hat, M) + L_d(M_hat, M) + L_att + L1(diff M_hat, diff M).
template <typename T>
MelSynLosses<T> melsyn_loss(const MelSynOutput<T>& out, const Tensor<T>& mel_target,
                            double attention_g = 0.2) {
  if (out.mel.shape() != mel_target.shape())
    throw ShapeError("melsyn_loss: target shape mismatch");
  for (size_t i = 0; i < mel_target.numel(); ++i) {
    T v = mel_target.data()[i];
    if (v < T(0) || v > T(1))
      throw ValueError("melsyn_loss: target outside [0, 1]");
  }
  MelSynLosses<T> l;
  l.l1 = l1_loss(out.mel, mel_target);
  l.ld = binary_divergence(out.mel, mel_target);
  l.latt = weighted_mean(out.attn, guided_attention_weights<T>(
                                       out.attn.dim(0), out.attn.dim(1), attention_g));
  l.l1_diff = l1_loss(diff_time(out.mel), diff_time(mel_target));
  l.total = add(add(l.l1, l.ld), add(l.latt, l.l1_diff));
  return l;
}

// Deterministic frame-by-frame generation from a zero initial frame.
template <typename T>
MelSynOutput<T> synth_autoregressive(const MelSynNet<T>& net,
                                     const std::vector<int>& text_ids,
                                     const std::vector<int>& pitch_ids, int frames) {
  if (frames < 1) throw ValueError("synth_autoregressive: frames must be >= 1");
  if (static_cast<size_t>(frames) > text_ids.size())
    throw ShapeError("synth_autoregressive: more frames than aligned inputs");
  NoGradGuard ng;
  RunMode mode;  // inference
  int bins = net.config().mel_bins;
  // mel_prev for step t holds [0, m_0, ..., m_{t-1}]
  Tensor<T> mel_prev = Tensor<T>::zeros({bins, 1});
  MelSynOutput<T> out;
  for (int t = 0; t < frames; ++t) {
    out = net.forward(text_ids, pitch_ids, mel_prev, mode);
    if (t + 1 == frames) break;
    Tensor<T> next = Tensor<T>::zeros({bins, t + 2});
    for (int b = 0; b < bins; ++b) {
      T* dst = next.data() + static_cast<size_t>(b) * (t + 2);
      const T* prev = mel_prev.data() + static_cast<size_t>(b) * (t + 1);
      std::copy(prev, prev + t + 1, dst);
      // shift-right semantics: frame t+1 of mel_prev is generated frame t
      dst[t + 1] = out.mel.data()[static_cast<size_t>(b) * (t + 1) + t];
    }
    mel_prev = next;
  }
  return out;
}

}  // namespace svs
