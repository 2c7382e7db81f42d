#include <catch2/catch_amalgamated.hpp>

#include "svs/dsp.hpp"
#include "svs/pitch.hpp"
#include "svs/wav.hpp"

#include "test_util.hpp"

using namespace svs;

namespace {
using svs::testutil::make_sine;
using svs::testutil::sine_fit_snr_db;
auto sine = [](double hz, double sec) { return make_sine(hz, sec); };

double snr_db(const std::vector<float>& ref, const std::vector<float>& est,
              size_t lo, size_t hi) {
  double sig = 0, err = 0;
  for (size_t i = lo; i < hi; ++i) {
    sig += static_cast<double>(ref[i]) * ref[i];
    double d = static_cast<double>(ref[i]) - est[i];
    err += d * d;
  }
  return 10.0 * std::log10(sig / std::max(err, 1e-30));
}
}  // namespace

TEST_CASE("fft round trip and known transform", "[fft]") {
  std::vector<double> x = {1, 0, 0, 0, 0, 0, 0, 0};
  auto spec = rfft(x);
  for (auto& c : spec) {
    REQUIRE(c.real() == Catch::Approx(1.0).margin(1e-12));
    REQUIRE(c.imag() == Catch::Approx(0.0).margin(1e-12));
  }
  Rng rng(5);
  std::vector<double> y(64);
  for (auto& v : y) v = rng.uniform(-1, 1);
  auto back = irfft(rfft(y), 64);
  for (size_t i = 0; i < y.size(); ++i)
    REQUIRE(back[i] == Catch::Approx(y[i]).margin(1e-12));
}

TEST_CASE("stft frame count and peak bin", "[dsp]") {
  Waveform w;
  w.samples.assign(1024, 0.1f);
  auto s = stft(w);
  REQUIRE(s.bins == 513);
  REQUIRE(s.frames == 5);  // 1 + 1024/256

  auto tone = sine(1000.0, 0.5);
  auto spec = stft(tone);
  auto mag = magnitude(spec);
  // look at an interior frame
  int t = spec.frames / 2;
  int best = 0;
  float bv = 0;
  for (int b = 0; b < spec.bins; ++b) {
    float v = mag.data()[static_cast<size_t>(b) * spec.frames + t];
    if (v > bv) {
      bv = v;
      best = b;
    }
  }
  REQUIRE(best == 46);  // round(1000 * 1024 / 22050)
  REQUIRE_THROWS_AS(stft(Waveform{}), ValueError);
}

TEST_CASE("istft reconstructs the waveform", "[dsp]") {
  Rng rng(7);
  Waveform w;
  w.sample_rate = 22050;
  w.samples.resize(8000);
  for (auto& s : w.samples) s = static_cast<float>(rng.uniform(-0.5, 0.5));
  auto spec = stft(w);
  auto back = istft(spec, w.samples.size());
  // interior samples (skip one window at each edge)
  double snr = snr_db(w.samples, back.samples, 1024, w.samples.size() - 1024);
  REQUIRE(snr > 60.0);
}

TEST_CASE("normalize_mag fixed points and values", "[dsp]") {
  auto s = TensorF::from_data({1, 3}, {2.0f, 1.0f, 0.0f});
  auto n = normalize_mag(s, 0.6f);
  REQUIRE(n.data()[0] == Catch::Approx(1.0f));
  REQUIRE(n.data()[1] == Catch::Approx(std::pow(0.5f, 0.6f)).epsilon(1e-5));
  REQUIRE(n.data()[1] == Catch::Approx(0.6598f).margin(2e-4));
  REQUIRE(n.data()[2] == 0.0f);
  // delta = 1 degenerates to plain max-normalization
  auto p = normalize_mag(s, 1.0f);
  REQUIRE(p.data()[1] == Catch::Approx(0.5f));
  REQUIRE_THROWS_AS(normalize_mag(TensorF::zeros({2, 2})), ValueError);
}

TEST_CASE("post_emphasize values", "[dsp]") {
  auto s = TensorF::from_data({1, 3}, {1.0f, 0.5f, 0.0f});
  auto e = post_emphasize(s);
  REQUIRE(e.data()[0] == Catch::Approx(1.0f));
  REQUIRE(e.data()[1] == Catch::Approx(std::pow(0.5, 13.0 / 6.0)).epsilon(1e-5));
  REQUIRE(e.data()[1] == Catch::Approx(0.2226f).margin(2e-4));
  REQUIRE(e.data()[2] == 0.0f);
  REQUIRE_THROWS_AS(post_emphasize(TensorF::from_data({1, 1}, {-0.1f})), ValueError);
}

TEST_CASE("normalize then post-emphasize with zeta=delta is identity", "[dsp]") {
  Rng rng(9);
  auto s = TensorF::zeros({4, 6});
  for (size_t i = 0; i < s.numel(); ++i)
    s.data()[i] = static_cast<float>(rng.uniform(0, 2));
  auto n = normalize_mag(s, 0.6f);
  auto round = post_emphasize(n, 0.6f, 0.6f);
  for (size_t i = 0; i < n.numel(); ++i)
    REQUIRE(round.data()[i] == Catch::Approx(n.data()[i]).margin(1e-6));
}

TEST_CASE("mel filterbank structure", "[dsp]") {
  auto fb = mel_filterbank();
  REQUIRE(fb.shape() == std::vector<int>{80, 513});
  int prev_peak = -1;
  for (int m = 0; m < 80; ++m) {
    int peak = 0;
    float pv = -1;
    int rises = 0, falls = 0;
    float last = 0;
    for (int b = 0; b < 513; ++b) {
      float v = fb.data()[static_cast<size_t>(m) * 513 + b];
      REQUIRE(v >= 0.0f);
      if (v > pv) {
        pv = v;
        peak = b;
      }
      if (v > last) ++rises;
      if (v < last) ++falls;
      last = v;
    }
    REQUIRE(pv > 0.0f);
    REQUIRE(peak > prev_peak);  // strictly increasing centers
    prev_peak = peak;
  }
  // per-bin total weight stays at or below the max filter gain (1.0)
  for (int b = 0; b < 513; ++b) {
    float total = 0;
    for (int m = 0; m < 80; ++m) total += fb.data()[static_cast<size_t>(m) * 513 + b];
    REQUIRE(total <= 1.0f + 1e-4f);
  }
}

TEST_CASE("to_mel downsampling keeps frames 0,4,8,...", "[dsp]") {
  auto s = TensorF::zeros({513, 16});
  // put a distinct value into bin 100 of every frame
  for (int t = 0; t < 16; ++t)
    s.data()[static_cast<size_t>(100) * 16 + t] = static_cast<float>(t + 1);
  auto mel = to_mel(s);
  REQUIRE(mel.shape() == std::vector<int>{80, 4});
  // find the mel row responding to bin 100 and verify the kept frames scale
  // as the normalized values of frames {0,4,8,12}
  int row = -1;
  for (int m = 0; m < 80 && row < 0; ++m)
    if (mel.data()[static_cast<size_t>(m) * 4 + 3] > 0) row = m;
  REQUIRE(row >= 0);
  float f0 = mel.data()[static_cast<size_t>(row) * 4 + 0];
  float f3 = mel.data()[static_cast<size_t>(row) * 4 + 3];
  // frame values 1 and 13 of 16 -> normalized (1/16)^.6 and (13/16)^.6
  REQUIRE(f3 / f0 == Catch::Approx(std::pow(13.0, 0.6)).epsilon(1e-3));

  auto zero_mel = to_mel(TensorF::zeros({513, 8}));
  for (size_t i = 0; i < zero_mel.numel(); ++i) REQUIRE(zero_mel.data()[i] == 0.0f);
  REQUIRE_THROWS_AS(to_mel(TensorF::zeros({100, 8})), ShapeError);
}

TEST_CASE("griffin-lim reconstructs a sine and decreases its residual", "[dsp][slow]") {
  auto tone = sine(440.0, 0.6);
  auto mag = magnitude(stft(tone));
  std::vector<double> residuals;
  auto rec = griffin_lim(mag, 60, std::nullopt, {}, 22050, &residuals);
  REQUIRE(residuals.size() == 60);
  for (size_t i = 1; i < residuals.size(); ++i)
    REQUIRE(residuals[i] <= residuals[i - 1] * (1.0 + 1e-9) + 1e-12);

  // Amplitude-matched SNR: phase retrieval leaves a slow global phase drift,
  // so the reference is matched per 512-sample window (amplitude and phase
  // fitted at the known frequency, which is exactly an amplitude-matched
  // reference sine per window). Oracle run measured 21.6 dB with momentum
  // 0.9, zero-phase init, 60 iterations; the acceptance threshold is 20 dB.
  double snr = sine_fit_snr_db(rec, 440.0);
  REQUIRE(snr >= 20.0);

  auto silent = griffin_lim(TensorF::zeros({513, 8}), 5);
  for (float s : silent.samples) REQUIRE(s == 0.0f);
  REQUIRE_THROWS_AS(griffin_lim(mag, 0), ValueError);
}

TEST_CASE("hz/midi conversions", "[dsp]") {
  REQUIRE(hz_to_midi(440.0) == Catch::Approx(69.0));
  REQUIRE(hz_to_midi(220.0) == Catch::Approx(57.0));
  REQUIRE(hz_to_midi(466.16) == Catch::Approx(69.9998).margin(1e-3));
  REQUIRE(quantize_midi(hz_to_midi(466.16)) == 70);
  REQUIRE_THROWS_AS(hz_to_midi(0.0), ValueError);
  REQUIRE(midi_to_hz(69.0) == Catch::Approx(440.0));
}

TEST_CASE("yin finds a sine, rejects noise, skips silence", "[pitch]") {
  auto tone = sine(440.0, 1.0);
  auto track = estimate_f0(tone);
  size_t interior_lo = 2, interior_hi = track.frames() - 2;
  for (size_t i = interior_lo; i < interior_hi; ++i) {
    REQUIRE(track.voiced(i));
    REQUIRE(track.hz[i] == Catch::Approx(440.0).margin(1.0));
  }

  Rng rng(13);
  Waveform noise;
  noise.samples.resize(22050);
  for (auto& s : noise.samples) s = static_cast<float>(rng.uniform(-0.5, 0.5));
  auto ntrack = estimate_f0(noise);
  size_t unvoiced = 0;
  for (size_t i = 0; i < ntrack.frames(); ++i)
    if (!ntrack.voiced(i)) ++unvoiced;
  REQUIRE(static_cast<double>(unvoiced) >= 0.9 * static_cast<double>(ntrack.frames()));

  Waveform silence;
  silence.samples.assign(8192, 0.0f);
  auto strack = estimate_f0(silence);
  for (size_t i = 0; i < strack.frames(); ++i) REQUIRE_FALSE(strack.voiced(i));

  Waveform tiny;
  tiny.samples.assign(100, 0.0f);
  REQUIRE_THROWS_AS(estimate_f0(tiny), ValueError);
}

TEST_CASE("wav round trip", "[wav]") {
  auto tone = sine(220.0, 0.1);
  auto path = std::filesystem::temp_directory_path() / "svs_test_tone.wav";
  write_wav(path, tone);
  auto back = read_wav(path);
  REQUIRE(back.sample_rate == 22050);
  REQUIRE(back.samples.size() == tone.samples.size());
  for (size_t i = 0; i < back.samples.size(); i += 97)
    REQUIRE(back.samples[i] == Catch::Approx(tone.samples[i]).margin(1.0 / 32000));
  std::filesystem::remove(path);
  REQUIRE_THROWS_AS(read_wav("/nonexistent/file.wav"), IoError);
}
