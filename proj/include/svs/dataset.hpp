#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "svs/score.hpp"
#include "svs/synthsong.hpp"

namespace svs {

struct ManifestItem {
  std::string score_path;
  std::string wav_path;
  std::string split;  // train | val | test
};

// Dataset manifest: (score, wav) pairs with split tags. Relative paths are
// resolved against the manifest's own directory.
struct Manifest {
  std::vector<ManifestItem> items;

  static Manifest load(const std::filesystem::path& path) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("manifest: " + std::string(e.what()));
    }
    Manifest m;
    if (!j.contains("items") || !j.at("items").is_array())
      throw ParseError("manifest: missing 'items' array");
    auto base = path.parent_path();
    for (const auto& it : j.at("items")) {
      ManifestItem item;
      item.score_path = (base / it.at("score").get<std::string>()).string();
      item.wav_path = (base / it.at("wav").get<std::string>()).string();
      item.split = it.value("split", "train");
      if (item.split != "train" && item.split != "val" && item.split != "test")
        throw ParseError("manifest: unknown split tag '" + item.split + "'");
      m.items.push_back(std::move(item));
    }
    return m;
  }

  static void save(const std::filesystem::path& path,
                   const std::vector<ManifestItem>& items) {
    nlohmann::json j;
    j["items"] = nlohmann::json::array();
    for (const auto& it : items)
      j["items"].push_back(
          {{"score", it.score_path}, {"wav", it.wav_path}, {"split", it.split}});
    write_file_atomic(path, j.dump(2) + "\n");
  }
};

// Ready-to-train features for one song: normalized linear/mel spectrograms on
// the exact 4:1 fine/coarse grid plus the frame-aligned id sequences.
struct SongFeatures {
  std::string id;
  Score score;
  Tensor<float> lin;       // {513, 4L}, normalized
  Tensor<float> mel;       // {80, L}, normalized
  std::vector<int> text;   // length L
  std::vector<int> pitch;  // length L

  int frames() const { return mel.dim(1); }
};

inline SongFeatures extract_features(const Score& score, const Waveform& wav,
                                     const std::string& id = "") {
  SongFeatures f;
  f.id = id;
  f.score = score;
  Tensor<float> raw = pad_frames_mod4(magnitude(stft(wav)));
  f.lin = normalize_mag(raw);
  f.mel = to_mel(raw);
  auto aligned = align_frames(score, wav.sample_rate, kCoarseHop, f.mel.dim(1));
  f.text = std::move(aligned.text);
  f.pitch = std::move(aligned.pitch);
  return f;
}

struct Dataset {
  std::vector<SongFeatures> train, val, test;

  static Dataset load(const std::filesystem::path& manifest_path) {
    Manifest m = Manifest::load(manifest_path);
    Dataset d;
    for (const auto& item : m.items) {
      Score score = parse_score_json(item.score_path);
      Waveform wav = read_wav(item.wav_path);
      SongFeatures f = extract_features(score, wav, item.score_path);
      if (item.split == "train")
        d.train.push_back(std::move(f));
      else if (item.split == "val")
        d.val.push_back(std::move(f));
      else
        d.test.push_back(std::move(f));
    }
    return d;
  }
};

// Fixed-length training example cropped out of one song. mel_prev is the
// one-frame-right-shifted target within the crop (zero initial frame).
struct CropItem {
  std::vector<int> text, pitch;
  Tensor<float> mel, lin, mel_prev;
};

inline CropItem make_crop(const SongFeatures& song, int start, int len) {
  int L = song.frames();
  if (start < 0 || start + len > L) throw ShapeError("make_crop: range out of bounds");
  CropItem c;
  c.text.assign(song.text.begin() + start, song.text.begin() + start + len);
  c.pitch.assign(song.pitch.begin() + start, song.pitch.begin() + start + len);
  c.mel = crop_time(song.mel, start, start + len).detach();
  c.lin = crop_time(song.lin, 4 * start, 4 * (start + len)).detach();
  c.mel_prev = shift_right_time(c.mel).detach();
  return c;
}

// Writes `count` synthetic songs plus a manifest. Every tenth song lands in
// val (index 8 mod 10) or test (index 9 mod 10).
inline std::filesystem::path write_synthetic_dataset(
    const std::filesystem::path& out_dir, const SynthSongConfig& base_cfg,
    int count) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir / "songs");
  std::vector<ManifestItem> items;
  for (int i = 0; i < count; ++i) {
    SynthSongConfig cfg = base_cfg;
    cfg.seed = base_cfg.seed + static_cast<uint64_t>(i) * 7919;
    auto [score, wav] = generate_synthetic_song(cfg);
    char name[32];
    std::snprintf(name, sizeof(name), "song_%03d", i);
    std::string score_rel = std::string("songs/") + name + ".json";
    std::string wav_rel = std::string("songs/") + name + ".wav";
    write_file_atomic(out_dir / score_rel, score_to_json(score));
    write_wav(out_dir / wav_rel, wav);
    ManifestItem item;
    item.score_path = score_rel;
    item.wav_path = wav_rel;
    item.split = (i % 10 == 8) ? "val" : (i % 10 == 9) ? "test" : "train";
    items.push_back(std::move(item));
  }
  fs::path manifest = out_dir / "manifest.json";
  Manifest::save(manifest, items);
  return manifest;
}

}  // namespace svs
