#pragma once

#include <algorithm>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "svs/dsp.hpp"
#include "svs/hangul.hpp"

namespace svs {

struct Note {
  int pitch_midi = 60;     // 36..84
  double onset_s = 0.0;
  double offset_s = 0.0;
  std::string syllable;    // one Hangul syllable, UTF-8
};

struct Score {
  int sample_rate = 22050;
  std::vector<Note> notes;  // time-sorted, non-overlapping

  double span_seconds() const {
    return notes.empty() ? 0.0 : notes.back().offset_s;
  }
};

namespace detail {
inline void validate_note(const Note& n, size_t idx) {
  auto where = [idx] { return "note " + std::to_string(idx); };
  if (n.pitch_midi < 36 || n.pitch_midi > 84)
    throw ValueError(where() + ": pitch " + std::to_string(n.pitch_midi) +
                     " outside 36..84");
  if (!(n.offset_s > n.onset_s))
    throw ValueError(where() + ": offset must be greater than onset");
  if (n.onset_s < 0) throw ValueError(where() + ": negative onset");
  char32_t cp = utf8_single_codepoint(n.syllable);
  if (!is_hangul_syllable(cp))
    throw ValueError(where() + ": syllable is not a Hangul syllable block");
}
}  // namespace detail

// Sorts by onset, validates every note and pairwise non-overlap. The index in
// error messages refers to the sorted order.
inline void validate_score(Score& score, std::vector<std::string>* warnings = nullptr) {
  bool sorted = std::is_sorted(
      score.notes.begin(), score.notes.end(),
      [](const Note& a, const Note& b) { return a.onset_s < b.onset_s; });
  if (!sorted) {
    std::stable_sort(
        score.notes.begin(), score.notes.end(),
        [](const Note& a, const Note& b) { return a.onset_s < b.onset_s; });
    if (warnings) warnings->push_back("notes were out of order and have been sorted");
  }
  for (size_t i = 0; i < score.notes.size(); ++i) {
    detail::validate_note(score.notes[i], i);
    if (i > 0 && score.notes[i].onset_s < score.notes[i - 1].offset_s - 1e-9)
      throw ValueError("note " + std::to_string(i) + ": overlaps previous note");
  }
}

inline Score parse_score_json_text(const std::string& text,
                                   std::vector<std::string>* warnings = nullptr) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("score json: ") + e.what());
  }
  Score score;
  if (j.contains("sr")) score.sample_rate = j.at("sr").get<int>();
  if (!j.contains("notes") || !j.at("notes").is_array())
    throw ParseError("score json: missing 'notes' array");
  size_t idx = 0;
  for (const auto& n : j.at("notes")) {
    Note note;
    try {
      note.pitch_midi = n.at("pitch").get<int>();
      note.onset_s = n.at("on").get<double>();
      note.offset_s = n.at("off").get<double>();
      note.syllable = n.at("syl").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("score json: note " + std::to_string(idx) + ": " + e.what());
    }
    score.notes.push_back(std::move(note));
    ++idx;
  }
  validate_score(score, warnings);
  return score;
}

inline Score parse_score_json(const std::filesystem::path& path,
                              std::vector<std::string>* warnings = nullptr) {
  return parse_score_json_text(read_file(path), warnings);
}

inline std::string score_to_json(const Score& score) {
  nlohmann::json j;
  j["sr"] = score.sample_rate;
  j["notes"] = nlohmann::json::array();
  for (const Note& n : score.notes)
    j["notes"].push_back({{"pitch", n.pitch_midi},
                          {"on", n.onset_s},
                          {"off", n.offset_s},
                          {"syl", n.syllable}});
  return j.dump(2) + "\n";
}

// Per-coarse-frame phoneme and pitch id sequences of equal length L.
struct FrameAlignedInput {
  std::vector<int> text;
  std::vector<int> pitch;

  size_t frames() const { return text.size(); }
};

// Note boundaries round to the nearest coarse frame; onset ties round down,
// offset ties round up, and every note keeps at least one frame. Each note
// emits [onset, nucleus x (n-2), coda]; the coda frame is dropped first and
// the onset second when the note is too short, and an empty coda slot leaves
// the last frame as nucleus.
inline FrameAlignedInput align_frames(const Score& score, int sample_rate,
                                      int coarse_hop, int total_frames) {
  if (total_frames < 1) throw ValueError("align_frames: total_frames must be >= 1");
  double frame_dur = static_cast<double>(coarse_hop) / sample_rate;
  FrameAlignedInput out;
  out.text.assign(static_cast<size_t>(total_frames), PhonemeVocab::kRest);
  out.pitch.assign(static_cast<size_t>(total_frames), PitchVocab::kRest);

  int prev_end = 0;
  for (size_t i = 0; i < score.notes.size(); ++i) {
    const Note& n = score.notes[i];
    if (i > 0 && n.onset_s < score.notes[i - 1].offset_s - 1e-9)
      throw ValueError("align_frames: note " + std::to_string(i) +
                       " overlaps previous note");
    double von = n.onset_s / frame_dur;
    double voff = n.offset_s / frame_dur;
    int f_on = static_cast<int>(std::ceil(von - 0.5));   // ties round down
    int f_off = static_cast<int>(std::floor(voff + 0.5)); // ties round up
    f_on = std::max(f_on, prev_end);
    if (f_off <= f_on) f_off = f_on + 1;
    if (f_off > total_frames)
      throw ValueError("align_frames: total_frames does not cover note " +
                       std::to_string(i));
    prev_end = f_off;

    Jamo j = decompose_hangul(utf8_single_codepoint(n.syllable));
    int len = f_off - f_on;
    for (int t = f_on; t < f_off; ++t) {
      out.text[static_cast<size_t>(t)] = PhonemeVocab::nucleus_id(j.nucleus);
      out.pitch[static_cast<size_t>(t)] = n.pitch_midi;
    }
    if (len >= 2) out.text[static_cast<size_t>(f_on)] = PhonemeVocab::onset_id(j.onset);
    if (len >= 3 && j.coda != 0)
      out.text[static_cast<size_t>(f_off) - 1] = PhonemeVocab::coda_id(j.coda);
  }
  return out;
}

// Number of coarse frames produced by the feature pipeline for a waveform of
// `len` samples (the padded fine-frame count divided by 4).
inline int coarse_frame_count(size_t len, int hop = 256) {
  int fine = 1 + static_cast<int>(len) / hop;
  return (fine + 3) / 4;
}

}  // namespace svs
