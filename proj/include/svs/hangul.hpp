#pragma once

#include <string>

#include "svs/common.hpp"

namespace svs {

// Unicode Hangul syllable block arithmetic (U+AC00..U+D7A3):
//   cp - 0xAC00 = (onset * 21 + nucleus) * 28 + coda
inline constexpr char32_t kHangulBase = 0xAC00;
inline constexpr char32_t kHangulEnd = 0xD7A3;
inline constexpr int kOnsetCount = 19;
inline constexpr int kNucleusCount = 21;
inline constexpr int kCodaCount = 28;  // slot 0 = no coda
inline constexpr int kSilentOnset = 11;  // ㅇ carries no consonant sound

struct Jamo {
  int onset = 0;
  int nucleus = 0;
  int coda = 0;
};

inline bool is_hangul_syllable(char32_t cp) {
  return cp >= kHangulBase && cp <= kHangulEnd;
}

inline Jamo decompose_hangul(char32_t cp) {
  if (!is_hangul_syllable(cp))
    throw ValueError("decompose_hangul: code point U+" +
                     std::to_string(static_cast<uint32_t>(cp)) +
                     " is not a Hangul syllable");
  int s = static_cast<int>(cp - kHangulBase);
  Jamo j;
  j.coda = s % kCodaCount;
  j.nucleus = (s / kCodaCount) % kNucleusCount;
  j.onset = s / (kCodaCount * kNucleusCount);
  return j;
}

inline char32_t recompose_hangul(const Jamo& j) {
  if (j.onset < 0 || j.onset >= kOnsetCount || j.nucleus < 0 ||
      j.nucleus >= kNucleusCount || j.coda < 0 || j.coda >= kCodaCount)
    throw ValueError("recompose_hangul: jamo indices out of range");
  return kHangulBase +
         static_cast<char32_t>((j.onset * kNucleusCount + j.nucleus) * kCodaCount +
                               j.coda);
}

// Phoneme id space: onset jamo, nucleus jamo, coda slots (slot 0 reserved so
// the block arithmetic carries over), then REST and PAD. 70 ids total.
struct PhonemeVocab {
  static constexpr int kOnsetBase = 0;
  static constexpr int kNucleusBase = kOnsetCount;                  // 19
  static constexpr int kCodaBase = kOnsetCount + kNucleusCount;     // 40
  static constexpr int kRest = kCodaBase + kCodaCount;              // 68
  static constexpr int kPad = kRest + 1;                            // 69
  static constexpr int kSize = kPad + 1;                            // 70

  static int onset_id(int onset) { return kOnsetBase + onset; }
  static int nucleus_id(int nucleus) { return kNucleusBase + nucleus; }
  static int coda_id(int coda) { return kCodaBase + coda; }
};

// Pitch ids: raw MIDI numbers 0..127 plus REST and PAD tokens.
struct PitchVocab {
  static constexpr int kRest = 128;
  static constexpr int kPad = 129;
  static constexpr int kSize = 130;
};

// Decodes a UTF-8 string that must contain exactly one code point.
inline char32_t utf8_single_codepoint(const std::string& s) {
  if (s.empty()) throw ParseError("utf8_single_codepoint: empty string");
  unsigned char c0 = static_cast<unsigned char>(s[0]);
  size_t len = 1;
  char32_t cp = 0;
  if (c0 < 0x80) {
    cp = c0;
  } else if ((c0 >> 5) == 0x6) {
    len = 2;
    cp = c0 & 0x1f;
  } else if ((c0 >> 4) == 0xe) {
    len = 3;
    cp = c0 & 0x0f;
  } else if ((c0 >> 3) == 0x1e) {
    len = 4;
    cp = c0 & 0x07;
  } else {
    throw ParseError("utf8_single_codepoint: invalid UTF-8 lead byte");
  }
  if (s.size() != len)
    throw ParseError("utf8_single_codepoint: expected exactly one code point");
  for (size_t i = 1; i < len; ++i) {
    unsigned char c = static_cast<unsigned char>(s[i]);
    if ((c >> 6) != 0x2)
      throw ParseError("utf8_single_codepoint: invalid UTF-8 continuation");
    cp = (cp << 6) | (c & 0x3f);
  }
  return cp;
}

inline std::string codepoint_to_utf8(char32_t cp) {
  std::string out;
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xc0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3f)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xe0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3f)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3f)));
  } else {
    out.push_back(static_cast<char>(0xf0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3f)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3f)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3f)));
  }
  return out;
}

}  // namespace svs
