#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "svs/score.hpp"

namespace svs {

// Minimal Standard MIDI File format-0 reader: one track, tempo meta events,
// note on/off with running status. Seconds are resolved through the tempo
// map (default 120 BPM until the first tempo event).
namespace smf {

struct Reader {
  const std::string& s;
  size_t pos = 0;

  explicit Reader(const std::string& bytes) : s(bytes) {}

  uint8_t u8() {
    if (pos >= s.size()) throw ParseError("midi: unexpected end of file");
    return static_cast<uint8_t>(s[pos++]);
  }
  uint16_t u16() { return static_cast<uint16_t>((u8() << 8) | u8()); }
  uint32_t u32() {
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v = (v << 8) | u8();
    return v;
  }
  uint32_t varint() {
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      uint8_t b = u8();
      v = (v << 7) | (b & 0x7f);
      if (!(b & 0x80)) return v;
    }
    throw ParseError("midi: variable-length quantity too long");
  }
  std::string bytes(size_t n) {
    if (pos + n > s.size()) throw ParseError("midi: truncated chunk");
    std::string out = s.substr(pos, n);
    pos += n;
    return out;
  }
};

struct TempoSegment {
  uint64_t tick;
  uint32_t us_per_qn;
};

inline double ticks_to_seconds(uint64_t tick, const std::vector<TempoSegment>& map,
                               int division) {
  double seconds = 0.0;
  uint64_t prev_tick = 0;
  uint32_t tempo = 500000;  // 120 BPM default
  for (const auto& seg : map) {
    if (seg.tick >= tick) break;
    seconds += static_cast<double>(seg.tick - prev_tick) * tempo / (1e6 * division);
    prev_tick = seg.tick;
    tempo = seg.us_per_qn;
  }
  seconds += static_cast<double>(tick - prev_tick) * tempo / (1e6 * division);
  return seconds;
}

}  // namespace smf

inline Score parse_midi_smf0(const std::filesystem::path& path,
                             const std::vector<std::string>& lyric_syllables) {
  std::string data = read_file(path);
  smf::Reader r(data);
  if (r.bytes(4) != "MThd") throw ParseError("midi: missing MThd header");
  if (r.u32() != 6) throw ParseError("midi: bad MThd length");
  uint16_t format = r.u16();
  uint16_t ntrks = r.u16();
  uint16_t division = r.u16();
  if (format != 0) throw ParseError("midi: only SMF format 0 is supported");
  if (ntrks != 1) throw ParseError("midi: format 0 requires exactly one track");
  if (division & 0x8000) throw ParseError("midi: SMPTE division is not supported");
  if (division == 0) throw ParseError("midi: zero division");

  if (r.bytes(4) != "MTrk") throw ParseError("midi: missing MTrk chunk");
  uint32_t track_len = r.u32();
  size_t track_end = r.pos + track_len;
  if (track_end > data.size()) throw ParseError("midi: truncated track");

  std::vector<smf::TempoSegment> tempo_map;
  struct RawNote {
    uint64_t on_tick;
    uint64_t off_tick;
    int pitch;
  };
  std::vector<RawNote> notes;
  bool active = false;
  int active_pitch = -1;
  uint64_t active_tick = 0;

  uint64_t tick = 0;
  int running_status = -1;
  bool end_of_track = false;
  while (r.pos < track_end && !end_of_track) {
    tick += r.varint();
    uint8_t b = r.u8();
    int status;
    bool has_first_data = false;
    uint8_t first_data = 0;
    if (b & 0x80) {
      status = b;
    } else {
      if (running_status < 0)
        throw ParseError("midi: data byte without running status");
      status = running_status;
      has_first_data = true;
      first_data = b;
    }
    if (status == 0xFF) {
      if (has_first_data) throw ParseError("midi: running status into meta event");
      uint8_t type = r.u8();
      uint32_t len = r.varint();
      std::string body = r.bytes(len);
      if (type == 0x51) {
        if (len != 3) throw ParseError("midi: bad tempo event length");
        uint32_t us = (static_cast<uint8_t>(body[0]) << 16) |
                      (static_cast<uint8_t>(body[1]) << 8) |
                      static_cast<uint8_t>(body[2]);
        tempo_map.push_back({tick, us});
      } else if (type == 0x2F) {
        end_of_track = true;
      }
      running_status = -1;
      continue;
    }
    if (status == 0xF0 || status == 0xF7) {
      if (has_first_data) throw ParseError("midi: running status into sysex");
      uint32_t len = r.varint();
      r.bytes(len);
      running_status = -1;
      continue;
    }
    running_status = status;
    int kind = status & 0xF0;
    int data_count = (kind == 0xC0 || kind == 0xD0) ? 1 : 2;
    uint8_t d1 = has_first_data ? first_data : r.u8();
    uint8_t d2 = data_count == 2 ? r.u8() : 0;
    if (kind == 0x90 && d2 > 0) {
      if (active)
        throw ParseError("midi: polyphony detected at tick " + std::to_string(tick));
      active = true;
      active_pitch = d1;
      active_tick = tick;
    } else if (kind == 0x80 || (kind == 0x90 && d2 == 0)) {
      if (!active || active_pitch != d1)
        throw ParseError("midi: unmatched note-off at tick " + std::to_string(tick));
      notes.push_back({active_tick, tick, active_pitch});
      active = false;
    }
  }
  if (active) throw ParseError("midi: note still sounding at end of track");

  if (lyric_syllables.size() != notes.size())
    throw ValueError("midi: syllable count " + std::to_string(lyric_syllables.size()) +
                     " does not match note count " + std::to_string(notes.size()));

  Score score;
  for (size_t i = 0; i < notes.size(); ++i) {
    Note n;
    n.pitch_midi = notes[i].pitch;
    n.onset_s = smf::ticks_to_seconds(notes[i].on_tick, tempo_map, division);
    n.offset_s = smf::ticks_to_seconds(notes[i].off_tick, tempo_map, division);
    n.syllable = lyric_syllables[i];
    score.notes.push_back(std::move(n));
  }
  validate_score(score);
  return score;
}

}  // namespace svs
