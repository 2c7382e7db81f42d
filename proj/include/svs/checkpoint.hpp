#pragma once

#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "svs/optim.hpp"

namespace svs {

// Checkpoint container: magic "SVSK", u32 version, a JSON blob (config,
// iteration, optimizer step counters, rng state), then named tensor records
// of (u16 name length, name, u8 ndim, u32 dims..., little-endian f32 data).
inline constexpr uint32_t kCheckpointVersion = 1;

struct CheckpointRecord {
  std::string name;
  std::vector<int> shape;
  std::vector<float> data;
};

struct CheckpointFile {
  nlohmann::json meta;
  std::vector<CheckpointRecord> records;

  void add(const std::string& name, const std::vector<int>& shape,
           const float* data, size_t n) {
    records.push_back({name, shape, std::vector<float>(data, data + n)});
  }

  const CheckpointRecord& find(const std::string& name) const {
    for (const auto& r : records)
      if (r.name == name) return r;
    throw ValueError("checkpoint: missing record " + name);
  }
};

namespace detail {
inline void put_u16le(std::string& s, uint16_t v) {
  s.push_back(static_cast<char>(v & 0xff));
  s.push_back(static_cast<char>((v >> 8) & 0xff));
}
inline void put_u32le(std::string& s, uint32_t v) {
  for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline void put_u64le(std::string& s, uint64_t v) {
  for (int i = 0; i < 8; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

struct ByteReader {
  const std::string& s;
  size_t pos = 0;
  explicit ByteReader(const std::string& bytes) : s(bytes) {}
  void need(size_t n) const {
    if (pos + n > s.size()) throw ParseError("checkpoint: truncated file");
  }
  uint16_t u16() {
    need(2);
    uint16_t v = static_cast<uint16_t>(static_cast<uint8_t>(s[pos]) |
                                       (static_cast<uint8_t>(s[pos + 1]) << 8));
    pos += 2;
    return v;
  }
  uint32_t u32() {
    need(4);
    uint32_t v = 0;
    for (int i = 3; i >= 0; --i)
      v = (v << 8) | static_cast<uint8_t>(s[pos + static_cast<size_t>(i)]);
    pos += 4;
    return v;
  }
  uint64_t u64() {
    need(8);
    uint64_t v = 0;
    for (int i = 7; i >= 0; --i)
      v = (v << 8) | static_cast<uint8_t>(s[pos + static_cast<size_t>(i)]);
    pos += 8;
    return v;
  }
  std::string bytes(size_t n) {
    need(n);
    std::string out = s.substr(pos, n);
    pos += n;
    return out;
  }
};
}  // namespace detail

inline void checkpoint_save(const std::filesystem::path& path,
                            const CheckpointFile& ckpt) {
  std::string out = "SVSK";
  detail::put_u32le(out, kCheckpointVersion);
  std::string meta = ckpt.meta.dump();
  detail::put_u64le(out, meta.size());
  out += meta;
  detail::put_u32le(out, static_cast<uint32_t>(ckpt.records.size()));
  for (const auto& r : ckpt.records) {
    if (r.name.size() > 0xffff) throw ValueError("checkpoint: record name too long");
    detail::put_u16le(out, static_cast<uint16_t>(r.name.size()));
    out += r.name;
    out.push_back(static_cast<char>(r.shape.size()));
    size_t n = 1;
    for (int d : r.shape) {
      detail::put_u32le(out, static_cast<uint32_t>(d));
      n *= static_cast<size_t>(d);
    }
    if (n != r.data.size()) throw ShapeError("checkpoint: record size mismatch");
    size_t off = out.size();
    out.resize(off + 4 * r.data.size());
    std::memcpy(out.data() + off, r.data.data(), 4 * r.data.size());
  }
  write_file_atomic(path, out);
}

inline CheckpointFile checkpoint_load(const std::filesystem::path& path) {
  std::string s = read_file(path);
  detail::ByteReader r(s);
  if (r.bytes(4) != "SVSK") throw ParseError("checkpoint: bad magic");
  uint32_t version = r.u32();
  if (version != kCheckpointVersion)
    throw ParseError("checkpoint: unsupported version " + std::to_string(version));
  uint64_t meta_len = r.u64();
  CheckpointFile ckpt;
  try {
    ckpt.meta = nlohmann::json::parse(r.bytes(meta_len));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("checkpoint: bad metadata: " + std::string(e.what()));
  }
  uint32_t count = r.u32();
  for (uint32_t i = 0; i < count; ++i) {
    CheckpointRecord rec;
    rec.name = r.bytes(r.u16());
    r.need(1);
    int ndim = static_cast<uint8_t>(s[r.pos++]);
    size_t n = 1;
    for (int d = 0; d < ndim; ++d) {
      rec.shape.push_back(static_cast<int>(r.u32()));
      n *= static_cast<size_t>(rec.shape.back());
    }
    std::string payload = r.bytes(4 * n);
    rec.data.resize(n);
    std::memcpy(rec.data.data(), payload.data(), 4 * n);
    ckpt.records.push_back(std::move(rec));
  }
  if (r.pos != s.size()) throw ParseError("checkpoint: trailing bytes");
  return ckpt;
}

// Store <-> checkpoint helpers. Records carry the parameter name plus the
// Adam moments under "adam_m:"/"adam_v:" prefixes.
template <typename T>
void pack_params(CheckpointFile& ckpt, const ParamStore<T>& params,
                 const AdamState<T>& state) {
  for (size_t i = 0; i < params.items().size(); ++i) {
    const auto& [name, tensor] = params.items()[i];
    std::vector<float> data(tensor.numel());
    for (size_t k = 0; k < data.size(); ++k)
      data[k] = static_cast<float>(tensor.data()[k]);
    ckpt.records.push_back({name, tensor.shape(), std::move(data)});
    if (i < state.slots.size()) {
      const auto& slot = state.slots[i];
      std::vector<float> m(slot.m.begin(), slot.m.end());
      std::vector<float> v(slot.v.begin(), slot.v.end());
      ckpt.records.push_back({"adam_m:" + name, tensor.shape(), std::move(m)});
      ckpt.records.push_back({"adam_v:" + name, tensor.shape(), std::move(v)});
    }
  }
}

// Parameter values only (inference loading).
template <typename T>
void unpack_params_only(const CheckpointFile& ckpt, ParamStore<T>& params) {
  for (const auto& [name, tensor] : params.items()) {
    const CheckpointRecord& rec = ckpt.find(name);
    if (rec.shape != tensor.shape())
      throw ShapeError("checkpoint: shape mismatch for " + name);
    Tensor<T> handle = tensor;
    for (size_t k = 0; k < rec.data.size(); ++k)
      handle.data()[k] = static_cast<T>(rec.data[k]);
  }
}

template <typename T>
void unpack_params(const CheckpointFile& ckpt, ParamStore<T>& params,
                   AdamState<T>& state) {
  state.init(params);
  for (size_t i = 0; i < params.items().size(); ++i) {
    const auto& [name, tensor] = params.items()[i];
    const CheckpointRecord& rec = ckpt.find(name);
    if (rec.shape != tensor.shape())
      throw ShapeError("checkpoint: shape mismatch for " + name);
    Tensor<T> handle = tensor;
    for (size_t k = 0; k < rec.data.size(); ++k)
      handle.data()[k] = static_cast<T>(rec.data[k]);
    const CheckpointRecord& m = ckpt.find("adam_m:" + name);
    const CheckpointRecord& v = ckpt.find("adam_v:" + name);
    for (size_t k = 0; k < rec.data.size(); ++k) {
      state.slots[i].m[k] = static_cast<T>(m.data[k]);
      state.slots[i].v[k] = static_cast<T>(v.data[k]);
    }
  }
}

}  // namespace svs
