#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace svs {

inline constexpr const char* kVersion = "0.1.0";

// Error hierarchy. Everything user-facing throws one of these so the CLI can
// map failures to exit codes and keep the offending path/name in the message.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ShapeError : Error {
  using Error::Error;
};
struct ValueError : Error {
  using Error::Error;
};
struct NumericError : Error {
  using Error::Error;
};
struct IoError : Error {
  using Error::Error;
};
struct ParseError : Error {
  using Error::Error;
};

// Deterministic RNG used everywhere instead of the implementation-defined
// std distributions. State serializes to a string for checkpoints.
class Rng {
 public:
  explicit Rng(uint64_t seed = 0) : engine_(seed) {}

  // Uniform in [0, 1) with 53-bit resolution.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * (1.0 / 9007199254740992.0);
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Integer in [0, n).
  uint64_t next_below(uint64_t n) {
    if (n == 0) throw ValueError("Rng::next_below: n must be > 0");
    return static_cast<uint64_t>(uniform() * static_cast<double>(n)) % n;
  }

  int uniform_int(int lo, int hi) {  // inclusive range
    if (hi < lo) throw ValueError("Rng::uniform_int: empty range");
    return lo + static_cast<int>(next_below(static_cast<uint64_t>(hi - lo + 1)));
  }

  // Box-Muller, one value per call (the mate is discarded to keep state
  // serialization a pure function of the engine).
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 1e-300) u1 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  std::string state() const {
    std::ostringstream os;
    os << engine_;
    return os.str();
  }

  void set_state(const std::string& s) {
    std::istringstream is(s);
    is >> engine_;
    if (is.fail()) throw ParseError("Rng::set_state: malformed state string");
  }

 private:
  std::mt19937_64 engine_;
};

// Atomic file write: stage to a sibling temp file, then rename. Interrupted
// runs never leave a truncated artifact at the destination path.
inline void write_file_atomic(const std::filesystem::path& path,
                              const std::string& bytes) {
  namespace fs = std::filesystem;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open for write: " + tmp.string());
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!os) throw IoError("write failed: " + tmp.string());
  }
  fs::rename(tmp, path);
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open file: " + path.string());
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

}  // namespace svs
