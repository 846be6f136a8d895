#pragma once

#include <charconv>
#include <cstdint>
#include <string>

namespace pipeflow {

/// Shortest round-trip decimal form of a double (to_chars), so CSV and JSON
/// artifacts are byte-stable across runs.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

/// RFC-4180 field quoting: only fields containing comma, quote, or newline
/// get wrapped, with embedded quotes doubled.
inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out += c;
  }
  out += '"';
  return out;
}

/// Deterministic 64-bit RNG (splitmix64 seeding a xorshift* core). Used for
/// synthetic data so outputs do not depend on the standard library's
/// distribution implementations.
struct Rng {
  std::uint64_t state;

  explicit Rng(std::uint64_t seed) {
    // splitmix64 scramble so nearby seeds give unrelated streams
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    state = (z ^ (z >> 31)) | 1ULL;
  }

  std::uint64_t next_u64() {
    std::uint64_t x = state;
    x ^= x >> 12;
    x ^= x << 25;
    x ^= x >> 27;
    state = x;
    return x * 0x2545f4914f6cdd1dULL;
  }

  /// Uniform integer in [0, n).
  std::uint64_t uniform(std::uint64_t n) { return n == 0 ? 0 : next_u64() % n; }

  /// Uniform integer in [lo, hi] inclusive.
  long long range(long long lo, long long hi) {
    return lo + static_cast<long long>(uniform(static_cast<std::uint64_t>(hi - lo + 1)));
  }

  /// Uniform double in [0, 1).
  double unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  std::uint8_t byte() { return static_cast<std::uint8_t>(next_u64() & 0xff); }
};

}  // namespace pipeflow
