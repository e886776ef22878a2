#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <utility>

namespace tasp {

/// 64-bit mixer (splitmix64 finalizer) used to derive independent streams.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

inline std::uint64_t stream_seed(std::initializer_list<std::uint64_t> parts) {
  std::uint64_t h = 0x243F6A8885A308D3ull;
  for (std::uint64_t p : parts) h = mix64(h ^ mix64(p));
  return h;
}

/// Deterministic generator. Wraps std::mt19937_64 and draws bounded integers
/// from raw engine output, so sequences are identical across standard
/// libraries (the std distributions are implementation-defined).
class Rng {
public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform integer in [0, bound). bound must be > 0. Lemire's
  /// multiply-shift rejection method; the slow modulo only runs on rejection.
  std::uint64_t below(std::uint64_t bound) {
    unsigned __int128 m = static_cast<unsigned __int128>(engine_()) * bound;
    auto low = static_cast<std::uint64_t>(m);
    if (low < bound) {
      const std::uint64_t threshold = (std::uint64_t{0} - bound) % bound;
      while (low < threshold) {
        m = static_cast<unsigned __int128>(engine_()) * bound;
        low = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  /// Uniform integer in [lo, hi].
  int range(int lo, int hi) {
    return lo + static_cast<int>(below(static_cast<std::uint64_t>(static_cast<std::int64_t>(hi) - lo + 1)));
  }

  /// Two independent uniform integers in [-r, r] from one draw (0 <= r < 2^31).
  std::pair<int, int> offset_pair(int r) {
    const std::uint32_t span = 2u * static_cast<std::uint32_t>(r) + 1u;
    for (;;) {
      const std::uint64_t bits = engine_();
      const std::uint64_t a = (bits & 0xFFFFFFFFull) * span, b = (bits >> 32) * span;
      if (static_cast<std::uint32_t>(a) < span || static_cast<std::uint32_t>(b) < span) {
        const std::uint32_t threshold = (0u - span) % span;
        if (static_cast<std::uint32_t>(a) < threshold || static_cast<std::uint32_t>(b) < threshold) continue;
      }
      return {static_cast<int>(a >> 32) - r, static_cast<int>(b >> 32) - r};
    }
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

private:
  std::mt19937_64 engine_;
};

}  // namespace tasp
