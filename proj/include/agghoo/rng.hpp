// Seeded random streams.
//
// Every stochastic routine in the library takes an explicit 64-bit seed and
// draws from SplitMix64 (Steele, Lea & Flood, 2014): a counter-based
// generator whose k-th output is mix64(seed + k * 0x9E3779B97F4A7C15).
// Because the output is a pure function of (seed, k), streams reproduce
// bit-for-bit on any platform and in any language that implements the same
// three-line mixer.
#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>
#include <string_view>

namespace agghoo {

inline constexpr std::uint64_t kGoldenGamma = 0x9E3779B97F4A7C15ULL;

constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// FNV-1a, used to fold string tags ("splits", "test", ...) into seeds.
constexpr std::uint64_t fnv1a64(std::string_view s) noexcept {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ULL;
  }
  return h;
}

/// Order-sensitive hash of a word sequence.
constexpr std::uint64_t hash64(std::initializer_list<std::uint64_t> words) noexcept {
  std::uint64_t h = 0x243F6A8885A308D3ULL;
  for (std::uint64_t w : words) h = mix64(h ^ mix64(w + kGoldenGamma));
  return h;
}

class SplitMix64 {
 public:
  using result_type = std::uint64_t;

  explicit constexpr SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return ~result_type{0}; }

  constexpr result_type operator()() noexcept {
    state_ += kGoldenGamma;
    return mix64(state_);
  }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  /// Uniform on (0, 1].
  double uniform_open_zero() noexcept {
    return static_cast<double>(((*this)() >> 11) + 1) * 0x1.0p-53;
  }

  /// Exactly uniform integer in [0, bound); Lemire's multiply-shift with rejection.
  std::uint64_t below(std::uint64_t bound) noexcept {
    if (bound <= 1) return 0;
    const std::uint64_t threshold = (0 - bound) % bound;
    for (;;) {
      const unsigned __int128 m = static_cast<unsigned __int128>((*this)()) * bound;
      if (static_cast<std::uint64_t>(m) >= threshold) return static_cast<std::uint64_t>(m >> 64);
    }
  }

  /// Standard normal by Box-Muller; consumes two draws per call.
  double normal() noexcept {
    const double u1 = uniform_open_zero();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::uint64_t state_;
};

}  // namespace agghoo
