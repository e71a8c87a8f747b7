#pragma once

#include <bit>
#include <cstdint>
#include <limits>
#include <string>

#include "spectest/error.hpp"

namespace spectest {

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t hash_combine(std::uint64_t seed, std::uint64_t value) noexcept {
  return mix64(seed ^ (mix64(value) + 0x632be59bd9b4e019ULL + (seed << 6) + (seed >> 2)));
}

template <typename... Ts>
constexpr std::uint64_t hash_seed(std::uint64_t base, Ts... parts) noexcept {
  std::uint64_t h = mix64(base);
  ((h = hash_combine(h, static_cast<std::uint64_t>(parts))), ...);
  return h;
}

/// Bit pattern of a double, for folding real parameters into seeds.
inline std::uint64_t bits_of(double v) noexcept { return std::bit_cast<std::uint64_t>(v); }

/// Counter-based generator: output k is a pure function of (key, k), so any
/// stream can be reconstructed without replaying others. Satisfies
/// UniformRandomBitGenerator.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  explicit CounterRng(std::uint64_t key) noexcept : key_(mix64(key)) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept {
    return mix64(key_ + 0x9e3779b97f4a7c15ULL * ++counter_);
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  std::uint64_t counter() const noexcept { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

/// Accepts decimal or 0x-prefixed hexadecimal.
inline std::uint64_t parse_seed(const std::string& text) {
  try {
    std::size_t pos = 0;
    std::uint64_t v = 0;
    if (text.size() > 2 && text[0] == '0' && (text[1] == 'x' || text[1] == 'X')) {
      v = std::stoull(text.substr(2), &pos, 16);
      pos += 2;
    } else {
      v = std::stoull(text, &pos, 10);
    }
    if (pos != text.size()) throw Error(ErrorCode::ParseError, "trailing characters in seed '" + text + "'");
    return v;
  } catch (const std::logic_error&) {
    throw Error(ErrorCode::ParseError, "invalid seed '" + text + "'");
  }
}

}  // namespace spectest
