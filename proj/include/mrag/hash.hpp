#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace mrag::hash {

inline constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
inline constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

/// 64-bit FNV-1a; stable across platforms and runs (unlike std::hash).
constexpr std::uint64_t fnv1a(std::string_view bytes, std::uint64_t state = kFnvOffset) {
  for (char c : bytes) {
    state ^= static_cast<unsigned char>(c);
    state *= kFnvPrime;
  }
  return state;
}

constexpr std::uint64_t fnv1a_u64(std::uint64_t value, std::uint64_t state = kFnvOffset) {
  for (int i = 0; i < 8; ++i) {
    state ^= (value >> (8 * i)) & 0xFF;
    state *= kFnvPrime;
  }
  return state;
}

/// SplitMix64 finaliser, used to decorrelate FNV outputs before they seed a PRNG.
constexpr std::uint64_t mix(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Maps a 64-bit value to [0, 1) using its top 53 bits.
constexpr double unit_interval(std::uint64_t value) {
  return static_cast<double>(value >> 11) * 0x1.0p-53;
}

std::string hex(std::uint64_t value);

}  // namespace mrag::hash
