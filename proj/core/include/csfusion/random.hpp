#pragma once

#include <cstdint>
#include <random>

namespace csfusion {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Child seed for stream (a, b) of a parent seed. Streams never share state.
inline std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t a, std::uint64_t b = 0) {
  return splitmix64(splitmix64(splitmix64(parent) ^ (a + 0x632be59bd9b4e019ULL)) ^
                    (b + 0x2545f4914f6cdd1dULL));
}

}  // namespace csfusion
