#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace bpdg {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

using Engine = std::mt19937_64;

/// Independent stream `stream` of a master seed: MT19937-64 seeded with
/// splitmix64(splitmix64(seed) ^ splitmix64(stream + 1)).
inline Engine substream(std::uint64_t seed, std::uint64_t stream) {
  return Engine(splitmix64(splitmix64(seed) ^ splitmix64(stream + 1)));
}

/// Uniform double in [0, 1) from the top 53 bits.
inline double uniform01(Engine& e) { return static_cast<double>(e() >> 11) * 0x1.0p-53; }

/// Exponential variate with the given rate.
inline double exponential(Engine& e, double rate) { return -std::log1p(-uniform01(e)) / rate; }

}  // namespace bpdg
