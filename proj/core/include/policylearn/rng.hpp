#pragma once

#include <cstdint>
#include <random>

namespace policylearn {

// splitmix64 finalizer; used to spawn independent substreams from one master
// seed so that stream k is reproducible without drawing streams 0..k-1.
inline std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  return mix_seed(master + 0x9E3779B97F4A7C15ULL * (stream + 1));
}

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t seed) { return Rng(seed); }

}  // namespace policylearn
