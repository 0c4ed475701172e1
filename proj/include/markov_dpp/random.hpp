#ifndef MARKOV_DPP_RANDOM_HPP
#define MARKOV_DPP_RANDOM_HPP

#include <cstdint>
#include <random>

namespace markov_dpp {

using Rng = std::mt19937_64;

// Child seeds are derived from one top-level seed so that every component of
// a run (chain, MLMC levels, data, probes) draws from its own stream:
//   child = splitmix64(splitmix64(parent) ^ stream_id)
enum class SeedStream : std::uint64_t {
  kChain = 1,
  kMlmcLevels = 2,
  kData = 3,
  kInitialState = 4,
  kProbes = 5,
  kLipschitz = 6,
};

inline std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t child_seed(std::uint64_t parent, SeedStream stream) {
  return splitmix64(splitmix64(parent) ^ static_cast<std::uint64_t>(stream));
}

inline std::uint64_t child_seed(std::uint64_t parent, std::uint64_t index) {
  return splitmix64(splitmix64(parent) ^ (0x100 + index));
}

// Uniform double in [0, 1) from the top 53 bits; independent of the
// standard library's distribution implementations.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace markov_dpp

#endif  // MARKOV_DPP_RANDOM_HPP
