#pragma once

#include <cstdint>
#include <random>
#include <sstream>
#include <string>

namespace poar {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer; used to derive independent stream seeds from a base
/// seed so that adding a consumer never shifts another consumer's stream.
constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline std::string save_rng(const Rng& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

inline void load_rng(Rng& rng, const std::string& state) {
  std::istringstream is(state);
  is >> rng;
}

/// Uniform double in [0, 1) built from the top 53 bits of one draw. Used
/// instead of std::uniform_real_distribution so sequences do not depend on
/// the standard library implementation.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace poar
