#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace depaint {

using Rng = std::mt19937_64;

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept
{
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Purpose tags mixed into derived stream seeds.
enum class Phase : std::uint64_t {
  initialize = 1,
  sample = 2,
  evaluate = 3,
  perturb = 4,
};

/// Independent stream for (seed, agent, phase, step). Streams never depend on
/// thread scheduling, only on these coordinates.
inline Rng derive_rng(std::uint64_t seed, std::uint64_t agent, Phase phase, std::uint64_t step = 0)
{
  std::uint64_t h = splitmix64(seed);
  for (std::uint64_t part : {agent, static_cast<std::uint64_t>(phase), step}) {
    h = splitmix64(h ^ splitmix64(part));
  }
  return Rng{h};
}

/// Uniform double in [0, 1) from the top 53 bits.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline double uniform(Rng& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

}  // namespace depaint
