#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>

// Deterministic stream derivation. Every random draw in the engine flows
// from a master seed through derive_stream, keyed by a tag path, so that
// interrupting one trajectory never perturbs the randomness of another.
// std::uniform_*_distribution is implementation-defined; the samplers here
// pin the byte stream to the mt19937_64 output sequence, which the standard
// specifies exactly.
namespace rollgate::rng {

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::mt19937_64 derive_stream(std::uint64_t seed,
                                     std::initializer_list<std::uint64_t> tags) {
  std::uint64_t h = splitmix64(seed ^ 0x8f14e45fceea167aULL);
  for (std::uint64_t t : tags) h = splitmix64(h ^ splitmix64(t + 0x632be59bd9b4e019ULL));
  return std::mt19937_64{h};
}

// Unbiased integer in [0, n) by rejection on the top remainder range.
inline std::uint64_t uniform_index(std::mt19937_64& g, std::uint64_t n) {
  const std::uint64_t limit = std::uint64_t(-1) - std::uint64_t(-1) % n;
  std::uint64_t x;
  do {
    x = g();
  } while (x >= limit);
  return x % n;
}

inline double uniform_real01(std::mt19937_64& g) {
  return double(g() >> 11) * 0x1.0p-53;
}

inline bool bernoulli(std::mt19937_64& g, double p) { return uniform_real01(g) < p; }

inline double normal(std::mt19937_64& g, double mean, double stddev) {
  // Marsaglia polar method; consumes a variable, stream-deterministic
  // number of draws.
  double u, v, s;
  do {
    u = 2.0 * uniform_real01(g) - 1.0;
    v = 2.0 * uniform_real01(g) - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  return mean + stddev * u * std::sqrt(-2.0 * std::log(s) / s);
}

}  // namespace rollgate::rng
