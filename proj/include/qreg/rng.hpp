#ifndef QREG_RNG_HPP
#define QREG_RNG_HPP

#include <cstdint>
#include <random>

namespace qreg {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Generator for replication `counter` of a run keyed by `seed`. Keying by
// the counter makes resampling results independent of execution order and
// thread count.
inline std::mt19937_64 replication_rng(std::uint64_t seed,
                                       std::uint64_t counter) {
  return std::mt19937_64(splitmix64(splitmix64(seed) ^ counter));
}

}  // namespace qreg

#endif  // QREG_RNG_HPP
