#pragma once

#include <cstdint>
#include <random>

namespace her2flex {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Derives an independent stream seed from a base seed and tag values, so
// per-sample work can be parallelized or reordered without changing results.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag0, std::uint64_t tag1 = 0) {
  return splitmix64(splitmix64(base ^ splitmix64(tag0)) ^ splitmix64(tag1 + 0x6a09e667f3bcc909ULL));
}

inline Rng make_rng(std::uint64_t seed) { return Rng(splitmix64(seed)); }

template <typename Scalar>
Scalar uniform(Rng& rng, Scalar lo, Scalar hi) {
  std::uniform_real_distribution<Scalar> d(lo, hi);
  return d(rng);
}

template <typename Scalar>
Scalar normal(Rng& rng, Scalar mean, Scalar stddev) {
  std::normal_distribution<Scalar> d(mean, stddev);
  return d(rng);
}

inline int uniform_int(Rng& rng, int lo, int hi) {  // inclusive bounds
  std::uniform_int_distribution<int> d(lo, hi);
  return d(rng);
}

inline bool coin(Rng& rng) { return (rng() & 1ULL) != 0; }

}  // namespace her2flex
