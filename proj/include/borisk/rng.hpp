#pragma once

#include <cstdint>
#include <random>

namespace borisk::rng {

// SplitMix64 step; used both as a generator seeder and as a mixing function.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Derive an independent stream seed from (master, task). Tasks with distinct
// indices get decorrelated streams regardless of scheduling order, which is
// what makes parallel sweeps reproducible.
inline std::uint64_t derive_stream(std::uint64_t master, std::uint64_t task) {
  std::uint64_t s = master;
  std::uint64_t a = splitmix64(s);
  s = a ^ (task * 0xD1342543DE82EF95ULL + 0x2545F4914F6CDD1DULL);
  std::uint64_t b = splitmix64(s);
  return b;
}

inline std::mt19937_64 make_engine(std::uint64_t seed) {
  return std::mt19937_64(seed);
}

}  // namespace borisk::rng
