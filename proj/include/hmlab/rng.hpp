#pragma once

// Seeded streams.  Every stochastic object derives its generator from the
// user seed plus a tuple of indices (path, step, slice, trial), so the draws
// for one index never depend on scheduling.

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace hmlab {

inline std::mt19937_64 make_stream(std::uint64_t seed, std::initializer_list<std::uint64_t> ids = {}) {
  std::vector<std::uint32_t> words;
  words.reserve(2 * (ids.size() + 1));
  auto push = [&](std::uint64_t v) {
    words.push_back(static_cast<std::uint32_t>(v));
    words.push_back(static_cast<std::uint32_t>(v >> 32));
  };
  push(seed);
  for (auto id : ids) push(id);
  std::seed_seq seq(words.begin(), words.end());
  return std::mt19937_64(seq);
}

// splitmix64 finalizer, used to derive child seeds.
inline std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> ids) {
  std::uint64_t h = mix_seed(seed);
  for (auto id : ids) h = mix_seed(h ^ mix_seed(id + 0x632be59bd9b4e019ULL));
  return h;
}

inline double uniform01(std::mt19937_64& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

}  // namespace hmlab
