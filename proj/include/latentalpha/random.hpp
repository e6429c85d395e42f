#pragma once

#include <cstdint>
#include <random>

namespace latentalpha {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer; used to derive independent per-path streams from a
/// master seed and a counter.
constexpr std::uint64_t mix_seed(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline Rng stream_for(std::uint64_t master_seed, std::uint64_t counter) {
  return Rng(mix_seed(master_seed ^ mix_seed(counter + 1)));
}

}  // namespace latentalpha
