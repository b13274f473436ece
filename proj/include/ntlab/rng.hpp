#pragma once

#include <cstdint>

namespace ntlab {

/// Independent, reproducible seed for a named random stream of a run.
constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) noexcept {
  // splitmix64 finalizer over the combined word
  std::uint64_t z = base * 0x9E3779B97F4A7C15ULL + stream + 0x632BE59BD9B4E019ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

namespace streams {
inline constexpr std::uint64_t target = 1;
inline constexpr std::uint64_t source = 2;
inline constexpr std::uint64_t perturb = 3;
inline constexpr std::uint64_t split = 4;
inline constexpr std::uint64_t init = 5;
inline constexpr std::uint64_t source_batch = 6;
inline constexpr std::uint64_t unlabeled_batch = 7;
inline constexpr std::uint64_t labeled_batch = 8;
}  // namespace streams

}  // namespace ntlab
