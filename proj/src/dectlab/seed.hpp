#pragma once

#include <cstdint>

namespace dectlab {

/// splitmix64 finalizer.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Per-stage seed: the stage index is mixed into the master seed through two
/// splitmix64 rounds, so neighbouring stages get decorrelated streams.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stage) noexcept {
  return splitmix64(master ^ splitmix64(stage));
}

}  // namespace dectlab
