#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace plaid {

using Rng = std::mt19937_64;

/// splitmix64 finalizer; used to decorrelate derived seeds.
constexpr std::uint64_t mix_seed(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Derive a child seed from a parent seed, a stage name and an index.
/// All randomness in the library flows through this function; there is no
/// global generator.
constexpr std::uint64_t derive_seed(std::uint64_t parent, std::string_view name,
                                    std::uint64_t index = 0) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (char c : name) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return mix_seed(mix_seed(parent ^ h) + index);
}

inline Rng make_rng(std::uint64_t seed) { return Rng{mix_seed(seed)}; }

inline double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>{lo, hi}(rng);
}

inline double standard_normal(Rng& rng) {
  return std::normal_distribution<double>{0.0, 1.0}(rng);
}

}  // namespace plaid
