#pragma once

#include <cstdint>

namespace obfuslab {

// SplitMix64 finalizer over (base, stream): independent, reproducible
// sub-seeds from one user seed.
constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  std::uint64_t z = base + 0x9e3779b97f4a7c15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

namespace seed_stream {
inline constexpr std::uint64_t kEnvironment = 1;
inline constexpr std::uint64_t kPolicyInit = 2;
inline constexpr std::uint64_t kSampling = 3;
inline constexpr std::uint64_t kMinibatch = 4;
inline constexpr std::uint64_t kEvaluation = 5;
}  // namespace seed_stream

}  // namespace obfuslab
