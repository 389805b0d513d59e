// Copyright 2026 The promptac Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace promptac {

using Rng = std::mt19937_64;

// splitmix64 finalizer; used to derive independent sub-seeds from one run seed.
constexpr std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  return mix_seed(mix_seed(seed) ^ mix_seed(stream * 0x2545f4914f6cdd1dULL + 1));
}

// Stable (platform independent) FNV-1a hash, used by the mocks.
constexpr std::uint64_t stable_hash(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Named sub-streams of a run seed.
namespace streams {
inline constexpr std::uint64_t kActorInit = 1;
inline constexpr std::uint64_t kCriticInit = 2;
inline constexpr std::uint64_t kPolicyNoise = 3;
inline constexpr std::uint64_t kReplaySampling = 4;
inline constexpr std::uint64_t kProjection = 5;
inline constexpr std::uint64_t kValidationSubsample = 6;
inline constexpr std::uint64_t kExemplarSubset = 7;
inline constexpr std::uint64_t kEnvironmentNoise = 8;
inline constexpr std::uint64_t kWarmup = 9;
}  // namespace streams

}  // namespace promptac
