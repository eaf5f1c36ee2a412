#pragma once

#include <cstdint>

namespace cfield {

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

constexpr std::uint64_t hash_combine(std::uint64_t seed, std::uint64_t value) {
    return mix64(seed ^ mix64(value));
}

// Counter-based uniform draw in [0, 1): same (seed, a, b) gives the same
// value regardless of call order or thread.
constexpr double hashed_uniform(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
    const std::uint64_t h = hash_combine(hash_combine(seed, a), b);
    return static_cast<double>(h >> 11) * 0x1.0p-53;
}

}  // namespace cfield
