#pragma once

#include <cstdint>
#include <initializer_list>

namespace date {

/// Derives an independent stream seed from a base seed and a path of indices
/// (splitmix64 finalizer applied per step).
inline std::uint64_t mix_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
    auto mix = [](std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ull;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    };
    std::uint64_t h = mix(seed);
    for (auto p : path) h = mix(h ^ mix(p));
    return h;
}

}  // namespace date
