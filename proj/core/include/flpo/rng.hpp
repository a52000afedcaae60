#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace flpo {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Seed for an independent substream identified by a tuple of indices, e.g.
// (master seed, agent, beta step, inner iteration).
inline std::uint64_t substream_seed(std::initializer_list<std::uint64_t> keys) noexcept {
    std::uint64_t h = 0x6a09e667f3bcc908ULL;
    for (std::uint64_t k : keys) h = splitmix64(h ^ splitmix64(k));
    return h;
}

inline Rng make_rng(std::initializer_list<std::uint64_t> keys) { return Rng(substream_seed(keys)); }

}  // namespace flpo
