#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace cliff {

using Rng = std::mt19937_64;

/// splitmix64 finalizer; used to derive independent stream seeds.
constexpr std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Derives a child seed from a parent seed and a sequence of stream indices.
/// Unlike a plain xor, (base, 1, 0) and (base, 0, 1) give different streams.
constexpr std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> keys) {
    std::uint64_t s = mix64(base);
    for (auto k : keys) s = mix64(s ^ mix64(k + 0x632be59bd9b4e019ULL));
    return s;
}

inline Rng make_rng(std::uint64_t seed) { return Rng(seed); }

}  // namespace cliff
