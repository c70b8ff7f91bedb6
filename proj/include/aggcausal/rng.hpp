#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace aggcausal {

using Rng = std::mt19937_64;

// SplitMix64 finalizer; bijective on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Counter-based seed derivation: the child seed depends only on the parent seed
// and the index path.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a) noexcept {
    return mix64(mix64(seed) ^ mix64(a + 0x632be59bd9b4e019ULL));
}

template <class... Rest>
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, Rest... rest) noexcept {
    return derive_seed(derive_seed(seed, a), static_cast<std::uint64_t>(rest)...);
}

// FNV-1a, used to key streams by variable name.
constexpr std::uint64_t name_key(std::string_view s) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

template <class... Path>
Rng make_stream(std::uint64_t seed, Path... path) {
    return Rng(derive_seed(seed, static_cast<std::uint64_t>(path)...));
}

}  // namespace aggcausal
