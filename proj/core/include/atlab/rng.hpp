#pragma once

#include <cstdint>
#include <random>

namespace atlab {

// splitmix64 finalizer, used to derive well-separated seed streams from a
// base seed plus stream tags (epoch index, batch index, restart index, ...).
inline std::uint64_t mix_seed(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag) {
    return mix_seed(base ^ mix_seed(tag));
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag1, std::uint64_t tag2) {
    return derive_seed(derive_seed(base, tag1), tag2);
}

inline std::mt19937 make_rng(std::uint64_t seed) {
    return std::mt19937(static_cast<std::mt19937::result_type>(mix_seed(seed)));
}

}  // namespace atlab
