#pragma once

#include <cstdint>
#include <random>

namespace hfu {

/// splitmix64 step; used to spread user seeds into stream seeds.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t x = (state += 0x9E3779B97F4A7C15ULL);
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Deterministic per-stream seed derivation, independent of thread
/// scheduling: stream i always receives the same seed for a given master.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
    std::uint64_t state = master ^ (0xD1B54A32D192ED03ULL * (stream + 1));
    splitmix64(state);
    return splitmix64(state);
}

inline std::mt19937_64 make_rng(std::uint64_t master, std::uint64_t stream) {
    return std::mt19937_64(derive_seed(master, stream));
}

}  // namespace hfu
