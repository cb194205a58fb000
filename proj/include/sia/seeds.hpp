#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace sia {

// FNV-1a over arbitrary bytes. Also used for artifact fingerprints.
inline std::uint64_t fnv1a64(const void* data, std::size_t len,
                             std::uint64_t h = 0xcbf29ce484222325ull) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::uint64_t fnv1a64(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ull) {
    return fnv1a64(s.data(), s.size(), h);
}

// Every stage derives its own seed from the one global seed:
//   sub_seed = fnv1a64(stage_name) folded with the global seed.
// Stage names are stable strings like "pairs", "train", "fold:2".
inline std::uint64_t derive_seed(std::uint64_t global_seed, std::string_view stage_name) {
    std::uint64_t h = fnv1a64(stage_name);
    h ^= global_seed + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    // splitmix64 finalizer so nearby global seeds do not give nearby streams
    h += 0x9e3779b97f4a7c15ull;
    h = (h ^ (h >> 30)) * 0xbf58476d1ce4e5b9ull;
    h = (h ^ (h >> 27)) * 0x94d049bb133111ebull;
    return h ^ (h >> 31);
}

inline std::mt19937_64 make_rng(std::uint64_t global_seed, std::string_view stage_name) {
    return std::mt19937_64(derive_seed(global_seed, stage_name));
}

}  // namespace sia
