#pragma once

#include <cstdint>
#include <cstdio>
#include <string>
#include <string_view>

namespace expertaf {

// 64-bit FNV-1a. Stable across platforms and standard libraries, unlike
// std::hash, so it is safe to persist.
constexpr std::uint64_t fnv1a64(std::string_view bytes,
                                std::uint64_t seed = 0xcbf29ce484222325ULL) noexcept {
    std::uint64_t h = seed;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

/// Maps (seed, key) to a uniform double in [0, 1).
inline double unit_hash(std::uint64_t seed, std::string_view key) noexcept {
    const std::uint64_t h = splitmix64(fnv1a64(key) ^ splitmix64(seed));
    return static_cast<double>(h >> 11) * 0x1.0p-53;
}

} // namespace expertaf
