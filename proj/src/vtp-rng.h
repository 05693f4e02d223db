#pragma once

// Counter-based seeded randomness. Every draw is addressed by
// (seed, stream name, index), so any value can be regenerated in isolation
// and results are independent of draw order.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

namespace vtp {

// splitmix64 finalizer
inline uint64_t mix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

inline uint64_t hash_str(std::string_view s) {
    // FNV-1a
    uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

struct rng_stream {
    uint64_t base = 0;

    uint64_t bits(uint64_t idx) const { return mix64(base ^ mix64(idx)); }

    // uniform in [0, 1)
    double uniform(uint64_t idx) const {
        return double(bits(idx) >> 11) * 0x1.0p-53;
    }

    // standard normal via Box-Muller; indices 2*idx and 2*idx+1 feed one draw
    double gaussian(uint64_t idx) const {
        double u1 = 1.0 - uniform(2 * idx);     // (0, 1]
        double u2 = uniform(2 * idx + 1);
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }
};

inline rng_stream make_stream(uint64_t seed, std::string_view name, uint64_t sub = 0) {
    return rng_stream{mix64(mix64(seed) ^ hash_str(name)) ^ mix64(sub ^ 0xa5a5a5a5a5a5a5a5ull)};
}

} // namespace vtp
