#pragma once

#include <cmath>
#include <cstdint>

// Counter-based random streams. Every draw is a pure function of
// (seed, key, counter), so the sample sequence of one stream never depends
// on how draws are interleaved with other streams.

namespace knnmode::detail {

inline constexpr double kTwoPi = 6.283185307179586476925286766559;

inline uint64_t mix64(uint64_t x) {
    x ^= x >> 33;
    x *= 0xff51afd7ed558ccdULL;
    x ^= x >> 33;
    x *= 0xc4ceb9fe1a85ec53ULL;
    x ^= x >> 33;
    return x;
}

inline uint64_t hash3(uint64_t seed, uint64_t a, uint64_t b) {
    uint64_t h = seed;
    h = mix64(h ^ (a + 0x9e3779b97f4a7c15ULL));
    h = mix64(h ^ (b + 0xbf58476d1ce4e5b9ULL));
    return h;
}

inline uint64_t hash4(uint64_t seed, uint64_t a, uint64_t b, uint64_t c) {
    uint64_t h = seed;
    h = mix64(h ^ (a + 0x9e3779b97f4a7c15ULL));
    h = mix64(h ^ (b + 0xbf58476d1ce4e5b9ULL));
    h = mix64(h ^ (c + 0x94d049bb133111ebULL));
    return h;
}

// [0, 1), 53-bit resolution.
inline double u01(uint64_t h) { return static_cast<double>(h >> 11) * 0x1.0p-53; }

// Uniform integer in [0, bound) without modulo bias (Lemire reduction).
inline uint64_t bounded(uint64_t h, uint64_t bound) {
    return static_cast<uint64_t>((static_cast<unsigned __int128>(h) * bound) >> 64);
}

// Standard normal via Box-Muller on the two 32-bit halves of one hash.
inline double gaussian(uint64_t h) {
    const double u1 = (static_cast<double>(h >> 32) + 0.5) * 0x1.0p-32;
    const double u2 = (static_cast<double>(h & 0xffffffffULL) + 0.5) * 0x1.0p-32;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
}

// Small sequential generator for non-oracle randomness (shuffles, layouts).
class SplitMix64 {
public:
    explicit SplitMix64(uint64_t seed) : state_(seed) {}

    uint64_t next() {
        state_ += 0x9e3779b97f4a7c15ULL;
        return mix64(state_);
    }

    double next_u01() { return u01(next()); }

    // Uniform in [0, bound).
    uint64_t next_bounded(uint64_t bound) { return bounded(next(), bound); }

private:
    uint64_t state_;
};

}  // namespace knnmode::detail
