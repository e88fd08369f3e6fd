#pragma once

// Reproducible random numbers. Every algorithm here is fixed so that split
// plans and synthetic corpora can be regenerated bit-for-bit elsewhere:
//
//   SplitMix64      state += 0x9E3779B97F4A7C15;
//                   z = state;
//                   z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9;
//                   z = (z ^ (z >> 27)) * 0x94D049BB133111EB;
//                   return z ^ (z >> 31);
//   Xoshiro256**    seeded with four consecutive SplitMix64(seed) outputs;
//                   out = rotl(s1 * 5, 7) * 9; t = s1 << 17;
//                   s2 ^= s0; s3 ^= s1; s1 ^= s2; s0 ^= s3; s2 ^= t;
//                   s3 = rotl(s3, 45)
//   uniform()       (next() >> 11) * 2^-53, in [0, 1)
//   below(n)        rejection: draw x until x >= (2^64 - n) mod n; x mod n
//   normal()        Box-Muller, cosine branch only:
//                   sqrt(-2 ln(1 - uniform())) * cos(2 pi uniform())
//   shuffle(v)      Fisher-Yates, for i = n-1 down to 1: swap(v[i], v[below(i+1)])
//   derive_seed     SplitMix64(seed ^ (0x9E3779B97F4A7C15 * (stream + 1))).next()

#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <utility>

namespace vulnscore {

class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}
    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

private:
    std::uint64_t state_;
};

class Rng {
public:
    explicit Rng(std::uint64_t seed) {
        SplitMix64 sm(seed);
        for (auto& s : s_)
            s = sm.next();
    }

    std::uint64_t next() {
        const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    /// Unbiased integer in [0, n); n must be positive.
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t threshold = (0 - n) % n;
        for (;;) {
            const std::uint64_t x = next();
            if (x >= threshold)
                return x % n;
        }
    }

    double normal() {
        const double u1 = 1.0 - uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    template <typename T>
    void shuffle(std::span<T> v) {
        for (std::size_t i = v.size(); i > 1; --i)
            std::swap(v[i - 1], v[below(i)]);
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
    std::uint64_t s_[4];
};

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    return SplitMix64(seed ^ (0x9E3779B97F4A7C15ULL * (stream + 1))).next();
}

} // namespace vulnscore
