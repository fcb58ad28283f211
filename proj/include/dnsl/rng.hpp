#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace dnsl {

/// Philox4x32-10 counter-based generator (Salmon et al., SC 2011).
/// Stateless: every 128-bit counter/64-bit key pair maps to four 32-bit
/// words, so ensemble streams never share state and replay is exact.
struct Philox4x32 {
    static constexpr uint32_t kMultA = 0xD2511F53u;
    static constexpr uint32_t kMultB = 0xCD9E8D57u;
    static constexpr uint32_t kWeylA = 0x9E3779B9u;
    static constexpr uint32_t kWeylB = 0xBB67AE85u;

    static std::array<uint32_t, 4> generate(std::array<uint32_t, 4> ctr, std::array<uint32_t, 2> key) {
        for (int round = 0; round < 10; ++round) {
            const uint64_t p0 = uint64_t(kMultA) * ctr[0];
            const uint64_t p1 = uint64_t(kMultB) * ctr[2];
            const uint32_t hi0 = uint32_t(p0 >> 32), lo0 = uint32_t(p0);
            const uint32_t hi1 = uint32_t(p1 >> 32), lo1 = uint32_t(p1);
            ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
            key[0] += kWeylA;
            key[1] += kWeylB;
        }
        return ctr;
    }
};

/// SplitMix64 finalizer, used to spread (seed, stream) pairs over the key space.
inline uint64_t splitmix64(uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

/// Splittable stream of standard normals addressed by (seed, stream, step,
/// component). Identical coordinates always give identical values no matter
/// the thread schedule.
class CounterRng {
public:
    CounterRng(uint64_t seed, uint64_t stream)
        : seed_(seed), stream_(stream), key_(splitmix64(seed ^ splitmix64(stream))) {}

    uint64_t seed() const { return seed_; }
    uint64_t stream() const { return stream_; }

    /// Uniform in [0,1) from a 53-bit mantissa.
    double uniform(uint64_t step, uint64_t component) const {
        const auto r = words(step, component);
        const uint64_t bits = (uint64_t(r[0]) << 32) | r[1];
        return double(bits >> 11) * 0x1.0p-53;
    }

    /// Standard normal via Box-Muller on two independent 53-bit uniforms.
    double normal(uint64_t step, uint64_t component) const {
        const auto r = words(step, component);
        const uint64_t b1 = (uint64_t(r[0]) << 32) | r[1];
        const uint64_t b2 = (uint64_t(r[2]) << 32) | r[3];
        const double u1 = (double(b1 >> 11) + 1.0) * 0x1.0p-53; // (0,1]
        const double u2 = double(b2 >> 11) * 0x1.0p-53;         // [0,1)
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

private:
    std::array<uint32_t, 4> words(uint64_t step, uint64_t component) const {
        const std::array<uint32_t, 4> ctr = {uint32_t(step), uint32_t(step >> 32),
                                             uint32_t(component), uint32_t(component >> 32)};
        const std::array<uint32_t, 2> key = {uint32_t(key_), uint32_t(key_ >> 32)};
        return Philox4x32::generate(ctr, key);
    }

    uint64_t seed_;
    uint64_t stream_;
    uint64_t key_;
};

} // namespace dnsl
