#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace jblcsm {

/// SplitMix64; used both as a seed expander and to derive per-task streams.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next()
    {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

private:
    std::uint64_t state_;
};

/// Seed of the stream keyed by (master, a, b). Streams for distinct keys are
/// independent of the order in which tasks run.
inline std::uint64_t stream_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0)
{
    SplitMix64 m(master);
    std::uint64_t s = m.next();
    s = SplitMix64(s ^ (a * 0xd1342543de82ef95ULL + 1)).next();
    s = SplitMix64(s ^ (b * 0xaf251af3b0f025b5ULL + 7)).next();
    return s;
}

/// xoshiro256** with portable uniform and normal draws, so generated data is
/// bit-identical across standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed)
    {
        SplitMix64 sm(seed);
        for (auto& w : s_)
            w = sm.next();
    }

    std::uint64_t next()
    {
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

    /// Uniform on [0, 1).
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Standard normal via Box-Muller (one draw per call).
    double normal()
    {
        double u1;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
    std::uint64_t s_[4];
};

} // namespace jblcsm
