#ifndef RRDPS_RNG_HPP_
#define RRDPS_RNG_HPP_

#include <cstdint>

namespace rrdps {

// splitmix64 (Vigna); used to expand seeds and derive stream keys.
struct SplitMix64 {
    std::uint64_t state;
    explicit SplitMix64(std::uint64_t seed) : state(seed) {}
    std::uint64_t next() {
        std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }
};

/// xoshiro256** seeded through splitmix64. Splittable: stream(seed, k)
/// yields independent generators for parallel trials, reproducible across
/// platforms since only integer arithmetic and the standard 53-bit double
/// construction are used.
class Xoshiro256StarStar {
public:
    explicit Xoshiro256StarStar(std::uint64_t seed) {
        SplitMix64 sm(seed);
        for (auto& w : s_) w = sm.next();
    }

    static Xoshiro256StarStar stream(std::uint64_t seed, std::uint64_t index) {
        SplitMix64 sm(seed ^ (0xA0761D6478BD642FULL * (index + 1)));
        return Xoshiro256StarStar(sm.next());
    }

    static const char* algorithm() { return "xoshiro256** / splitmix64 streams"; }

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

    double uniform01() { return (next() >> 11) * 0x1.0p-53; }

    bool bernoulli(double p) { return uniform01() < p; }

    // Uniform integer in [0, n) by rejection on the masked word.
    int uniform_int(int n) {
        const std::uint64_t bound = static_cast<std::uint64_t>(n);
        std::uint64_t mask = bound - 1;
        mask |= mask >> 1;
        mask |= mask >> 2;
        mask |= mask >> 4;
        mask |= mask >> 8;
        mask |= mask >> 16;
        mask |= mask >> 32;
        for (;;) {
            const std::uint64_t r = next() & mask;
            if (r < bound) return static_cast<int>(r);
        }
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }
    std::uint64_t s_[4];
};

}  // namespace rrdps

#endif  // RRDPS_RNG_HPP_
