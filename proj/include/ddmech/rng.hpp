#pragma once

#include <cstdint>

namespace ddm {

// SplitMix64 (Steele, Lea, Flood 2014). Chosen over std::mt19937_64 because
// the double stream must be bit-identical across platforms and standard
// library implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform double in [0, 1) from the top 53 bits.
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    // Uniform integer in [0, n).
    std::uint64_t next_below(std::uint64_t n) {
        // Lemire-style rejection to avoid modulo bias.
        std::uint64_t threshold = (0ULL - n) % n;
        for (;;) {
            std::uint64_t r = next_u64();
            if (r >= threshold) return r % n;
        }
    }

    // Deterministic substream derivation: stream id is mixed into the seed
    // through one SplitMix64 round so substreams are decorrelated.
    static Rng substream(std::uint64_t seed, std::uint64_t stream_id) {
        Rng mixer(seed ^ (0x5851f42d4c957f2dULL * (stream_id + 1)));
        return Rng(mixer.next_u64());
    }

private:
    std::uint64_t state_;
};

} // namespace ddm
