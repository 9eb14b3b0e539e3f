#pragma once

// SplitMix64: a small splittable generator with platform-independent output.
// Replicates draw from substreams keyed by (seed, index), so parallel or
// reordered evaluation cannot change the simulated data.

#include <cstdint>
#include <vector>

namespace zmx {

struct SplitMix64 {
    std::uint64_t state = 0;

    explicit SplitMix64(std::uint64_t seed) : state(seed) {}

    static std::uint64_t mix(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    std::uint64_t next() {
        state += 0x9E3779B97F4A7C15ULL;
        return mix(state);
    }

    /// Uniform double in [0, 1) with 53 random bits.
    double next_double() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    /// Independent generator for the given substream of a seed.
    static SplitMix64 substream(std::uint64_t seed, std::uint64_t index) {
        return SplitMix64(mix(seed) ^ mix(0x9E3779B97F4A7C15ULL * (index + 1)));
    }
};

inline std::int64_t sample_binomial(SplitMix64& g, std::int64_t trials, double p) {
    std::int64_t y = 0;
    for (std::int64_t t = 0; t < trials; ++t)
        if (g.next_double() < p) ++y;
    return y;
}

inline std::vector<std::int64_t> sample_multinomial(SplitMix64& g, std::int64_t total,
                                                    const std::vector<double>& probs) {
    std::vector<std::int64_t> counts(probs.size(), 0);
    for (std::int64_t t = 0; t < total; ++t) {
        const double u = g.next_double();
        double acc = 0.0;
        std::size_t c = probs.size() - 1;  // guards against round-off at u ~ 1
        for (std::size_t k = 0; k < probs.size(); ++k) {
            acc += probs[k];
            if (u < acc) {
                c = k;
                break;
            }
        }
        ++counts[c];
    }
    return counts;
}

}  // namespace zmx
