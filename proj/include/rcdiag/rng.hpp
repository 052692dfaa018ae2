#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "rcdiag/errors.hpp"

namespace rcdiag {

// Deterministic 64-bit generator used everywhere randomness is needed, so
// corrupted datasets and training runs are reproducible across platforms.
//
// State update is the SplitMix64 sequence: the state advances by the
// increment 0x9E3779B97F4A7C15 and the output is the advanced state mixed by
//   z ^= z >> 30;  z *= 0xBF58476D1CE4E5B9;
//   z ^= z >> 27;  z *= 0x94D049BB133111EB;
//   z ^= z >> 31;
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, n). Rejection sampling keeps the draw unbiased.
    std::uint64_t next_below(std::uint64_t n) {
        if (n == 0) throw Error("Rng::next_below: n must be positive");
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t v = next_u64();
        while (v >= limit) v = next_u64();
        return v % n;
    }

    // Uniform in [0, 1).
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Standard normal via Box-Muller; one value per call, second discarded
    // so the draw count stays predictable.
    double next_gaussian() {
        double u1 = next_double();
        double u2 = next_double();
        while (u1 <= 0.0) u1 = next_double();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    // Child generator for item `index`, independent of draws on the parent.
    // Used to give each example its own substream under one dataset seed.
    Rng fork(std::uint64_t index) const {
        Rng mixer(state_ ^ (0xA0761D6478BD642FULL * (index + 1)));
        return Rng(mixer.next_u64());
    }

    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(next_below(i));
            std::swap(items[i - 1], items[j]);
        }
    }

    // Permutation of [0, n) with no fixed point, by resampling shuffles.
    // Expected number of attempts is e, independent of n.
    std::vector<std::size_t> derangement(std::size_t n) {
        if (n < 2) throw Error("Rng::derangement: need at least 2 elements");
        std::vector<std::size_t> perm(n);
        for (;;) {
            for (std::size_t i = 0; i < n; ++i) perm[i] = i;
            shuffle(perm);
            bool fixed = false;
            for (std::size_t i = 0; i < n; ++i) {
                if (perm[i] == i) {
                    fixed = true;
                    break;
                }
            }
            if (!fixed) return perm;
        }
    }

private:
    std::uint64_t state_;
};

}  // namespace rcdiag
