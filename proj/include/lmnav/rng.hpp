#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <vector>

#include "lmnav/common.hpp"

namespace lmnav {

// Deterministic RNG used everywhere instead of <random>: the standard library
// distributions are not bit-stable across implementations, and every artifact
// in the pipeline has to replay byte-identically from a seed.
//
// Generator is splitmix64; gaussians come from a non-caching Box-Muller so the
// draw count per call site is fixed (one gaussian == two raw draws).
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed) {}

    uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ull;
        uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    /// Uniform in [0, 1), 53-bit resolution.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [lo, hi], inclusive.
    int uniform_int(int lo, int hi) {
        if (hi < lo) throw Error("uniform_int: empty range");
        uint64_t span = static_cast<uint64_t>(hi) - static_cast<uint64_t>(lo) + 1;
        // Rejection sampling to kill modulo bias.
        uint64_t limit = UINT64_MAX - UINT64_MAX % span;
        uint64_t r;
        do {
            r = next_u64();
        } while (r >= limit);
        return static_cast<int>(lo + static_cast<int64_t>(r % span));
    }

    double gaussian() {
        double u1 = uniform();
        double u2 = uniform();
        if (u1 < 1e-300) u1 = 1e-300;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
    }

    double gaussian(double mean, double stddev) { return mean + stddev * gaussian(); }

    /// In-place Fisher-Yates.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(next_u64() % i);
            std::swap(v[i - 1], v[j]);
        }
    }

    /// Choose `count` distinct indices out of [0, n) via a partial shuffle.
    std::vector<size_t> sample_indices(size_t n, size_t count) {
        std::vector<size_t> pool(n);
        for (size_t i = 0; i < n; ++i) pool[i] = i;
        if (count > n) count = n;
        for (size_t i = 0; i < count; ++i) {
            size_t j = i + static_cast<size_t>(next_u64() % (n - i));
            std::swap(pool[i], pool[j]);
        }
        pool.resize(count);
        return pool;
    }

private:
    uint64_t state_;
};

/// Derives an independent stream for a named sub-task. Streams derived with
/// different paths from the same root seed are decorrelated, and the mapping
/// is stable across runs (that is the whole point).
inline uint64_t derive_seed(uint64_t root, std::initializer_list<uint64_t> path) {
    uint64_t h = 0x9e3779b97f4a7c15ull ^ root;
    for (uint64_t tag : path) {
        h ^= tag + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
        Rng mix(h);
        h = mix.next_u64();
    }
    return h;
}

inline uint64_t derive_seed(uint64_t root, const std::string& name) {
    return derive_seed(root, {fnv1a64(name)});
}

}  // namespace lmnav
