#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace pibench {

/**
 * Seed derivation and a portable random stream.
 *
 * The engine is std::mt19937_64, whose output sequence is fixed by the C++
 * standard. Uniform reals and bounded integers are computed here from the raw
 * 64-bit outputs (std distributions differ between standard libraries), so a
 * seed reproduces the same draws in any conforming implementation.
 *
 * Substreams: derive_seed(master, {t1, t2, ...}) folds each tag into the seed
 * with the SplitMix64 finalizer:
 *
 *     h = mix64(master)
 *     h = mix64(h + 0x9E3779B97F4A7C15 * (t + 1))   for each tag t
 *
 * Distinct tag paths give statistically independent engine seeds.
 */
inline std::uint64_t mix64(std::uint64_t x) {
    x ^= x >> 30;
    x *= 0xBF58476D1CE4E5B9ULL;
    x ^= x >> 27;
    x *= 0x94D049BB133111EBULL;
    x ^= x >> 31;
    return x;
}

inline std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> path) {
    std::uint64_t h = mix64(master);
    for (std::uint64_t tag : path) h = mix64(h + 0x9E3779B97F4A7C15ULL * (tag + 1));
    return h;
}

class RandomStream {
  public:
    explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

    static RandomStream derive(std::uint64_t master, std::initializer_list<std::uint64_t> path) {
        return RandomStream(derive_seed(master, path));
    }

    std::uint64_t next() { return engine_(); }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Uniform on [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    /// Unbiased integer in [0, n) by rejection of the short final bucket.
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t threshold = (0 - n) % n;
        for (;;) {
            const std::uint64_t x = engine_();
            if (x >= threshold) return x % n;
        }
    }

  private:
    std::mt19937_64 engine_;
};

} // namespace pibench
