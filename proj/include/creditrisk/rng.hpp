#pragma once

// Portable seeded randomness.
//
// Every random draw in the library comes from SplitMix64 (Steele, Lea &
// Flood 2014): a 64-bit counter advanced by the golden-ratio increment and
// passed through a fixed avalanche mix. Independent streams are derived by
// hashing (seed, purpose, index) through the same mix, so tree t of a forest
// or round r of a booster always sees the same numbers regardless of thread
// count or build order.
//
// The standard <random> distributions are implementation-defined, so the
// uniform, bounded-integer and normal transforms are implemented here.

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <utility>

namespace creditrisk {

constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Stream purposes. Mixing the purpose into the derivation keeps e.g. the
/// split permutation independent of tree 0's bootstrap for the same seed.
enum class StreamPurpose : std::uint64_t {
    split = 1,
    forest_tree = 2,
    boost_round = 3,
    synthetic_record = 4,
    test = 99,
};

class SplitMix64 {
public:
    using result_type = std::uint64_t;

    constexpr explicit SplitMix64(std::uint64_t state = 0) noexcept : state_(state) {}

    /// Stream number `index` of family `purpose` under `seed`.
    static constexpr SplitMix64 derive(std::uint64_t seed, StreamPurpose purpose,
                                       std::uint64_t index = 0) noexcept {
        std::uint64_t s = mix64(seed ^ 0x6a09e667f3bcc909ULL);
        s = mix64(s + static_cast<std::uint64_t>(purpose) * 0x9e3779b97f4a7c15ULL);
        s = mix64(s ^ (index * 0xd1b54a32d192ed03ULL + 0x8cb92ba72f3d8dd7ULL));
        return SplitMix64(s);
    }

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept {
        return std::numeric_limits<result_type>::max();
    }

    constexpr result_type operator()() noexcept {
        state_ += 0x9e3779b97f4a7c15ULL;
        return mix64(state_);
    }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, bound), unbiased (Lemire's multiply-and-reject).
    std::uint64_t below(std::uint64_t bound) noexcept {
        if (bound <= 1) return 0;
        unsigned __int128 m = static_cast<unsigned __int128>((*this)()) * bound;
        auto low = static_cast<std::uint64_t>(m);
        if (low < bound) {
            const std::uint64_t threshold = (0 - bound) % bound;
            while (low < threshold) {
                m = static_cast<unsigned __int128>((*this)()) * bound;
                low = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

    bool bernoulli(double p) noexcept { return uniform() < p; }

    /// Standard normal via Box-Muller; the second variate is discarded so
    /// each call consumes exactly two draws.
    double normal() noexcept {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    /// Poisson by inversion; fine for the small means the generator uses.
    std::uint64_t poisson(double mean) noexcept {
        const double limit = std::exp(-mean);
        std::uint64_t k = 0;
        double p = uniform();
        while (p > limit) {
            ++k;
            p *= uniform();
        }
        return k;
    }

    /// Moves a uniform random choice of `k` elements to the front of
    /// `items` (partial Fisher-Yates).
    template <class T>
    void partial_shuffle(std::span<T> items, std::size_t k) noexcept {
        const std::size_t n = items.size();
        if (k > n) k = n;
        for (std::size_t i = 0; i < k; ++i) {
            const std::size_t j = i + below(n - i);
            using std::swap;
            swap(items[i], items[j]);
        }
    }

    template <class T>
    void shuffle(std::span<T> items) noexcept {
        partial_shuffle(items, items.size());
    }

private:
    std::uint64_t state_;
};

}  // namespace creditrisk
