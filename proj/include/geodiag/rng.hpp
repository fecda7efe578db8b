#pragma once

// Counter-based random streams.
//
// Every consumer of randomness derives an independent stream from
// (seed, index...) so that work items can be evaluated in any order, on any
// number of threads, and still produce identical numbers.

#include <cstdint>
#include <initializer_list>
#include <limits>

namespace geodiag {

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// hash(seed, i0, i1, ...) used to key streams.
constexpr std::uint64_t stream_key(std::uint64_t seed, std::initializer_list<std::uint64_t> indices) noexcept {
    std::uint64_t h = splitmix64(seed ^ 0x6a09e667f3bcc908ULL);
    for (auto i : indices) h = splitmix64(h ^ splitmix64(i + 0x3c6ef372fe94f82bULL));
    return h;
}

// SplitMix64 in counter mode: output k is mix(key + k*gamma). Satisfies
// UniformRandomBitGenerator, so it plugs into <random> distributions.
class CounterRng {
public:
    using result_type = std::uint64_t;

    explicit CounterRng(std::uint64_t key) noexcept : key_(key) {}
    CounterRng(std::uint64_t seed, std::initializer_list<std::uint64_t> indices) noexcept
        : key_(stream_key(seed, indices)) {}

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept { return splitmix64(key_ + 0x9e3779b97f4a7c15ULL * counter_++); }

    std::uint64_t counter() const noexcept { return counter_; }

    // Uniform integer in [0, n) by rejection (no modulo bias).
    std::uint64_t below(std::uint64_t n) noexcept {
        if (n <= 1) return 0;
        const std::uint64_t limit = max() - max() % n;
        std::uint64_t r;
        do { r = (*this)(); } while (r >= limit);
        return r % n;
    }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

} // namespace geodiag
