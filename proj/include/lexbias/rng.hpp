#pragma once

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace lexbias {

// std::uniform_int_distribution and friends are implementation-defined, so
// seeded outputs would differ between standard libraries. mt19937_64 itself
// is fully specified; everything below is built on its raw output.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    /// Uniform integer in [0, bound). bound must be > 0.
    std::uint64_t below(std::uint64_t bound) {
        // Rejection sampling over the largest multiple of bound.
        const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % bound);
        std::uint64_t x = engine_();
        while (x >= limit) x = engine_();
        return x % bound;
    }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    bool bernoulli(double p) { return uniform() < p; }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const std::size_t j = below(i);
            std::swap(v[i - 1], v[j]);
        }
    }

    /// Moves a uniform random k-subset of v into v[0..k), in random order.
    template <typename T>
    void partial_shuffle(std::vector<T>& v, std::size_t k) {
        const std::size_t n = v.size();
        for (std::size_t i = 0; i < k && i + 1 < n; ++i) {
            const std::size_t j = i + below(n - i);
            std::swap(v[i], v[j]);
        }
    }

private:
    std::mt19937_64 engine_;
};

} // namespace lexbias
