#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>
#include <vector>

#include "grbert/error.hpp"

namespace grbert {

// Deterministic random source. Distribution sampling is hand-rolled on top
// of a xorshift128+ core so results are identical across standard library
// implementations; std::*_distribution is never used.
class Rng {
public:
    explicit Rng(std::uint64_t seed) {
        std::uint64_t x = seed;
        s0_ = splitmix(x);
        s1_ = splitmix(x);
        if (s0_ == 0 && s1_ == 0) s1_ = 1;
    }

    // Derives an independent stream seed from a master seed and a stream
    // name, so e.g. corruption and negative sampling never share a stream.
    static std::uint64_t derive(std::uint64_t seed, std::string_view stream) {
        std::uint64_t h = 1469598103934665603ULL;  // FNV-1a offset basis
        for (char c : stream) {
            h ^= static_cast<std::uint8_t>(c);
            h *= 1099511628211ULL;
        }
        std::uint64_t x = seed ^ h;
        return splitmix(x);
    }

    std::uint64_t next_u64() {
        std::uint64_t x = s0_;
        const std::uint64_t y = s1_;
        s0_ = y;
        x ^= x << 23;
        s1_ = x ^ y ^ (x >> 17) ^ (y >> 26);
        return s1_ + y;
    }

    // Uniform in [0, 1) with 53-bit resolution.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Unbiased integer in [0, n) by rejection.
    std::size_t uniform_index(std::size_t n) {
        if (n == 0) throw ContractError("uniform_index: n must be positive");
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t v = next_u64();
        while (v >= limit) v = next_u64();
        return static_cast<std::size_t>(v % n);
    }

    double normal(double mean = 0.0, double stddev = 1.0) {
        // Box-Muller, no cached spare so the consumption pattern is obvious.
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        return mean + stddev * r * std::cos(2.0 * std::numbers::pi * u2);
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        if (v.size() < 2) return;
        for (std::size_t i = v.size() - 1; i > 0; --i) {
            std::size_t j = uniform_index(i + 1);
            std::swap(v[i], v[j]);
        }
    }

    // Samples an index from unnormalized non-negative weights.
    std::size_t weighted_index(const std::vector<double>& weights) {
        double total = 0.0;
        for (double w : weights) total += w;
        if (!(total > 0.0)) throw ContractError("weighted_index: weights sum to zero");
        double r = uniform() * total;
        for (std::size_t i = 0; i < weights.size(); ++i) {
            r -= weights[i];
            if (r < 0.0) return i;
        }
        return weights.size() - 1;
    }

private:
    static std::uint64_t splitmix(std::uint64_t& x) {
        x += 0x9E3779B97F4A7C15ULL;
        std::uint64_t z = x;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    std::uint64_t s0_ = 0;
    std::uint64_t s1_ = 0;
};

}  // namespace grbert
