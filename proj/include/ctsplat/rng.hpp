// rng.hpp: seeded random source with explicit value mappings.
//
// std::mt19937_64 supplies the bit stream, but the uniform/normal mappings
// are written out here instead of using std::*_distribution so that the
// produced sequences are identical across standard library versions.
#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace ctsplat {

class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t bits() { return gen_(); }

    // Uniform in [0, 1) with 53-bit resolution.
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Integer in [0, n), n > 0.
    std::uint64_t index(std::uint64_t n) { return gen_() % n; }

    // Standard normal via Box-Muller; one value per call, no caching so the
    // stream position stays easy to reason about.
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    // Fisher-Yates shuffle, deterministic for a given seed and length.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[index(i)]);
        }
    }

private:
    std::mt19937_64 gen_;
};

}  // namespace ctsplat
