#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace bc {

// Deterministic random source. All draws are implemented on top of the raw
// mt19937_64 output so that identical seeds give identical streams on every
// platform (std::uniform_*_distribution is implementation-defined).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t raw() { return engine_(); }

    // Uniform in [0, 1).
    double uniform01() {
        return std::ldexp(static_cast<double>(engine_() >> 11), -53);
    }

    double uniform(double lo, double hi) {
        return lo + (hi - lo) * uniform01();
    }

    // Uniform integer in [0, n). n must be > 0.
    std::uint64_t uniform_int(std::uint64_t n) {
        // rejection sampling keeps the draw unbiased
        std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
        std::uint64_t x = engine_();
        while (x >= limit) x = engine_();
        return x % n;
    }

    bool bernoulli(double p) { return uniform01() < p; }

    // Box-Muller; one value per call, the pair partner is discarded.
    double normal(double mean = 0.0, double stddev = 1.0) {
        double u1 = uniform01();
        double u2 = uniform01();
        while (u1 <= 0.0) u1 = uniform01();
        double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
        return mean + stddev * z;
    }

    // Fisher-Yates with our own bounded draw.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(uniform_int(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    // Derive an independent child stream (fold/config sub-jobs).
    Rng split(std::uint64_t salt) {
        return Rng(engine_() ^ (salt * 0x9E3779B97F4A7C15ull));
    }

private:
    std::mt19937_64 engine_;
};

} // namespace bc
