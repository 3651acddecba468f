#ifndef ADFRL_RNG_HPP
#define ADFRL_RNG_HPP

#include <cmath>
#include <cstdint>
#include <random>

namespace adfrl {

// Deterministic random source. mt19937_64 output is fully specified by the
// standard; the distribution transforms live here so that identical seeds
// give identical streams regardless of standard-library internals.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    // Uniform in [0, 1) with 53 random bits.
    double uniform01() {
        return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) {
        return lo + (hi - lo) * uniform01();
    }

    // Uniform integer in [0, n), unbiased via rejection.
    std::uint64_t uniform_int(std::uint64_t n) {
        if (n == 0) return 0;
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t v;
        do {
            v = gen_();
        } while (v >= limit);
        return v % n;
    }

    bool bernoulli(double p) { return uniform01() < p; }

    double exponential(double rate) {
        // -log(1-u) keeps the argument strictly positive.
        return -std::log(1.0 - uniform01()) / rate;
    }

    double normal(double mean, double stddev) {
        // Marsaglia polar method without spare caching.
        double u, v, s;
        do {
            u = uniform(-1.0, 1.0);
            v = uniform(-1.0, 1.0);
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        return mean + stddev * u * std::sqrt(-2.0 * std::log(s) / s);
    }

private:
    std::mt19937_64 gen_;
};

// SplitMix64 scramble for deriving independent sub-stream seeds.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
    std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

} // namespace adfrl

#endif
