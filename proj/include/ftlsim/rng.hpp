#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace ftlsim {

/// Seeded random source with fully pinned draw algorithms.
///
/// The engine is std::mt19937_64 (bit-exact by the standard); every
/// distribution on top of it is spelled out here instead of using the
/// implementation-defined std:: distributions, so a stream produced from a
/// given seed is reproducible across toolchains and can be re-derived by an
/// external reference implementation.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    /// Uniform in [0, 1), 53-bit resolution.
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + uniform() * (hi - lo); }

    /// Standard normal via Box-Muller; consumes exactly two draws, the sine
    /// twin is discarded. u1 lies in (0, 1] so the log is always finite.
    double normal() {
        const double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    /// Gamma(shape, 1) via Marsaglia-Tsang squeeze; shapes below one are
    /// boosted through Gamma(shape+1) * U^(1/shape).
    double gamma(double shape) {
        if (shape < 1.0) {
            const double g = gamma(shape + 1.0);
            const double u = uniform();
            return g * std::pow(u, 1.0 / shape);
        }
        const double d = shape - 1.0 / 3.0;
        const double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x, v;
            do {
                x = normal();
                v = 1.0 + c * x;
            } while (v <= 0.0);
            v = v * v * v;
            const double u = uniform();
            if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
            if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
        }
    }

    /// Symmetric Dirichlet of dimension k: k gamma draws, normalized
    /// left-to-right. Underflow of every draw degenerates to the uniform
    /// simplex point.
    std::vector<double> dirichlet(double alpha, std::size_t k) {
        std::vector<double> draws(k);
        for (std::size_t i = 0; i < k; ++i) draws[i] = gamma(alpha);
        double sum = 0.0;
        for (std::size_t i = 0; i < k; ++i) sum += draws[i];
        if (!(sum > 0.0)) {
            for (std::size_t i = 0; i < k; ++i) draws[i] = 1.0 / static_cast<double>(k);
            return draws;
        }
        for (std::size_t i = 0; i < k; ++i) draws[i] /= sum;
        return draws;
    }

    /// Unbiased integer in [0, n) by rejection.
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x;
        do {
            x = next_u64();
        } while (x >= limit);
        return x % n;
    }

    /// Fisher-Yates, descending index order.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    static constexpr double kPi = 3.141592653589793238462643383279502884;
    std::mt19937_64 gen_;
};

/// splitmix64 finalizer; used to derive independent seeds from a base seed.
inline std::uint64_t mix_seed(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
    return mix_seed(base + mix_seed(stream));
}

}  // namespace ftlsim
