// Deterministic random streams. Distributions are implemented here on top of
// the raw engine so that a seed reproduces the same draws on every standard
// library.
#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace hybridmac {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

class Rng {
public:
    explicit Rng(std::uint64_t seed = 1) : engine_(splitmix64(seed)) {}

    /// Independent stream keyed by (seed, a, b).
    static Rng stream(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
        return Rng(splitmix64(seed ^ splitmix64(a * 0x100000001b3ULL + splitmix64(b))));
    }

    std::uint64_t next() { return engine_(); }

    /// Uniform on [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Uniform integer on [0, n). n must be positive.
    std::uint64_t below(std::uint64_t n) {
        // Lemire's multiply-shift with rejection.
        unsigned __int128 m = static_cast<unsigned __int128>(engine_()) * n;
        auto low = static_cast<std::uint64_t>(m);
        if (low < n) {
            std::uint64_t threshold = (0 - n) % n;
            while (low < threshold) {
                m = static_cast<unsigned __int128>(engine_()) * n;
                low = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

    bool bernoulli(double p) { return p > 0.0 && (p >= 1.0 || uniform() < p); }

    /// Exponential with the given rate (> 0).
    double exponential(double rate) { return -std::log1p(-uniform()) / rate; }

private:
    std::mt19937_64 engine_;
};

}  // namespace hybridmac
