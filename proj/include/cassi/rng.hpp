#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace cassi {

// splitmix64 finalizer; whitens user seeds and derives named substreams.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Named substreams so independent consumers (weight init, shuffling,
// dropout, noise, ...) never share an engine. A run is reproducible from
// one master seed.
enum class Stream : std::uint64_t {
    PhiInit = 1,
    ThetaInit = 2,
    Shuffle = 3,
    Dropout = 4,
    Design = 5,
    Split = 6,
    SynthBase = 7,
    SynthBumps = 8,
    SynthNoise = 9,
    SynthTiles = 10,
    GradCheck = 11,
    SensorNoise = 12,
};

inline std::uint64_t derive_seed(std::uint64_t master, Stream stream) {
    return splitmix64(splitmix64(master) ^
                      splitmix64(0x517cc1b727220a95ULL * (static_cast<std::uint64_t>(stream) + 1)));
}

// Deterministic RNG. std::mt19937_64 output is pinned by the standard; the
// distribution helpers are hand-rolled because the std::*_distribution
// algorithms are implementation-defined and would make seeded regression
// values toolchain-dependent.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(splitmix64(seed)) {}

    std::uint64_t next_u64() { return eng_(); }

    // uniform in [0, 1)
    double uniform01() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    bool bernoulli(double p) { return uniform01() < p; }

    // standard normal, Box-Muller with a cached second draw
    double normal() {
        if (has_cached_) {
            has_cached_ = false;
            return cached_;
        }
        double u1 = 1.0 - uniform01(); // (0, 1], keeps log() finite
        double u2 = uniform01();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925286766559 * u2;
        cached_ = r * std::sin(a);
        has_cached_ = true;
        return r * std::cos(a);
    }

    // uniform index in [0, n); Lemire multiply-shift (bias ~ n / 2^64)
    std::size_t index(std::size_t n) {
        unsigned __int128 m = static_cast<unsigned __int128>(eng_()) * n;
        return static_cast<std::size_t>(m >> 64);
    }

    template <class T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = index(i);
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 eng_;
    double cached_ = 0.0;
    bool has_cached_ = false;
};

} // namespace cassi
