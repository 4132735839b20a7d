#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace fedlog {

/// splitmix64 step; used to derive independent stream seeds from one master
/// seed. Fixed algorithm so that derived streams are stable across platforms.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Mixes a master seed with stream tags (client id, round, purpose) into a
/// fresh seed. Distinct tag tuples give statistically independent streams.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t tag0,
                                 std::uint64_t tag1 = 0) {
    std::uint64_t s = master;
    std::uint64_t out = splitmix64(s);
    s ^= tag0 * 0x9e3779b97f4a7c15ULL;
    out ^= splitmix64(s);
    s ^= tag1 * 0xc2b2ae3d27d4eb4fULL;
    out ^= splitmix64(s);
    return out;
}

/// Deterministic random source. Wraps std::mt19937_64 (fully specified by the
/// standard) and derives doubles and bounded ints from raw 64-bit draws, so a
/// given seed produces the same sequence on every platform and standard
/// library. Gaussians come from the Box-Muller transform of two such uniforms.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Non-reproducible source for "real" (non-test) runs.
    static Rng from_entropy() {
        std::random_device rd;
        std::uint64_t seed = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
        return Rng(seed);
    }

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform in [0, 1), 53-bit resolution.
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    /// Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, bound) via 128-bit multiply-shift.
    std::uint64_t uniform_below(std::uint64_t bound) {
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(next_u64()) * bound) >> 64);
    }

    /// Standard normal draw (Box-Muller, no state carried between calls).
    double gaussian() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        return r * std::cos(2.0 * M_PI * u2);
    }

    double gaussian(double mean, double stddev) {
        return mean + stddev * gaussian();
    }

    /// Fisher-Yates shuffle with draws from this source.
    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(uniform_below(i));
            std::swap(items[i - 1], items[j]);
        }
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace fedlog
