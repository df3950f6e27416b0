#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace scr {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Deterministic random stream. mt19937_64's output sequence is fully
/// specified by the standard, and every draw below is built from raw 64-bit
/// words rather than std::*_distribution (whose outputs are
/// implementation-defined), so identical seeds give identical results on any
/// platform.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    /// Independent substream keyed by (seed, stream). Used wherever results
    /// must not depend on processing order or worker count.
    static Rng derive(std::uint64_t seed, std::uint64_t stream) {
        std::uint64_t s = seed ^ (stream * 0x9e3779b97f4a7c15ULL + 0xbf58476d1ce4e5b9ULL);
        splitmix64(s);
        return Rng(splitmix64(s));
    }
    static Rng derive(std::uint64_t seed, std::string_view tag) {
        return derive(seed, fnv1a64(tag));
    }

    std::uint64_t next_u64() { return gen_(); }

    /// Uniform in [0,1), 53-bit resolution.
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    /// Uniform integer in [0,n). Unbiased via rejection.
    std::uint64_t bounded(std::uint64_t n) {
        const std::uint64_t threshold = (0 - n) % n;
        for (;;) {
            const std::uint64_t r = next_u64();
            if (r >= threshold) return r % n;
        }
    }

    std::size_t index(std::size_t n) {
        return static_cast<std::size_t>(bounded(n));
    }

    bool chance(double p) { return next_double() < p; }

    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {  // inclusive
        return lo + static_cast<std::int64_t>(
                        bounded(static_cast<std::uint64_t>(hi - lo) + 1));
    }

    double uniform(double lo, double hi) {
        return lo + (hi - lo) * next_double();
    }

    template <class T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            using std::swap;
            swap(v[i - 1], v[bounded(i)]);
        }
    }

private:
    std::mt19937_64 gen_;
};

}  // namespace scr
