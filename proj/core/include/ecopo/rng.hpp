#pragma once

#include <cstdint>
#include <random>

namespace ecopo {

/// Mixes a base seed with a stream index (splitmix64 finalizer), so that
/// per-sentence / per-epoch generators are independent of iteration order.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Deterministic RNG. Wraps mt19937_64 but derives uniforms from raw engine
/// output, so sequences do not depend on the standard library's distribution
/// implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n). n must be > 0.
    std::uint64_t below(std::uint64_t n) {
        const auto wide = static_cast<unsigned __int128>(eng_()) * n;
        return static_cast<std::uint64_t>(wide >> 64);
    }

    std::uint64_t next() { return eng_(); }

private:
    std::mt19937_64 eng_;
};

/// In-place Fisher-Yates shuffle driven by Rng (stable across platforms).
template <typename Vec>
void shuffle(Vec& v, Rng& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng.below(i));
        using std::swap;
        swap(v[i - 1], v[j]);
    }
}

}  // namespace ecopo
