#pragma once

#include <cmath>
#include <cstdint>

namespace imix {

// Portable deterministic RNG built on the splitmix64 sequence.
//
// Every random quantity in the project flows through this generator, so
// datasets, initializations and mask vectors are bit-reproducible across
// platforms and languages. OS entropy is never consulted.
//
// A (seed, stream) pair selects an independent sequence; normal variates
// use the polar-free Box-Muller transform with an explicit cached value.
class Rng {
public:
    explicit Rng(std::uint64_t seed, std::uint64_t stream = 0)
        : state_(mix(seed + 0x9e3779b97f4a7c15ULL * (stream + 1))) {}

    std::uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ULL;
        return mix(state_);
    }

    // Uniform in [0, 1) with 53 bits of precision.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Integer in [0, n). n must be > 0; modulo bias is negligible at 64 bits.
    std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

    // Standard normal via Box-Muller; consumes two uniforms per pair.
    double normal() {
        if (has_cached_) {
            has_cached_ = false;
            return cached_;
        }
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 0.0) u1 = uniform();  // log(0) guard
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 6.283185307179586476925286766559 * u2;
        cached_ = r * std::sin(theta);
        has_cached_ = true;
        return r * std::cos(theta);
    }

private:
    static std::uint64_t mix(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    std::uint64_t state_;
    double cached_ = 0.0;
    bool has_cached_ = false;
};

// Stream ids used by the trainer so that consuming one source of
// randomness never shifts another.
enum class RngStream : std::uint64_t {
    Init = 1,      // parameter initialization
    Shuffle = 2,   // batch shuffling + dataset splits
    Mask = 3,      // random-vector masking
    Data = 4,      // synthetic data generation
    Select = 5,    // less-forward modality selection
};

inline Rng make_stream(std::uint64_t seed, RngStream s) {
    return Rng(seed, static_cast<std::uint64_t>(s));
}

}  // namespace imix
