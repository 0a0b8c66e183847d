#pragma once

#include <cmath>
#include <cstdint>

namespace condensity {

// SplitMix64 (Steele, Lea & Flood 2014; Vigna's public-domain reference
// constants). Chosen because the raw 64-bit stream is specified exactly by
// the algorithm, so uniform draws are bit-identical on every platform, and
// because independent substreams can be derived by hashing a stream index
// into the seed.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    // Uniform on [0, 1), 53-bit resolution.
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    // Standard normal via Box-Muller; consumes two uniforms per value.
    double normal() {
        const double u1 = 1.0 - uniform(); // (0, 1], keeps log() finite
        const double u2 = uniform();
        constexpr double two_pi = 6.283185307179586476925286766559;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
    }

private:
    std::uint64_t state_;
};

// SplitMix64 finalizer as a standalone 64-bit mix.
inline std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

// Substream i of a seed: seed XOR hash(i). Distinct indices give streams
// that are independent for practical purposes and do not depend on how many
// draws other substreams consumed, so per-observation work can be scheduled
// in any order.
inline SplitMix64 substream(std::uint64_t seed, std::uint64_t index) {
    return SplitMix64(seed ^ mix64(index + 0x9E3779B97F4A7C15ull));
}

inline std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t index) {
    return seed ^ mix64(index + 0x9E3779B97F4A7C15ull);
}

} // namespace condensity
