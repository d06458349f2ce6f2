#pragma once

// Counter-based random numbers (Philox4x32-10). Every draw is a pure function
// of (seed, stream, path, step, component), so ensembles are reproducible
// under any parallel schedule.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <utility>

namespace qbsde::rng {

using Counter = std::array<std::uint32_t, 4>;
using Key = std::array<std::uint32_t, 2>;

inline Counter philox4x32_10(Counter ctr, Key key) noexcept {
    constexpr std::uint32_t kM0 = 0xD2511F53u;
    constexpr std::uint32_t kM1 = 0xCD9E8D57u;
    constexpr std::uint32_t kW0 = 0x9E3779B9u;
    constexpr std::uint32_t kW1 = 0xBB67AE85u;
    for (int round = 0; round < 10; ++round) {
        if (round > 0) {
            key[0] += kW0;
            key[1] += kW1;
        }
        const std::uint64_t p0 = std::uint64_t{kM0} * ctr[0];
        const std::uint64_t p1 = std::uint64_t{kM1} * ctr[2];
        const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
        const auto lo0 = static_cast<std::uint32_t>(p0);
        const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
        const auto lo1 = static_cast<std::uint32_t>(p1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    }
    return ctr;
}

/// Streams keep independent uses of one seed from colliding.
enum class Stream : std::uint32_t {
    increments = 0,
    initial_state = 1,
    validation = 2,
    probe = 3,
};

/// Uniform in the open interval (0, 1) with 53 random bits.
inline double to_unit_open(std::uint64_t bits) noexcept {
    return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

/// Two independent uniforms for the counter (index, step, slot) of `stream`.
inline std::pair<double, double> uniform_pair(std::uint64_t seed, Stream stream,
                                              std::uint64_t index, std::uint32_t step,
                                              std::uint32_t slot) noexcept {
    const Counter ctr{static_cast<std::uint32_t>(index), step, slot,
                      static_cast<std::uint32_t>(stream)};
    const Key key{static_cast<std::uint32_t>(seed),
                  static_cast<std::uint32_t>(seed >> 32) ^ static_cast<std::uint32_t>(index >> 32)};
    const Counter r = philox4x32_10(ctr, key);
    const std::uint64_t a = (std::uint64_t{r[0]} << 32) | r[1];
    const std::uint64_t b = (std::uint64_t{r[2]} << 32) | r[3];
    return {to_unit_open(a), to_unit_open(b)};
}

/// Two independent standard normals (Box-Muller on one Philox block).
inline std::pair<double, double> gaussian_pair(std::uint64_t seed, Stream stream,
                                               std::uint64_t index, std::uint32_t step,
                                               std::uint32_t slot) noexcept {
    const auto [u1, u2] = uniform_pair(seed, stream, index, step, slot);
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    return {r * std::cos(theta), r * std::sin(theta)};
}

/// SplitMix64 finaliser; used to derive child seeds (per window, per trial).
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) noexcept {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (salt + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

}  // namespace qbsde::rng
