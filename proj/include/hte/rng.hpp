// SPDX-License-Identifier: MIT
/**
 * @file rng.hpp
 * @brief Keyed random streams.
 *
 * A stream is identified by (seed, purpose, i, j); its engine seed is a
 * SplitMix64 hash of the key, so streams for different epochs, points and
 * probe sets are independent and can be regenerated in any order.
 */
#pragma once

#include <cstdint>
#include <random>

namespace hte {

enum class StreamPurpose : std::uint64_t {
    params = 1,
    points = 2,
    probes = 3,
    probes_second = 4,
    coefficients = 5,
    test_points = 6,
    gpinn_directions = 7,
    misc = 8,
};

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept
{
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t stream_key(std::uint64_t seed, StreamPurpose purpose, std::uint64_t i = 0,
                                   std::uint64_t j = 0) noexcept
{
    std::uint64_t h = splitmix64(seed);
    h = splitmix64(h ^ static_cast<std::uint64_t>(purpose));
    h = splitmix64(h ^ i);
    h = splitmix64(h ^ (j * 0xD1B54A32D192ED03ULL));
    return h;
}

using Engine = std::mt19937_64;

inline Engine make_stream(std::uint64_t seed, StreamPurpose purpose, std::uint64_t i = 0, std::uint64_t j = 0)
{
    return Engine(stream_key(seed, purpose, i, j));
}

}  // namespace hte
