// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <cmath>
#include <random>

namespace bfwloc {

// SplitMix64 finalizer. All derived seeds in the project go through this.
constexpr std::uint64_t mix64(std::uint64_t z)
{
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Seed for the stream with index `stream` under a master seed.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream)
{
    return mix64(master ^ mix64(stream + 0x632be59bd9b4e019ULL));
}

using Rng = std::mt19937_64;

// Uniform index in [0, n). Plain modulo on a 64-bit draw; the bias is far
// below anything the callers can observe and the result is portable.
inline std::size_t draw_index(Rng& rng, std::size_t n)
{
    return static_cast<std::size_t>(rng() % static_cast<std::uint64_t>(n));
}

// Uniform double in [0, 1) from the top 53 bits.
inline double draw_unit(Rng& rng)
{
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Standard normal via Box-Muller; portable across standard libraries.
inline double draw_normal(Rng& rng)
{
    double u1 = draw_unit(rng);
    while (u1 <= 0.0)
        u1 = draw_unit(rng);
    const double u2 = draw_unit(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

} // namespace bfwloc
