#pragma once

#include <cstdint>
#include <random>

namespace echodeconv {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer; used to derive independent stream seeds.
inline constexpr auto splitmix64(std::uint64_t z) -> std::uint64_t {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Seed for stream `stream` of counter `index` under `master`.
inline constexpr auto derive_seed(std::uint64_t master, std::uint64_t stream, std::uint64_t index = 0)
    -> std::uint64_t {
    return splitmix64(splitmix64(splitmix64(master) ^ stream) + index);
}

/// Stream identifiers, fixed so that changing one parameter never shifts another stream.
namespace stream {
inline constexpr std::uint64_t gate = 0x6761746500000001ULL;
inline constexpr std::uint64_t amplitude = 0x616d706c00000002ULL;
inline constexpr std::uint64_t noise = 0x6e6f697300000003ULL;
inline constexpr std::uint64_t trial = 0x747269616c000004ULL;
}  // namespace stream

}  // namespace echodeconv
