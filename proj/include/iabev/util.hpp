#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace iabev {

// splitmix64 finalizer; used for all hash-derived pseudo-randomness so that
// outputs are bit-identical across platforms and runs.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t hash_combine(std::uint64_t seed, std::uint64_t v) {
    return splitmix64(seed ^ (v + 0x9e3779b97f4a7c15ULL));
}

// Uniform double in [0,1) from a 64-bit word.
constexpr double to_unit_double(std::uint64_t x) {
    return static_cast<double>(x >> 11) * 0x1.0p-53;
}

// Pairwise (cascade) summation. Reduction order is fixed by the input order,
// independent of any threading in the producers.
double pairwise_sum(std::span<const double> values);

// FNV-1a over raw bytes; used for config digests.
std::uint64_t fnv1a(std::span<const char> bytes);

}  // namespace iabev
