#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace potts {

using Rng = std::mt19937_64;

// splitmix64 finalizer; used to turn (seed, stream, substream) triples into
// well-separated engine seeds.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Seed-splitting rule shared by every parallel component: each independent
// unit of work (grid point, particle, chain) gets its own engine seeded by
// derive_seed(master, stream, substream). Results are therefore identical
// for any thread count.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream,
                                 std::uint64_t substream = 0) {
    return mix64(mix64(mix64(master) ^ stream) ^ substream);
}

inline Rng make_rng(std::uint64_t master, std::uint64_t stream, std::uint64_t substream = 0) {
    return Rng(derive_seed(master, stream, substream));
}

// Stream ids for the named consumers of a master seed.
namespace stream {
inline constexpr std::uint64_t grid = 1;
inline constexpr std::uint64_t binding_point = 2;
inline constexpr std::uint64_t smc_init = 3;
inline constexpr std::uint64_t smc_mutate = 4;
inline constexpr std::uint64_t smc_resample = 5;
inline constexpr std::uint64_t aux_chain = 6;
inline constexpr std::uint64_t exchange = 7;
inline constexpr std::uint64_t simulate = 8;
}  // namespace stream

// Packs (iteration, item) into one substream word.
inline std::uint64_t substream(std::uint64_t iteration, std::uint64_t item) {
    return (iteration << 32) | (item & 0xffffffffULL);
}

inline double uniform01(Rng& rng) {
    return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

inline double normal(Rng& rng, double mean = 0.0, double sd = 1.0) {
    return std::normal_distribution<double>(mean, sd)(rng);
}

// Inverse-CDF draw from unnormalized weights; consumes exactly one uniform.
inline std::size_t sample_categorical(std::span<const double> weights, Rng& rng) {
    double total = 0.0;
    for (double w : weights) total += w;
    double u = uniform01(rng) * total;
    double acc = 0.0;
    for (std::size_t j = 0; j + 1 < weights.size(); ++j) {
        acc += weights[j];
        if (u < acc) return j;
    }
    return weights.size() - 1;
}

}  // namespace potts
