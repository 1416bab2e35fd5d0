#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "potts/lattice.hpp"
#include "potts/rng.hpp"

namespace potts {

struct SimulationConfig {
    std::int64_t total_iterations = 1000;
    std::int64_t burn_in = 500;
    std::uint64_t seed = 0;

    SimulationConfig() = default;
    SimulationConfig(std::int64_t total, std::int64_t burn, std::uint64_t seed_);

    std::int64_t retained() const { return total_iterations - burn_in; }
};

// Mean and standard deviation of S(z) under pi(z|beta).
struct MomentPair {
    double mean = 0.0;
    double sd = 0.0;
};

// Full conditional of site i: component j proportional to
// exp(beta * local_agreement(i, j)).
std::vector<double> gibbs_site_distribution(const LabelImage& z, std::int64_t i, double beta);

// Same conditional expressed on raw agreement counts; shift-invariant in the
// counts.
std::vector<double> gibbs_distribution_from_counts(std::span<const std::int32_t> counts, double beta);

// One raster-scan sweep resampling every site from its full conditional.
void gibbs_sweep(LabelImage& z, double beta, Rng& rng);

// One Swendsen-Wang cluster update: bonds open on like-labelled edges with
// probability 1 - exp(-beta); each bond cluster gets a fresh uniform label.
void swendsen_wang_step(LabelImage& z, double beta, Rng& rng);

// Fills z with independent uniform labels.
void randomize_labels(LabelImage& z, Rng& rng);

// Swendsen-Wang trace of S(z) from a uniform-random start, post burn-in.
// Deterministic given config.seed.
std::vector<std::int64_t> simulate_summary_trace(const Lattice& lat, double beta,
                                                 const SimulationConfig& config);

// Raised when an exhaustive enumeration would exceed the state budget.
struct OracleInfeasible : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline constexpr std::int64_t kOracleStateBudget = std::int64_t{1} << 26;

// counts[s] = number of label configurations with S(z) = s, s in
// {0..edge_count}. Exhaustive over all k^n states.
std::vector<std::uint64_t> exact_state_histogram(const Lattice& lat);

// Moments of S under exp(beta * S) weighting of a precomputed histogram.
MomentPair moments_from_histogram(std::span<const std::uint64_t> counts, double beta);

// E[S] and SD[S] by exhaustive enumeration; throws OracleInfeasible when
// k^n exceeds the budget.
MomentPair exact_moments(const Lattice& lat, double beta);

// Closed form at beta = 0: S ~ Binomial(|E|, 1/k).
MomentPair binomial_moments_beta0(const Lattice& lat);

}  // namespace potts
