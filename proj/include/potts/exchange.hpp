#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "potts/hidden.hpp"
#include "potts/lattice.hpp"
#include "potts/rng.hpp"
#include "potts/smc.hpp"

namespace potts {

struct ExchangeConfig {
    std::int64_t iterations = 100000;
    std::int64_t burn_in = 10000;
    double proposal_sd = 0.1;
    std::int32_t aux_gibbs_sweeps = 500;
    std::uint64_t seed = 0;

    void validate() const;
};

struct ChainResult {
    std::vector<double> beta_trace;  // post burn-in
    double acceptance_rate = 0.0;
    double ess = 0.0;  // autocorrelation-adjusted
};

// Log acceptance ratio of the exchange move: the auxiliary field z' drawn
// at beta' cancels both normalising constants, leaving
// log pi(beta')/pi(beta) + (beta' - beta) * (s_obs - s_aux).
double exchange_log_ratio(double beta, double beta_proposed, double s_obs, double s_aux,
                          const UniformPrior& prior);

struct ExchangeStep {
    double beta = 0.0;
    bool accepted = false;
};

// One MH step: propose beta' ~ N(beta, sd^2), simulate an auxiliary field
// with aux_gibbs_sweeps Gibbs sweeps from a uniform start, accept or keep.
ExchangeStep exchange_step(double beta, std::int64_t s_obs, const Lattice& lat,
                           const UniformPrior& prior, const ExchangeConfig& config, Rng& rng);

// Chain over beta for a fully observed label image, started at the prior
// midpoint.
ChainResult run_exchange(const LabelImage& z_obs, const UniformPrior& prior,
                         const ExchangeConfig& config);

// Hidden-data variant: per iteration, one exchange step against the current
// S(z) followed by one chequerboard sweep and noise update. The final chain
// state is returned through `final_state` when non-null.
ChainResult run_exchange_hidden(const ObservedImage& y, std::int32_t k, const UniformPrior& prior,
                                const NoisePriors& noise_priors, const ExchangeConfig& config,
                                std::int32_t init_sweeps = 100, int threads = 1,
                                std::optional<AuxChainState>* final_state = nullptr);

// Initial-positive-sequence estimate of the effective sample size of a
// correlated trace: T / (1 + 2 sum rho_l), truncated at the first
// non-positive pair of consecutive autocorrelations, clipped to [1, T].
double autocorr_ess(std::span<const double> trace);

}  // namespace potts
