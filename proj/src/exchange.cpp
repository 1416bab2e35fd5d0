#include "potts/exchange.hpp"

#include <cmath>
#include <optional>
#include <limits>
#include <stdexcept>

#include "potts/samplers.hpp"

namespace potts {

void ExchangeConfig::validate() const {
    if (iterations < 1) throw std::invalid_argument("iterations must be positive");
    if (burn_in < 0 || burn_in >= iterations)
        throw std::invalid_argument("burn_in must lie in [0, iterations)");
    if (proposal_sd <= 0.0) throw std::invalid_argument("proposal_sd must be positive");
    if (aux_gibbs_sweeps < 1) throw std::invalid_argument("aux_gibbs_sweeps must be positive");
}

double exchange_log_ratio(double beta, double beta_proposed, double s_obs, double s_aux,
                          const UniformPrior& prior) {
    const double p_new = prior.density(beta_proposed);
    const double p_old = prior.density(beta);
    if (p_old <= 0.0) throw std::invalid_argument("current beta outside prior support");
    if (p_new <= 0.0) return -std::numeric_limits<double>::infinity();
    return std::log(p_new / p_old) + (beta_proposed - beta) * (s_obs - s_aux);
}

ExchangeStep exchange_step(double beta, std::int64_t s_obs, const Lattice& lat,
                           const UniformPrior& prior, const ExchangeConfig& config, Rng& rng) {
    const double beta_proposed = normal(rng, beta, config.proposal_sd);
    if (prior.density(beta_proposed) <= 0.0) return ExchangeStep{beta, false};

    LabelImage aux(lat);
    randomize_labels(aux, rng);
    for (std::int32_t s = 0; s < config.aux_gibbs_sweeps; ++s)
        gibbs_sweep(aux, beta_proposed, rng);
    const double s_aux = static_cast<double>(sufficient_statistic(aux));

    const double log_rho =
        exchange_log_ratio(beta, beta_proposed, static_cast<double>(s_obs), s_aux, prior);
    if (log_rho >= 0.0 || std::log(uniform01(rng)) < log_rho)
        return ExchangeStep{beta_proposed, true};
    return ExchangeStep{beta, false};
}

ChainResult run_exchange(const LabelImage& z_obs, const UniformPrior& prior,
                         const ExchangeConfig& config) {
    config.validate();
    Rng rng = make_rng(config.seed, stream::exchange);
    const std::int64_t s_obs = sufficient_statistic(z_obs);
    double beta = prior.midpoint();
    ChainResult result;
    result.beta_trace.reserve(static_cast<std::size_t>(config.iterations - config.burn_in));
    std::int64_t accepted = 0;
    for (std::int64_t it = 0; it < config.iterations; ++it) {
        const ExchangeStep step = exchange_step(beta, s_obs, z_obs.lattice(), prior, config, rng);
        beta = step.beta;
        if (step.accepted) ++accepted;
        if (it >= config.burn_in) result.beta_trace.push_back(beta);
    }
    result.acceptance_rate = static_cast<double>(accepted) / static_cast<double>(config.iterations);
    result.ess = autocorr_ess(result.beta_trace);
    return result;
}

ChainResult run_exchange_hidden(const ObservedImage& y, std::int32_t k, const UniformPrior& prior,
                                const NoisePriors& noise_priors, const ExchangeConfig& config,
                                std::int32_t init_sweeps, int threads,
                                std::optional<AuxChainState>* final_state) {
    config.validate();
    Rng rng = make_rng(config.seed, stream::exchange);
    Rng chain_rng = make_rng(config.seed, stream::aux_chain);
    AuxChainState state = init_at_beta0(y, k, noise_priors, init_sweeps, chain_rng, threads);
    const Lattice lat = state.z().lattice();

    double beta = prior.midpoint();
    ChainResult result;
    result.beta_trace.reserve(static_cast<std::size_t>(config.iterations - config.burn_in));
    std::int64_t accepted = 0;
    for (std::int64_t it = 0; it < config.iterations; ++it) {
        const ExchangeStep step = exchange_step(beta, state.s_current(), lat, prior, config, rng);
        beta = step.beta;
        if (step.accepted) ++accepted;
        chequerboard_sweep(state, y, beta, chain_rng, threads);
        update_noise_params(state, y, noise_priors, chain_rng);
        if (it >= config.burn_in) result.beta_trace.push_back(beta);
    }
    result.acceptance_rate = static_cast<double>(accepted) / static_cast<double>(config.iterations);
    result.ess = autocorr_ess(result.beta_trace);
    if (final_state) final_state->emplace(std::move(state));
    return result;
}

double autocorr_ess(std::span<const double> trace) {
    const std::int64_t n = std::ssize(trace);
    if (n < 10) throw std::invalid_argument("trace too short for an ESS estimate");
    const double dn = static_cast<double>(n);
    double mean = 0.0;
    for (double x : trace) mean += x;
    mean /= dn;
    double c0 = 0.0;
    for (double x : trace) c0 += (x - mean) * (x - mean);
    c0 /= dn;
    if (c0 <= 1e-14 * (mean * mean + 1.0)) return 1.0;  // constant trace

    auto acov = [&](std::int64_t lag) {
        double c = 0.0;
        for (std::int64_t i = 0; i + lag < n; ++i)
            c += (trace[static_cast<std::size_t>(i)] - mean) *
                 (trace[static_cast<std::size_t>(i + lag)] - mean);
        return c / dn;
    };

    // Geyer initial positive sequence: add pairs while their sum stays
    // positive.
    double rho_sum = 0.0;
    for (std::int64_t lag = 1; lag + 1 < n; lag += 2) {
        const double pair = (acov(lag) + acov(lag + 1)) / c0;
        if (pair <= 0.0) break;
        rho_sum += pair;
    }
    const double ess = dn / (1.0 + 2.0 * rho_sum);
    return std::min(dn, std::max(1.0, ess));
}

}  // namespace potts
