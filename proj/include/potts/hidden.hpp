#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "potts/lattice.hpp"
#include "potts/rng.hpp"
#include "potts/smc.hpp"

namespace potts {

// Additive Gaussian observation model: y_i | z_i = j ~ N(mu[j], sigma2[j]).
struct NoiseParams {
    std::vector<double> mu;
    std::vector<double> sigma2;

    NoiseParams() = default;
    NoiseParams(std::vector<double> mu_, std::vector<double> sigma2_);

    std::int32_t k() const { return static_cast<std::int32_t>(mu.size()); }
};

// Conjugate priors shared across components: mu_j ~ N(m0, v0),
// sigma2_j ~ InvGamma(a0, b0).
struct NoisePriors {
    double m0 = 0.0;
    double v0 = 100.0 * 100.0;
    double a0 = 1.0;
    double b0 = 0.01;

    void validate() const;
};

// Per-component data summaries given the current labels.
struct ComponentMoments {
    std::vector<std::int64_t> n;
    std::vector<double> mean;
    std::vector<double> var;  // divisor n (population form); 0 when n < 2
};

// Parameters of the two full conditionals used by the noise update.
struct NoisePosterior {
    double ig_shape = 0.0;
    double ig_rate = 0.0;
    double mu_mean = 0.0;
    double mu_var = 0.0;
};

// The single MCMC chain coupled to the SMC run: latent labels, noise
// parameters, and exact integer caches (S(z) and the per-label counts).
class AuxChainState {
public:
    AuxChainState(LabelImage z, NoiseParams noise);

    const LabelImage& z() const { return z_; }
    const NoiseParams& noise() const { return noise_; }
    NoiseParams& noise() { return noise_; }
    std::int64_t s_current() const { return s_current_; }
    std::span<const std::int64_t> label_counts() const { return counts_; }

    // Single-site label change keeping the caches coherent.
    void assign(std::int64_t i, std::uint8_t label);

private:
    LabelImage z_;
    NoiseParams noise_;
    std::int64_t s_current_;
    std::vector<std::int64_t> counts_;
};

// Posterior label conditional at site i: component j proportional to
// N(y_i; mu_j, sigma2_j) * exp(beta * local_agreement(i, j)). Log-space.
std::vector<double> posterior_label_distribution(double y_i, const LabelImage& z, std::int64_t i,
                                                 const NoiseParams& noise, double beta);

// Per-component n, mean, and variance of y under the current labelling.
ComponentMoments component_moments(const AuxChainState& state, const ObservedImage& y);

// One chequerboard sweep: all even-parity sites given the odd ones, then
// vice versa. Same-colour sites are conditionally independent, so the
// update may run on several threads; uniforms are pre-drawn from `rng` so
// the result is identical for any thread count.
void chequerboard_sweep(AuxChainState& state, const ObservedImage& y, double beta, Rng& rng,
                        int threads = 1);

// Full conditionals for component j: InvGamma(ig_shape, ig_rate) for
// sigma2_j given mu_j, and N(mu_mean, mu_var) for mu_j given sigma2_j.
// Empty components return the priors.
NoisePosterior noise_posterior(const ComponentMoments& moments, std::int32_t j, double mu_j,
                               double sigma2_j, const NoisePriors& priors);

// Semi-conjugate Gibbs update of every component: sigma2_j | mu_j then
// mu_j | sigma2_j; empty components draw from the prior. Variances are
// floored at 1e-6 * Var(y).
void update_noise_params(AuxChainState& state, const ObservedImage& y, const NoisePriors& priors,
                         Rng& rng);

// Draws `sweeps` beta values from the particle weights, runs one
// chequerboard sweep per value, then one noise update. The particle system
// is read-only here; the caller takes s_current() as the next observed
// summary statistic.
void refresh_chain(AuxChainState& state, const ObservedImage& y, const ParticleSystem& system,
                   std::int32_t sweeps, const NoisePriors& priors, Rng& rng, int threads = 1);

// Chain start at beta = 0: noise moments from a k-quantile partition of y,
// labels from the resulting mixture responsibilities, then alternating
// sweeps and noise updates, all at beta = 0.
AuxChainState init_at_beta0(const ObservedImage& y, std::int32_t k, const NoisePriors& priors,
                            std::int32_t init_sweeps, Rng& rng, int threads = 1);

struct HiddenFitConfig {
    SMCConfig smc;
    std::int32_t sweeps_per_iteration = 1000;
    std::int32_t init_sweeps = 100;
    // When set (synthetic backend), iterations whose s_obs/|E| exceeds this
    // reference are flagged as phase-transition warnings.
    std::optional<double> plateau_reference;
};

struct NoiseTraceRow {
    std::int32_t t = 0;
    NoiseParams noise;
};

struct FitResult {
    ParticleSystem system;               // final weighted beta samples
    std::vector<IterationStats> trace;   // epsilon / ESS / acceptance / s_obs
    std::vector<NoiseTraceRow> noise_trace;
    LabelImage labels;                   // final latent labels
    NoiseParams noise;                   // final noise parameters
    StopReason stop = StopReason::MaxIterations;
    std::vector<std::int32_t> plateau_warnings;  // iterations past the reference
    double init_ms = 0.0;
    double smc_ms = 0.0;
    double chain_ms = 0.0;
    double total_ms = 0.0;
};

// Full hidden-model fit: beta0 initialisation, SMC against the moving
// S(z) target, one chain refresh per SMC iteration.
FitResult fit_hidden_potts(const ObservedImage& y, std::int32_t k, const UniformPrior& beta_prior,
                           const NoisePriors& noise_priors, const SummaryGenerator& gen,
                           const HiddenFitConfig& config);

}  // namespace potts
