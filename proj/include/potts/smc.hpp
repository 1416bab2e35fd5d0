#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <vector>

#include "potts/binding.hpp"
#include "potts/lattice.hpp"
#include "potts/rng.hpp"
#include "potts/samplers.hpp"

namespace potts {

// Uniform prior on [lower, upper] for the inverse temperature.
struct UniformPrior {
    double lower = 0.0;
    double upper = 1.0;

    UniformPrior(double lower_, double upper_);

    double density(double beta) const {
        return (beta >= lower && beta <= upper) ? 1.0 / (upper - lower) : 0.0;
    }
    double sample(Rng& rng) const { return lower + uniform01(rng) * (upper - lower); }
    double midpoint() const { return 0.5 * (lower + upper); }
};

// Produces replicate summary-statistic draws for a given beta. The model
// backend simulates the field; the synthetic backend draws from the
// precomputed Gaussian auxiliary model. Implementations are stateless per
// call and safe to share across threads.
class SummaryGenerator {
public:
    virtual ~SummaryGenerator() = default;
    virtual void draw_batch(double beta, std::span<double> out, Rng& rng) const = 0;
};

// Fresh Swendsen-Wang chain per batch: uniform start, burn-in sweeps, then
// one draw of S(z) every sweeps_per_draw steps.
class ModelSummaryGenerator final : public SummaryGenerator {
public:
    ModelSummaryGenerator(Lattice lat, int burn_in_sweeps = 50, int sweeps_per_draw = 10);
    void draw_batch(double beta, std::span<double> out, Rng& rng) const override;

private:
    Lattice lat_;
    int burn_in_sweeps_;
    int sweeps_per_draw_;
};

// Gaussian draws N(mu(beta), sd(beta)^2) from a binding table.
class SyntheticSummaryGenerator final : public SummaryGenerator {
public:
    explicit SyntheticSummaryGenerator(BindingTable table);
    void draw_batch(double beta, std::span<double> out, Rng& rng) const override;
    const BindingTable& table() const { return table_; }

private:
    BindingTable table_;
};

// All replicate summaries are gone or every particle is dead at the
// requested tolerance.
struct DegenerateSystem : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ToleranceTooTight : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Particle {
    double beta = 0.0;
    double weight = 0.0;
    std::vector<double> summaries;  // kept sorted ascending

    // #{m : |s_m - s_obs| < eps}; strict inequality.
    std::int64_t alive(double s_obs, double eps) const;
};

struct SMCConfig {
    std::int32_t n_particles = 10000;
    std::int32_t m_replicates = 200;
    double alpha = 0.97;       // target ESS decay per iteration
    double ess_min = 5000.0;   // resampling threshold
    double proposal_scale_factor = 2.0;
    double min_acceptance_rate = 0.01;
    std::int32_t max_iterations = 200;
    double min_rel_eps_change = 1e-3;
    std::uint64_t seed = 0;
    int threads = 1;

    void validate() const;
};

struct ParticleSystem {
    std::vector<Particle> particles;
    double epsilon = 0.0;
    std::int32_t t = 0;
    double ess = 0.0;
    double s_obs = 0.0;

    std::vector<double> weights() const;
    std::vector<double> betas() const;
};

struct IterationStats {
    std::int32_t t = 0;
    double epsilon = 0.0;
    double ess = 0.0;
    double acceptance_rate = 0.0;
    double s_obs = 0.0;
    double beta_mean = 0.0;
};

enum class StopReason { AcceptanceRate, EpsilonStalled, MaxIterations, ToleranceTooTight };

const char* to_string(StopReason reason);

struct SmcResult {
    ParticleSystem system;
    std::vector<IterationStats> trace;
    StopReason stop = StopReason::MaxIterations;
};

// (sum w_i^2)^-1 for normalized weights.
double ess(std::span<const double> weights);

// Draws N particles from the prior with M replicate summaries each;
// uniform weights; epsilon_0 just above the largest distance so every
// replicate starts alive. Particle i uses rng stream (seed, smc_init, i).
ParticleSystem initialize(const UniformPrior& prior, const SummaryGenerator& gen, double s_obs,
                          const SMCConfig& config);

// New weights at a tighter tolerance: w_i' ∝ w_i * alive(eps_new)/alive(eps_old).
// Throws ToleranceTooTight when every particle would die.
std::vector<double> reweight(const ParticleSystem& system, double eps_new);

// Largest-tested epsilon (by bisection on [0, epsilon]) whose reweighted
// ESS still meets alpha * current ESS; conservative side of the step.
double adapt_tolerance(const ParticleSystem& system, double alpha);

// Residual resampling: floor(N w_i) deterministic copies, multinomial fill
// from the residuals, weights reset to 1/N.
void resample_residual(ParticleSystem& system, Rng& rng);

// MH proposal variance: scale * weighted sample variance of beta (floored).
double adapt_bandwidth(const ParticleSystem& system, double scale = 2.0);

// Gaussian random-walk acceptance ratio for the joint (beta, replicates)
// move; symmetric proposal, so only the replicate-survival and prior
// ratios enter.
double mh_ratio(std::int64_t alive_new, std::int64_t alive_old, double prior_new, double prior_old);

// Random-walk move on every particle with nonzero weight, redrawing its M
// replicates. Returns the acceptance rate. Particle i at iteration `t`
// uses rng stream (seed, smc_mutate, (t, i)).
double mutate(ParticleSystem& system, const UniformPrior& prior, const SummaryGenerator& gen,
              double sigma2_mh, const SMCConfig& config);

// One adapt/reweight/resample/mutate cycle; shared by run() and the hidden
// model fit.
IterationStats smc_iteration(ParticleSystem& system, const UniformPrior& prior,
                             const SummaryGenerator& gen, const SMCConfig& config, Rng& run_rng);

// Full adaptive SMC-ABC run against a fixed observed summary.
SmcResult run(const UniformPrior& prior, const SummaryGenerator& gen, double s_obs,
              const SMCConfig& config);

}  // namespace potts
