#include "potts/smc.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>

#include "potts/parallel.hpp"
#include "potts/stats.hpp"

namespace potts {

UniformPrior::UniformPrior(double lower_, double upper_) : lower(lower_), upper(upper_) {
    if (!(lower < upper)) throw std::invalid_argument("prior interval is degenerate");
}

ModelSummaryGenerator::ModelSummaryGenerator(Lattice lat, int burn_in_sweeps, int sweeps_per_draw)
    : lat_(lat), burn_in_sweeps_(burn_in_sweeps), sweeps_per_draw_(sweeps_per_draw) {
    if (burn_in_sweeps_ < 0 || sweeps_per_draw_ < 1)
        throw std::invalid_argument("bad model-backend sweep configuration");
}

void ModelSummaryGenerator::draw_batch(double beta, std::span<double> out, Rng& rng) const {
    LabelImage z(lat_);
    randomize_labels(z, rng);
    for (int s = 0; s < burn_in_sweeps_; ++s) swendsen_wang_step(z, beta, rng);
    for (double& v : out) {
        for (int s = 0; s < sweeps_per_draw_; ++s) swendsen_wang_step(z, beta, rng);
        v = static_cast<double>(sufficient_statistic(z));
    }
}

SyntheticSummaryGenerator::SyntheticSummaryGenerator(BindingTable table) : table_(std::move(table)) {
    table_.validate();
}

void SyntheticSummaryGenerator::draw_batch(double beta, std::span<double> out, Rng& rng) const {
    const MomentPair m = query(table_, beta);
    for (double& v : out) v = normal(rng, m.mean, m.sd);
}

std::int64_t Particle::alive(double s_obs, double eps) const {
    const auto lo = std::upper_bound(summaries.begin(), summaries.end(), s_obs - eps);
    const auto hi = std::lower_bound(summaries.begin(), summaries.end(), s_obs + eps);
    return hi > lo ? hi - lo : 0;
}

void SMCConfig::validate() const {
    if (n_particles < 2) throw std::invalid_argument("need at least two particles");
    if (m_replicates < 1) throw std::invalid_argument("need at least one replicate");
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0,1)");
    if (!(ess_min > 0.0 && ess_min <= n_particles))
        throw std::invalid_argument("ess_min must lie in (0, N]");
    if (proposal_scale_factor <= 0.0)
        throw std::invalid_argument("proposal_scale_factor must be positive");
    if (max_iterations < 1) throw std::invalid_argument("max_iterations must be positive");
    if (threads < 1) throw std::invalid_argument("threads must be positive");
}

std::vector<double> ParticleSystem::weights() const {
    std::vector<double> w;
    w.reserve(particles.size());
    for (const auto& p : particles) w.push_back(p.weight);
    return w;
}

std::vector<double> ParticleSystem::betas() const {
    std::vector<double> b;
    b.reserve(particles.size());
    for (const auto& p : particles) b.push_back(p.beta);
    return b;
}

const char* to_string(StopReason reason) {
    switch (reason) {
        case StopReason::AcceptanceRate: return "acceptance_rate";
        case StopReason::EpsilonStalled: return "epsilon_stalled";
        case StopReason::MaxIterations: return "max_iterations";
        case StopReason::ToleranceTooTight: return "tolerance_too_tight";
    }
    return "unknown";
}

double ess(std::span<const double> weights) {
    double sum = 0.0, sumsq = 0.0;
    for (double w : weights) {
        sum += w;
        sumsq += w * w;
    }
    if (sumsq <= 0.0) throw DegenerateSystem("effective sample size of an all-zero weight vector");
    return (sum * sum) / sumsq;
}

ParticleSystem initialize(const UniformPrior& prior, const SummaryGenerator& gen, double s_obs,
                          const SMCConfig& config) {
    config.validate();
    ParticleSystem system;
    system.s_obs = s_obs;
    system.t = 0;
    system.particles.resize(static_cast<std::size_t>(config.n_particles));
    parallel_for(config.n_particles, config.threads, [&](std::int64_t begin, std::int64_t end) {
        for (std::int64_t i = begin; i < end; ++i) {
            Rng rng = make_rng(config.seed, stream::smc_init, static_cast<std::uint64_t>(i));
            Particle& p = system.particles[static_cast<std::size_t>(i)];
            p.beta = prior.sample(rng);
            p.weight = 1.0 / config.n_particles;
            p.summaries.resize(static_cast<std::size_t>(config.m_replicates));
            gen.draw_batch(p.beta, p.summaries, rng);
            std::sort(p.summaries.begin(), p.summaries.end());
        }
    });
    double max_dist = 0.0;
    for (const auto& p : system.particles)
        for (double s : p.summaries) max_dist = std::max(max_dist, std::abs(s - s_obs));
    // strictly above the largest distance so every replicate starts alive
    system.epsilon = std::nextafter(max_dist, std::numeric_limits<double>::infinity());
    system.ess = static_cast<double>(config.n_particles);
    return system;
}

namespace {

// Reweighted ESS at a candidate tolerance; 0 when every particle dies.
double candidate_ess(const ParticleSystem& system, double eps_new) {
    double sum = 0.0, sumsq = 0.0;
    for (const auto& p : system.particles) {
        if (p.weight <= 0.0) continue;
        const std::int64_t denom = p.alive(system.s_obs, system.epsilon);
        if (denom == 0) continue;
        const double w = p.weight * static_cast<double>(p.alive(system.s_obs, eps_new)) /
                         static_cast<double>(denom);
        sum += w;
        sumsq += w * w;
    }
    if (sumsq <= 0.0) return 0.0;
    return (sum * sum) / sumsq;
}

}  // namespace

std::vector<double> reweight(const ParticleSystem& system, double eps_new) {
    if (eps_new > system.epsilon)
        throw std::invalid_argument("reweight tolerance must not exceed the current one");
    std::vector<double> w(system.particles.size(), 0.0);
    double total = 0.0;
    for (std::size_t i = 0; i < system.particles.size(); ++i) {
        const Particle& p = system.particles[i];
        if (p.weight <= 0.0) continue;
        const std::int64_t denom = p.alive(system.s_obs, system.epsilon);
        if (denom == 0) continue;  // stranded (moving target); drops out
        w[i] = p.weight * static_cast<double>(p.alive(system.s_obs, eps_new)) /
               static_cast<double>(denom);
        total += w[i];
    }
    if (total <= 0.0)
        throw ToleranceTooTight("no particle retains a live replicate at the requested tolerance");
    for (double& v : w) v /= total;
    return w;
}

double adapt_tolerance(const ParticleSystem& system, double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0,1)");
    const double eps_cur = system.epsilon;
    const double current = candidate_ess(system, eps_cur);
    if (current <= 0.0)
        throw ToleranceTooTight("system is degenerate at the current tolerance");
    const double target = alpha * ess(system.weights());
    if (current < target) return eps_cur;  // forced drop (moving target); never raise epsilon

    // ESS(eps) is a step function with jumps at the replicate distances; the
    // bracket converges onto a step boundary that still meets the target.
    // The lower endpoint never reaches 0 because ESS vanishes below the
    // smallest distance.
    double lo = 0.0, hi = eps_cur;
    for (int it = 0; it < 100 && (hi - lo) > 1e-6 * eps_cur; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (candidate_ess(system, mid) >= target)
            hi = mid;
        else
            lo = mid;
    }
    if (hi < eps_cur) return hi;

    // Flat region: no eps below the current one meets the target (discrete
    // summaries quantize the ESS). Drop one distance order statistic so the
    // run still makes progress.
    double next_step = 0.0;
    for (const auto& p : system.particles) {
        if (p.weight <= 0.0) continue;
        for (double s : p.summaries) {
            const double d = std::abs(s - system.s_obs);
            if (d < eps_cur) next_step = std::max(next_step, d);
        }
    }
    if (next_step > 0.0 && candidate_ess(system, next_step) > 0.0) return next_step;
    return eps_cur;
}

void resample_residual(ParticleSystem& system, Rng& rng) {
    const std::size_t n = system.particles.size();
    const double dn = static_cast<double>(n);
    std::vector<Particle> next;
    next.reserve(n);
    std::vector<double> residual(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double expected = dn * system.particles[i].weight;
        const auto copies = static_cast<std::int64_t>(std::floor(expected));
        residual[i] = expected - static_cast<double>(copies);
        for (std::int64_t c = 0; c < copies; ++c) next.push_back(system.particles[i]);
    }
    std::vector<double> cumulative(n);
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        acc += residual[i];
        cumulative[i] = acc;
    }
    while (next.size() < n) {
        const double u = uniform01(rng) * acc;
        const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
        const std::size_t idx = std::min(n - 1, static_cast<std::size_t>(it - cumulative.begin()));
        next.push_back(system.particles[idx]);
    }
    for (auto& p : next) p.weight = 1.0 / dn;
    system.particles = std::move(next);
    system.ess = dn;
}

double adapt_bandwidth(const ParticleSystem& system, double scale) {
    const auto betas = system.betas();
    const auto weights = system.weights();
    const double var = weighted_variance(betas, weights);
    return std::max(scale * var, 1e-10);
}

double mh_ratio(std::int64_t alive_new, std::int64_t alive_old, double prior_new, double prior_old) {
    if (alive_old <= 0 || prior_old <= 0.0)
        throw std::invalid_argument("mh_ratio on a dead current state");
    if (prior_new <= 0.0 || alive_new <= 0) return 0.0;
    return (static_cast<double>(alive_new) / static_cast<double>(alive_old)) *
           (prior_new / prior_old);
}

double mutate(ParticleSystem& system, const UniformPrior& prior, const SummaryGenerator& gen,
              double sigma2_mh, const SMCConfig& config) {
    const double sd = std::sqrt(sigma2_mh);
    const auto n = std::ssize(system.particles);
    std::vector<char> accepted(static_cast<std::size_t>(n), 0);
    std::vector<char> attempted(static_cast<std::size_t>(n), 0);
    const std::int32_t iteration = system.t;
    parallel_for(n, config.threads, [&](std::int64_t begin, std::int64_t end) {
        std::vector<double> proposal_summaries(static_cast<std::size_t>(config.m_replicates));
        for (std::int64_t i = begin; i < end; ++i) {
            Particle& p = system.particles[static_cast<std::size_t>(i)];
            if (p.weight <= 0.0) continue;
            attempted[static_cast<std::size_t>(i)] = 1;
            Rng rng = make_rng(config.seed, stream::smc_mutate,
                               substream(static_cast<std::uint64_t>(iteration),
                                         static_cast<std::uint64_t>(i)));
            const double beta_new = normal(rng, p.beta, sd);
            const double prior_new = prior.density(beta_new);
            if (prior_new <= 0.0) continue;  // rho = 0
            const std::int64_t alive_old = p.alive(system.s_obs, system.epsilon);
            if (alive_old == 0) continue;
            gen.draw_batch(beta_new, proposal_summaries, rng);
            std::sort(proposal_summaries.begin(), proposal_summaries.end());
            std::int64_t alive_new = 0;
            for (double s : proposal_summaries)
                if (std::abs(s - system.s_obs) < system.epsilon) ++alive_new;
            const double rho = mh_ratio(alive_new, alive_old, prior_new, prior.density(p.beta));
            if (rho >= 1.0 || (rho > 0.0 && uniform01(rng) < rho)) {
                p.beta = beta_new;
                p.summaries = proposal_summaries;
                accepted[static_cast<std::size_t>(i)] = 1;
            }
        }
    });
    std::int64_t n_acc = 0, n_att = 0;
    for (std::int64_t i = 0; i < n; ++i) {
        n_acc += accepted[static_cast<std::size_t>(i)];
        n_att += attempted[static_cast<std::size_t>(i)];
    }
    return n_att > 0 ? static_cast<double>(n_acc) / static_cast<double>(n_att) : 0.0;
}

IterationStats smc_iteration(ParticleSystem& system, const UniformPrior& prior,
                             const SummaryGenerator& gen, const SMCConfig& config, Rng& run_rng) {
    const double eps_new = adapt_tolerance(system, config.alpha);
    const std::vector<double> w = reweight(system, eps_new);
    for (std::size_t i = 0; i < w.size(); ++i) system.particles[i].weight = w[i];
    system.epsilon = eps_new;
    system.ess = ess(w);
    system.t += 1;

    IterationStats stats;
    stats.t = system.t;
    stats.epsilon = system.epsilon;
    stats.ess = system.ess;
    stats.s_obs = system.s_obs;

    if (system.ess < config.ess_min) resample_residual(system, run_rng);
    const double sigma2 = adapt_bandwidth(system, config.proposal_scale_factor);
    stats.acceptance_rate = mutate(system, prior, gen, sigma2, config);
    stats.beta_mean = weighted_mean(system.betas(), system.weights());
    return stats;
}

SmcResult run(const UniformPrior& prior, const SummaryGenerator& gen, double s_obs,
              const SMCConfig& config) {
    config.validate();
    SmcResult result;
    result.system = initialize(prior, gen, s_obs, config);
    Rng run_rng = make_rng(config.seed, stream::smc_resample);
    result.stop = StopReason::MaxIterations;
    for (std::int32_t t = 1; t <= config.max_iterations; ++t) {
        const double eps_prev = result.system.epsilon;
        IterationStats stats;
        try {
            stats = smc_iteration(result.system, prior, gen, config, run_rng);
        } catch (const ToleranceTooTight&) {
            result.stop = StopReason::ToleranceTooTight;
            break;
        }
        result.trace.push_back(stats);
        if (stats.acceptance_rate < config.min_acceptance_rate) {
            result.stop = StopReason::AcceptanceRate;
            break;
        }
        if (eps_prev > 0.0 && (eps_prev - stats.epsilon) / eps_prev < config.min_rel_eps_change) {
            result.stop = StopReason::EpsilonStalled;
            break;
        }
    }
    return result;
}

}  // namespace potts
