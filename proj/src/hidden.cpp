#include "potts/hidden.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>

#include "potts/parallel.hpp"
#include "potts/stats.hpp"

namespace potts {

namespace {

double population_variance(std::span<const double> xs) {
    const double m = mean_of(xs);
    double ss = 0.0;
    for (double x : xs) {
        const double d = x - m;
        ss += d * d;
    }
    return ss / static_cast<double>(xs.size());
}

double inverse_gamma_draw(double shape, double rate, Rng& rng) {
    std::gamma_distribution<double> gamma(shape, 1.0 / rate);
    double g = gamma(rng);
    while (g <= 0.0) g = gamma(rng);
    return 1.0 / g;
}

}  // namespace

NoiseParams::NoiseParams(std::vector<double> mu_, std::vector<double> sigma2_)
    : mu(std::move(mu_)), sigma2(std::move(sigma2_)) {
    if (mu.size() != sigma2.size() || mu.empty())
        throw std::invalid_argument("noise parameter vectors must match and be non-empty");
    for (double v : sigma2)
        if (!(v > 0.0)) throw std::invalid_argument("noise variances must be positive");
}

void NoisePriors::validate() const {
    if (!(v0 > 0.0 && a0 > 0.0 && b0 > 0.0))
        throw std::invalid_argument("noise prior hyperparameters must be positive");
}

AuxChainState::AuxChainState(LabelImage z, NoiseParams noise)
    : z_(std::move(z)), noise_(std::move(noise)), s_current_(sufficient_statistic(z_)),
      counts_(static_cast<std::size_t>(z_.lattice().k), 0) {
    if (noise_.k() != z_.lattice().k)
        throw std::invalid_argument("noise component count must equal k");
    for (std::int64_t i = 0; i < z_.lattice().pixels(); ++i)
        ++counts_[static_cast<std::size_t>(z_.label(i) - 1)];
}

void AuxChainState::assign(std::int64_t i, std::uint8_t label) {
    const std::uint8_t old = z_.label(i);
    if (old == label) return;
    s_current_ += local_agreement(z_, i, label) - local_agreement(z_, i, old);
    --counts_[static_cast<std::size_t>(old - 1)];
    ++counts_[static_cast<std::size_t>(label - 1)];
    z_.set_label(i, label);
}

std::vector<double> posterior_label_distribution(double y_i, const LabelImage& z, std::int64_t i,
                                                 const NoiseParams& noise, double beta) {
    const std::int32_t k = z.lattice().k;
    if (noise.k() != k) throw std::invalid_argument("noise component count must equal k");
    std::vector<double> logp(static_cast<std::size_t>(k));
    for (std::int32_t j = 0; j < k; ++j) {
        const double d = y_i - noise.mu[static_cast<std::size_t>(j)];
        const double s2 = noise.sigma2[static_cast<std::size_t>(j)];
        logp[static_cast<std::size_t>(j)] =
            -0.5 * d * d / s2 - 0.5 * std::log(s2) +
            beta * local_agreement(z, i, static_cast<std::uint8_t>(j + 1));
    }
    const double m = *std::max_element(logp.begin(), logp.end());
    double total = 0.0;
    for (double& v : logp) {
        v = std::exp(v - m);
        total += v;
    }
    for (double& v : logp) v /= total;
    return logp;
}

ComponentMoments component_moments(const AuxChainState& state, const ObservedImage& y) {
    const std::int32_t k = state.z().lattice().k;
    ComponentMoments m;
    m.n.assign(static_cast<std::size_t>(k), 0);
    m.mean.assign(static_cast<std::size_t>(k), 0.0);
    m.var.assign(static_cast<std::size_t>(k), 0.0);
    std::vector<double> sum(static_cast<std::size_t>(k), 0.0);
    std::vector<double> sumsq(static_cast<std::size_t>(k), 0.0);
    for (std::int64_t i = 0; i < state.z().lattice().pixels(); ++i) {
        const auto j = static_cast<std::size_t>(state.z().label(i) - 1);
        const double v = y.values[static_cast<std::size_t>(i)];
        ++m.n[j];
        sum[j] += v;
        sumsq[j] += v * v;
    }
    for (std::size_t j = 0; j < static_cast<std::size_t>(k); ++j) {
        if (m.n[j] > 0) {
            const double n = static_cast<double>(m.n[j]);
            m.mean[j] = sum[j] / n;
            m.var[j] = std::max(0.0, sumsq[j] / n - m.mean[j] * m.mean[j]);
        }
    }
    return m;
}

void chequerboard_sweep(AuxChainState& state, const ObservedImage& y, double beta, Rng& rng,
                        int threads) {
    if (beta < 0.0) throw std::invalid_argument("beta must be non-negative");
    const Lattice lat = state.z().lattice();
    const std::int64_t n = lat.pixels();
    if (y.rows != lat.rows || y.cols != lat.cols)
        throw std::invalid_argument("observed image does not match the chain lattice");
    const std::int32_t k = lat.k;

    // uniforms are drawn once per sweep, indexed by site, so the update is
    // independent of the thread partition
    std::vector<double> u(static_cast<std::size_t>(n));
    for (double& v : u) v = uniform01(rng);

    std::vector<double> inv2var(static_cast<std::size_t>(k)), logsd(static_cast<std::size_t>(k));
    for (std::int32_t j = 0; j < k; ++j) {
        inv2var[static_cast<std::size_t>(j)] = 0.5 / state.noise().sigma2[static_cast<std::size_t>(j)];
        logsd[static_cast<std::size_t>(j)] =
            0.5 * std::log(state.noise().sigma2[static_cast<std::size_t>(j)]);
    }

    std::vector<std::uint8_t> next(static_cast<std::size_t>(n));
    for (int parity = 0; parity < 2; ++parity) {
        const LabelImage& z = state.z();
        parallel_for(n, threads, [&](std::int64_t begin, std::int64_t end) {
            double logp[256];
            std::int32_t agree[256];
            for (std::int64_t i = begin; i < end; ++i) {
                const std::int64_t r = i / lat.cols;
                const std::int64_t c = i % lat.cols;
                if (((r + c) & 1) != parity) continue;
                for (std::int32_t j = 0; j < k; ++j) agree[j] = 0;
                if (r > 0) ++agree[z.label(i - lat.cols) - 1];
                if (c > 0) ++agree[z.label(i - 1) - 1];
                if (c + 1 < lat.cols) ++agree[z.label(i + 1) - 1];
                if (r + 1 < lat.rows) ++agree[z.label(i + lat.cols) - 1];
                const double yi = y.values[static_cast<std::size_t>(i)];
                double best = -std::numeric_limits<double>::infinity();
                for (std::int32_t j = 0; j < k; ++j) {
                    const double d = yi - state.noise().mu[static_cast<std::size_t>(j)];
                    logp[j] = -d * d * inv2var[static_cast<std::size_t>(j)] -
                              logsd[static_cast<std::size_t>(j)] + beta * agree[j];
                    best = std::max(best, logp[j]);
                }
                double total = 0.0;
                for (std::int32_t j = 0; j < k; ++j) {
                    logp[j] = std::exp(logp[j] - best);
                    total += logp[j];
                }
                const double target = u[static_cast<std::size_t>(i)] * total;
                double acc = 0.0;
                std::uint8_t pick = static_cast<std::uint8_t>(k);
                for (std::int32_t j = 0; j + 1 < k; ++j) {
                    acc += logp[j];
                    if (target < acc) {
                        pick = static_cast<std::uint8_t>(j + 1);
                        break;
                    }
                }
                next[static_cast<std::size_t>(i)] = pick;
            }
        });
        // serial application keeps the integer caches exact; same-colour
        // sites are not neighbours, so the order does not matter
        for (std::int64_t i = 0; i < n; ++i) {
            const std::int64_t r = i / lat.cols;
            const std::int64_t c = i % lat.cols;
            if (((r + c) & 1) != parity) continue;
            state.assign(i, next[static_cast<std::size_t>(i)]);
        }
    }
}

NoisePosterior noise_posterior(const ComponentMoments& moments, std::int32_t j, double mu_j,
                               double sigma2_j, const NoisePriors& priors) {
    priors.validate();
    if (!(sigma2_j > 0.0)) throw std::invalid_argument("sigma2 must be positive");
    const auto idx = static_cast<std::size_t>(j);
    NoisePosterior post;
    const double n = static_cast<double>(moments.n[idx]);
    if (n == 0.0) {
        post.ig_shape = priors.a0;
        post.ig_rate = priors.b0;
        post.mu_mean = priors.m0;
        post.mu_var = priors.v0;
        return post;
    }
    const double sse =
        n * moments.var[idx] + n * (moments.mean[idx] - mu_j) * (moments.mean[idx] - mu_j);
    post.ig_shape = priors.a0 + 0.5 * n;
    post.ig_rate = priors.b0 + 0.5 * sse;
    const double precision = 1.0 / priors.v0 + n / sigma2_j;
    post.mu_var = 1.0 / precision;
    post.mu_mean = (priors.m0 / priors.v0 + n * moments.mean[idx] / sigma2_j) * post.mu_var;
    return post;
}

void update_noise_params(AuxChainState& state, const ObservedImage& y, const NoisePriors& priors,
                         Rng& rng) {
    priors.validate();
    const ComponentMoments moments = component_moments(state, y);
    const double var_floor = std::max(1e-6 * population_variance(y.values), 1e-12);
    NoiseParams& noise = state.noise();
    for (std::int32_t j = 0; j < noise.k(); ++j) {
        const auto idx = static_cast<std::size_t>(j);
        const NoisePosterior given_mu = noise_posterior(moments, j, noise.mu[idx], noise.sigma2[idx], priors);
        double s2 = inverse_gamma_draw(given_mu.ig_shape, given_mu.ig_rate, rng);
        s2 = std::max(s2, var_floor);
        noise.sigma2[idx] = s2;
        if (moments.n[idx] == 0) {
            noise.mu[idx] = normal(rng, priors.m0, std::sqrt(priors.v0));
            continue;
        }
        const NoisePosterior given_s2 = noise_posterior(moments, j, noise.mu[idx], s2, priors);
        noise.mu[idx] = normal(rng, given_s2.mu_mean, std::sqrt(given_s2.mu_var));
    }
}

void refresh_chain(AuxChainState& state, const ObservedImage& y, const ParticleSystem& system,
                   std::int32_t sweeps, const NoisePriors& priors, Rng& rng, int threads) {
    if (sweeps < 0) throw std::invalid_argument("sweep count must be non-negative");
    const auto weights = system.weights();
    std::vector<double> cumulative(weights.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        acc += weights[i];
        cumulative[i] = acc;
    }
    if (acc <= 0.0) throw DegenerateSystem("refresh_chain on an all-zero weight system");
    std::vector<double> betas(static_cast<std::size_t>(sweeps));
    for (double& b : betas) {
        const double u = uniform01(rng) * acc;
        const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
        const std::size_t idx =
            std::min(weights.size() - 1, static_cast<std::size_t>(it - cumulative.begin()));
        b = system.particles[idx].beta;
    }
    for (double b : betas) chequerboard_sweep(state, y, b, rng, threads);
    update_noise_params(state, y, priors, rng);
}

AuxChainState init_at_beta0(const ObservedImage& y, std::int32_t k, const NoisePriors& priors,
                            std::int32_t init_sweeps, Rng& rng, int threads) {
    if (k < 2) throw std::invalid_argument("k must be at least 2");
    priors.validate();
    const std::int64_t n = y.pixels();
    const double var_floor = std::max(1e-6 * population_variance(y.values), 1e-12);

    // k-quantile partition of the sorted intensities seeds the components
    std::vector<double> sorted = y.values;
    std::sort(sorted.begin(), sorted.end());
    std::vector<double> mu(static_cast<std::size_t>(k)), sigma2(static_cast<std::size_t>(k));
    for (std::int32_t j = 0; j < k; ++j) {
        const auto lo = static_cast<std::size_t>(n * j / k);
        const auto hi = std::max(lo + 1, static_cast<std::size_t>(n * (j + 1) / k));
        std::span<const double> bin(sorted.data() + lo, hi - lo);
        mu[static_cast<std::size_t>(j)] = mean_of(bin);
        sigma2[static_cast<std::size_t>(j)] = std::max(population_variance(bin), var_floor);
    }

    // labels from beta = 0 responsibilities
    Lattice lat(y.rows, y.cols, k);
    LabelImage z(lat);
    std::vector<double> p(static_cast<std::size_t>(k));
    for (std::int64_t i = 0; i < n; ++i) {
        const double yi = y.values[static_cast<std::size_t>(i)];
        double best = -std::numeric_limits<double>::infinity();
        for (std::int32_t j = 0; j < k; ++j) {
            const double d = yi - mu[static_cast<std::size_t>(j)];
            p[static_cast<std::size_t>(j)] = -0.5 * d * d / sigma2[static_cast<std::size_t>(j)] -
                                             0.5 * std::log(sigma2[static_cast<std::size_t>(j)]);
            best = std::max(best, p[static_cast<std::size_t>(j)]);
        }
        for (double& v : p) v = std::exp(v - best);
        z.set_label(i, static_cast<std::uint8_t>(1 + sample_categorical(p, rng)));
    }

    AuxChainState state(std::move(z), NoiseParams(std::move(mu), std::move(sigma2)));
    for (std::int32_t s = 0; s < init_sweeps; ++s) {
        chequerboard_sweep(state, y, 0.0, rng, threads);
        update_noise_params(state, y, priors, rng);
    }
    return state;
}

FitResult fit_hidden_potts(const ObservedImage& y, std::int32_t k, const UniformPrior& beta_prior,
                           const NoisePriors& noise_priors, const SummaryGenerator& gen,
                           const HiddenFitConfig& config) {
    using clock = std::chrono::steady_clock;
    const auto ms_between = [](clock::time_point a, clock::time_point b) {
        return std::chrono::duration<double, std::milli>(b - a).count();
    };
    config.smc.validate();
    const auto t_start = clock::now();

    Rng chain_rng = make_rng(config.smc.seed, stream::aux_chain);
    Rng run_rng = make_rng(config.smc.seed, stream::smc_resample);

    AuxChainState state =
        init_at_beta0(y, k, noise_priors, config.init_sweeps, chain_rng, config.smc.threads);
    const auto t_init = clock::now();

    ParticleSystem system =
        initialize(beta_prior, gen, static_cast<double>(state.s_current()), config.smc);

    FitResult result{std::move(system), {}, {}, state.z(), state.noise(),
                     StopReason::MaxIterations, {}, 0.0, 0.0, 0.0, 0.0};
    result.init_ms = ms_between(t_start, t_init);

    for (std::int32_t t = 1; t <= config.smc.max_iterations; ++t) {
        const double eps_prev = result.system.epsilon;
        const auto t_a = clock::now();
        IterationStats stats;
        try {
            stats = smc_iteration(result.system, beta_prior, gen, config.smc, run_rng);
        } catch (const ToleranceTooTight&) {
            // the moving target has outrun the tolerance; stop rather than
            // widen epsilon
            result.stop = StopReason::ToleranceTooTight;
            break;
        }
        const auto t_b = clock::now();
        result.smc_ms += ms_between(t_a, t_b);

        refresh_chain(state, y, result.system, config.sweeps_per_iteration, noise_priors, chain_rng,
                      config.smc.threads);
        result.system.s_obs = static_cast<double>(state.s_current());
        result.chain_ms += ms_between(t_b, clock::now());

        result.trace.push_back(stats);
        result.noise_trace.push_back(NoiseTraceRow{t, state.noise()});
        if (config.plateau_reference &&
            static_cast<double>(state.s_current()) > *config.plateau_reference)
            result.plateau_warnings.push_back(t);

        if (stats.acceptance_rate < config.smc.min_acceptance_rate) {
            result.stop = StopReason::AcceptanceRate;
            break;
        }
        if (eps_prev > 0.0 &&
            (eps_prev - stats.epsilon) / eps_prev < config.smc.min_rel_eps_change) {
            result.stop = StopReason::EpsilonStalled;
            break;
        }
    }
    result.labels = state.z();
    result.noise = state.noise();
    result.total_ms = ms_between(t_start, clock::now());
    return result;
}

}  // namespace potts
