#include "potts/samplers.hpp"

#include <algorithm>
#include <cmath>

#include "potts/union_find.hpp"

namespace potts {

SimulationConfig::SimulationConfig(std::int64_t total, std::int64_t burn, std::uint64_t seed_)
    : total_iterations(total), burn_in(burn), seed(seed_) {
    if (total_iterations < 1) throw std::invalid_argument("total_iterations must be positive");
    if (burn_in < 0 || burn_in >= total_iterations)
        throw std::invalid_argument("burn_in must lie in [0, total_iterations)");
}

std::vector<double> gibbs_distribution_from_counts(std::span<const std::int32_t> counts, double beta) {
    if (counts.empty()) throw std::invalid_argument("empty agreement vector");
    std::int32_t cmax = counts[0];
    for (std::int32_t c : counts) cmax = std::max(cmax, c);
    std::vector<double> p(counts.size());
    double total = 0.0;
    for (std::size_t j = 0; j < counts.size(); ++j) {
        p[j] = std::exp(beta * static_cast<double>(counts[j] - cmax));
        total += p[j];
    }
    for (double& v : p) v /= total;
    return p;
}

std::vector<double> gibbs_site_distribution(const LabelImage& z, std::int64_t i, double beta) {
    const std::int32_t k = z.lattice().k;
    std::vector<std::int32_t> counts(static_cast<std::size_t>(k), 0);
    for (std::int64_t j : neighbors(z.lattice(), i)) ++counts[static_cast<std::size_t>(z.label(j) - 1)];
    return gibbs_distribution_from_counts(counts, beta);
}

namespace {

// Per-site conditional draw with a shared exp(beta * (a - 4)) table; one
// uniform per site.
inline std::uint8_t draw_site_label(const LabelImage& z, const Lattice& lat, std::int64_t i,
                                    const double* wexp, double u) {
    std::int32_t counts[256];
    for (std::int32_t j = 0; j < lat.k; ++j) counts[j] = 0;
    const std::int64_t r = i / lat.cols;
    const std::int64_t c = i % lat.cols;
    if (r > 0) ++counts[z.label(i - lat.cols) - 1];
    if (c > 0) ++counts[z.label(i - 1) - 1];
    if (c + 1 < lat.cols) ++counts[z.label(i + 1) - 1];
    if (r + 1 < lat.rows) ++counts[z.label(i + lat.cols) - 1];
    double total = 0.0;
    for (std::int32_t j = 0; j < lat.k; ++j) total += wexp[counts[j]];
    double acc = 0.0;
    const double target = u * total;
    for (std::int32_t j = 0; j + 1 < lat.k; ++j) {
        acc += wexp[counts[j]];
        if (target < acc) return static_cast<std::uint8_t>(j + 1);
    }
    return static_cast<std::uint8_t>(lat.k);
}

}  // namespace

void gibbs_sweep(LabelImage& z, double beta, Rng& rng) {
    if (beta < 0.0) throw std::invalid_argument("beta must be non-negative");
    const Lattice& lat = z.lattice();
    double wexp[5];
    for (int a = 0; a <= 4; ++a) wexp[a] = std::exp(beta * (a - 4.0));
    for (std::int64_t i = 0; i < lat.pixels(); ++i)
        z.set_label(i, draw_site_label(z, lat, i, wexp, uniform01(rng)));
}

void swendsen_wang_step(LabelImage& z, double beta, Rng& rng) {
    if (beta < 0.0) throw std::invalid_argument("beta must be non-negative");
    const Lattice& lat = z.lattice();
    const std::int64_t n = lat.pixels();
    const double open_prob = 1.0 - std::exp(-beta);
    UnionFind uf(n);
    // canonical right/down edge sweep
    for (std::int64_t r = 0; r < lat.rows; ++r) {
        for (std::int64_t c = 0; c < lat.cols; ++c) {
            const std::int64_t i = r * lat.cols + c;
            if (c + 1 < lat.cols && z.label(i) == z.label(i + 1) && uniform01(rng) < open_prob)
                uf.unite(i, i + 1);
            if (r + 1 < lat.rows && z.label(i) == z.label(i + lat.cols) && uniform01(rng) < open_prob)
                uf.unite(i, i + lat.cols);
        }
    }
    // fresh uniform label per cluster, drawn at first root encounter so the
    // rng stream does not depend on traversal details
    std::vector<std::uint8_t> cluster_label(static_cast<std::size_t>(n), 0);
    for (std::int64_t i = 0; i < n; ++i) {
        const std::int64_t root = uf.find(i);
        std::uint8_t& lbl = cluster_label[static_cast<std::size_t>(root)];
        if (lbl == 0) {
            const auto draw = 1 + static_cast<std::int32_t>(uniform01(rng) * lat.k);
            lbl = static_cast<std::uint8_t>(std::min(draw, lat.k));
        }
        z.set_label(i, lbl);
    }
}

void randomize_labels(LabelImage& z, Rng& rng) {
    const std::int32_t k = z.lattice().k;
    for (std::int64_t i = 0; i < z.lattice().pixels(); ++i) {
        const auto draw = 1 + static_cast<std::int32_t>(uniform01(rng) * k);
        z.set_label(i, static_cast<std::uint8_t>(std::min(draw, k)));
    }
}

std::vector<std::int64_t> simulate_summary_trace(const Lattice& lat, double beta,
                                                 const SimulationConfig& config) {
    SimulationConfig checked(config.total_iterations, config.burn_in, config.seed);
    Rng rng(checked.seed);
    LabelImage z(lat);
    randomize_labels(z, rng);
    std::vector<std::int64_t> trace;
    trace.reserve(static_cast<std::size_t>(checked.retained()));
    for (std::int64_t it = 0; it < checked.total_iterations; ++it) {
        swendsen_wang_step(z, beta, rng);
        if (it >= checked.burn_in) trace.push_back(sufficient_statistic(z));
    }
    return trace;
}

std::vector<std::uint64_t> exact_state_histogram(const Lattice& lat) {
    const std::int64_t n = lat.pixels();
    double states = 1.0;
    for (std::int64_t i = 0; i < n; ++i) {
        states *= lat.k;
        if (states > static_cast<double>(kOracleStateBudget))
            throw OracleInfeasible("state space exceeds enumeration budget (k^n > 2^26)");
    }
    const std::int64_t edges = lat.edge_count();
    std::vector<std::uint64_t> counts(static_cast<std::size_t>(edges + 1), 0);

    // Mixed-radix counter over label assignments with S maintained
    // incrementally across single-digit changes; amortized O(1) updates.
    LabelImage z(lat, 1);
    std::int64_t s = edges;  // all-equal start
    auto change = [&](std::int64_t i, std::uint8_t to) {
        s += local_agreement(z, i, to) - local_agreement(z, i, z.label(i));
        z.set_label(i, to);
    };
    for (;;) {
        ++counts[static_cast<std::size_t>(s)];
        std::int64_t pos = 0;
        while (pos < n && z.label(pos) == lat.k) {
            change(pos, 1);
            ++pos;
        }
        if (pos == n) break;
        change(pos, static_cast<std::uint8_t>(z.label(pos) + 1));
    }
    return counts;
}

MomentPair moments_from_histogram(std::span<const std::uint64_t> counts, double beta) {
    const std::int64_t smax = std::ssize(counts) - 1;
    double z = 0.0, m1 = 0.0, m2 = 0.0;
    for (std::int64_t s = 0; s <= smax; ++s) {
        const double c = static_cast<double>(counts[static_cast<std::size_t>(s)]);
        if (c == 0.0) continue;
        const double w = c * std::exp(beta * static_cast<double>(s - smax));
        z += w;
        m1 += w * static_cast<double>(s);
        m2 += w * static_cast<double>(s) * static_cast<double>(s);
    }
    const double mean = m1 / z;
    const double var = std::max(0.0, m2 / z - mean * mean);
    return MomentPair{mean, std::sqrt(var)};
}

MomentPair exact_moments(const Lattice& lat, double beta) {
    const auto counts = exact_state_histogram(lat);
    return moments_from_histogram(counts, beta);
}

MomentPair binomial_moments_beta0(const Lattice& lat) {
    const double e = static_cast<double>(lat.edge_count());
    const double p = 1.0 / static_cast<double>(lat.k);
    return MomentPair{e * p, std::sqrt(e * p * (1.0 - p))};
}

}  // namespace potts
