#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "potts/lattice.hpp"
#include "potts/rng.hpp"
#include "potts/samplers.hpp"

namespace potts {

enum class GridMode { TruncatedNormal, Regular, Explicit };

// Design of the beta grid for binding-function estimation. The truncated
// normal centered on the critical point concentrates effort where the
// statistic changes fastest.
struct GridSpec {
    std::int32_t count = 1000;
    GridMode mode = GridMode::TruncatedNormal;
    double center = 0.0;  // truncated-normal location
    double spread = 0.0;  // truncated-normal scale
    double lower = 0.0;
    double upper = 0.0;
    std::vector<double> points;  // Explicit mode only

    static GridSpec truncated_normal(std::int32_t count, std::int32_t k);
    static GridSpec regular(std::int32_t count, double lower, double upper);
    static GridSpec explicit_points(std::vector<double> points);

    void validate() const;
};

// Strictly increasing beta values in [lower, upper]; duplicate draws are
// nudged apart. Truncated-normal mode redraws anything outside the bounds.
std::vector<double> sample_grid(const GridSpec& spec, Rng& rng);

struct BindingMeta {
    std::int32_t rows = 0;
    std::int32_t cols = 0;
    std::int32_t k = 0;
    std::int64_t m_retained = 0;
    std::int64_t burn_in = 0;
    std::uint64_t seed = 0;
    // Optional provenance note. Left empty by build_table so that table
    // files are byte-identical for identical inputs; round-trips when set.
    std::string created;

    bool operator==(const BindingMeta&) const = default;

    std::int64_t edge_count() const {
        return std::int64_t{rows} * (cols - 1) + std::int64_t{cols} * (rows - 1);
    }
};

struct BindingEntry {
    double beta = 0.0;
    double mu = 0.0;
    double sd = 0.0;

    bool operator==(const BindingEntry&) const = default;
};

// Precomputed binding function: beta -> (mu(beta), sd(beta)) on a sorted
// grid, with provenance metadata. Immutable once built.
struct BindingTable {
    std::vector<BindingEntry> entries;  // strictly increasing beta
    BindingMeta meta;

    bool operator==(const BindingTable&) const = default;

    void validate() const;
};

// Sample mean and sd (divisor M-1) of the retained Swendsen-Wang trace.
MomentPair estimate_point(double beta, const Lattice& lat, const SimulationConfig& config);

// Estimates every grid point; point i runs on its own rng stream
// derive_seed(seed, binding_point, i), so results are identical for any
// thread count. config.seed is ignored in favour of `seed`.
BindingTable build_table(const GridSpec& spec, const Lattice& lat, const SimulationConfig& config,
                         std::uint64_t seed, int threads = 1);

// Gaussian-kernel local-linear smoothing of the mu and sd columns over
// beta, then an isotonic (non-decreasing) projection of the mu column.
BindingTable smooth_table(const BindingTable& table, double bandwidth);

// 1.5x the median grid spacing.
double default_bandwidth(const BindingTable& table);

// Piecewise-linear interpolation, clamped to the endpoints outside the
// grid. sd is floored at 1e-8 * |E| so the synthetic likelihood stays
// proper.
MomentPair query(const BindingTable& table, double beta);

// Text persistence: '#'-prefixed metadata header then "beta mu sd" rows.
// Lossless round-trip.
void save_table(const BindingTable& table, const std::filesystem::path& path);
BindingTable load_table(const std::filesystem::path& path);

}  // namespace potts
