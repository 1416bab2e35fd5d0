#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace potts {

// Rectangular first-order (von Neumann) lattice carrying the label alphabet
// size k. Edges are the unique horizontal and vertical neighbour pairs.
struct Lattice {
    std::int32_t rows = 0;
    std::int32_t cols = 0;
    std::int32_t k = 0;

    Lattice(std::int32_t rows_, std::int32_t cols_, std::int32_t k_);

    std::int64_t pixels() const { return std::int64_t{rows} * cols; }
    std::int64_t edge_count() const {
        return std::int64_t{rows} * (cols - 1) + std::int64_t{cols} * (rows - 1);
    }

    bool operator==(const Lattice&) const = default;
};

struct NeighborList {
    std::array<std::int64_t, 4> idx{};
    std::int32_t count = 0;

    const std::int64_t* begin() const { return idx.data(); }
    const std::int64_t* end() const { return idx.data() + count; }
};

// First-order neighbours of pixel i (row-major). Boundary pixels get fewer
// than four; the relation is symmetric.
NeighborList neighbors(const Lattice& lat, std::int64_t i);

// Label field z over a lattice; labels are 1-based in {1..k}, row-major.
class LabelImage {
public:
    explicit LabelImage(Lattice lat, std::uint8_t fill = 1);
    LabelImage(Lattice lat, std::vector<std::uint8_t> labels);

    const Lattice& lattice() const { return lat_; }
    std::uint8_t label(std::int64_t i) const { return labels_[static_cast<std::size_t>(i)]; }
    void set_label(std::int64_t i, std::uint8_t v) { labels_[static_cast<std::size_t>(i)] = v; }
    std::span<const std::uint8_t> labels() const { return labels_; }

    bool operator==(const LabelImage&) const = default;

private:
    Lattice lat_;
    std::vector<std::uint8_t> labels_;
};

// Real-valued pixel intensities (no label alphabet attached).
struct ObservedImage {
    std::int32_t rows = 0;
    std::int32_t cols = 0;
    std::vector<double> values;

    ObservedImage(std::int32_t rows_, std::int32_t cols_, std::vector<double> values_);

    std::int64_t pixels() const { return std::int64_t{rows} * cols; }
};

// S(z): number of like-labelled edges, in {0, ..., edge_count}. Edges are
// enumerated on demand by a right/down sweep; the edge set is never stored.
std::int64_t sufficient_statistic(const LabelImage& z);

// Number of neighbours of pixel i currently sharing `candidate`. Flipping
// z_i to c changes S by local_agreement(i, c) - local_agreement(i, z_i).
std::int32_t local_agreement(const LabelImage& z, std::int64_t i, std::uint8_t candidate);

// log(1 + sqrt(k)): the order/disorder transition point of the 2-D model.
double critical_beta(std::int32_t k);

}  // namespace potts
