#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <set>

#include "potts/lattice.hpp"
#include "potts/rng.hpp"

using namespace potts;

namespace {

// Independent oracle: S(z) by scanning every ordered pixel pair and testing
// adjacency from coordinates.
std::int64_t brute_force_statistic(const LabelImage& z) {
    const Lattice& lat = z.lattice();
    std::int64_t s = 0;
    for (std::int64_t i = 0; i < lat.pixels(); ++i) {
        for (std::int64_t j = i + 1; j < lat.pixels(); ++j) {
            const std::int64_t ri = i / lat.cols, ci = i % lat.cols;
            const std::int64_t rj = j / lat.cols, cj = j % lat.cols;
            const bool adjacent = (ri == rj && std::abs(ci - cj) == 1) ||
                                  (ci == cj && std::abs(ri - rj) == 1);
            if (adjacent && z.label(i) == z.label(j)) ++s;
        }
    }
    return s;
}

LabelImage random_image(const Lattice& lat, Rng& rng) {
    LabelImage z(lat);
    for (std::int64_t i = 0; i < lat.pixels(); ++i) {
        const auto draw = 1 + static_cast<std::int32_t>(uniform01(rng) * lat.k);
        z.set_label(i, static_cast<std::uint8_t>(std::min(draw, lat.k)));
    }
    return z;
}

}  // namespace

TEST_CASE("lattice construction validates its invariants") {
    CHECK_THROWS_AS(Lattice(0, 3, 2), std::invalid_argument);
    CHECK_THROWS_AS(Lattice(3, 0, 2), std::invalid_argument);
    CHECK_THROWS_AS(Lattice(3, 3, 1), std::invalid_argument);
    const Lattice lat(3, 4, 2);
    CHECK(lat.pixels() == 12);
}

TEST_CASE("neighbors: interior, corner, and 1-d chain") {
    const Lattice lat(3, 3, 2);
    CHECK(neighbors(lat, 4).count == 4);  // center
    CHECK(neighbors(lat, 0).count == 2);  // corner
    CHECK(neighbors(lat, 8).count == 2);  // opposite corner

    const Lattice chain(1, 5, 2);
    const auto nb = neighbors(chain, 2);
    REQUIRE(nb.count == 2);
    std::set<std::int64_t> got(nb.begin(), nb.end());
    CHECK(got == std::set<std::int64_t>{1, 3});

    CHECK_THROWS_AS(neighbors(lat, -1), std::invalid_argument);
    CHECK_THROWS_AS(neighbors(lat, 9), std::invalid_argument);
}

TEST_CASE("neighbors relation is symmetric") {
    for (const auto& dims : {std::pair{1, 7}, {4, 4}, {5, 3}}) {
        const Lattice lat(dims.first, dims.second, 3);
        for (std::int64_t i = 0; i < lat.pixels(); ++i) {
            for (std::int64_t j : neighbors(lat, i)) {
                const auto back = neighbors(lat, j);
                CHECK(std::find(back.begin(), back.end(), i) != back.end());
            }
        }
    }
}

TEST_CASE("edge_count formula and canonical enumeration agree") {
    CHECK(Lattice(2, 2, 2).edge_count() == 4);
    CHECK(Lattice(1, 1, 2).edge_count() == 0);
    CHECK(Lattice(125, 125, 3).edge_count() == 31000);  // 2*125*124

    for (const auto& dims : {std::pair{1, 9}, {2, 5}, {6, 6}, {7, 2}}) {
        const Lattice lat(dims.first, dims.second, 2);
        std::int64_t enumerated = 0;
        for (std::int64_t r = 0; r < lat.rows; ++r)
            for (std::int64_t c = 0; c < lat.cols; ++c) {
                if (c + 1 < lat.cols) ++enumerated;
                if (r + 1 < lat.rows) ++enumerated;
            }
        CHECK(enumerated == lat.edge_count());
    }
}

TEST_CASE("sufficient statistic on hand cases") {
    const Lattice lat22(2, 2, 2);
    CHECK(sufficient_statistic(LabelImage(lat22, 1)) == 4);

    // perfect checkerboard has no like neighbours
    const Lattice lat33(3, 3, 2);
    LabelImage cb(lat33);
    for (std::int64_t i = 0; i < 9; ++i)
        cb.set_label(i, static_cast<std::uint8_t>(1 + ((i / 3 + i % 3) % 2)));
    CHECK(sufficient_statistic(cb) == 0);
}

TEST_CASE("sufficient statistic matches the brute-force pair scan") {
    Rng rng(42);
    const Lattice lat(4, 4, 3);
    for (int rep = 0; rep < 20; ++rep) {
        const LabelImage z = random_image(lat, rng);
        CHECK(sufficient_statistic(z) == brute_force_statistic(z));
    }
}

TEST_CASE("sufficient statistic is invariant under label permutation") {
    Rng rng(9);
    const Lattice lat(5, 4, 3);
    for (int rep = 0; rep < 10; ++rep) {
        const LabelImage z = random_image(lat, rng);
        LabelImage permuted = z;
        // cyclic permutation of the alphabet
        for (std::int64_t i = 0; i < lat.pixels(); ++i)
            permuted.set_label(i, static_cast<std::uint8_t>(1 + (z.label(i) % lat.k)));
        CHECK(sufficient_statistic(z) == sufficient_statistic(permuted));
    }
}

TEST_CASE("local agreement on hand cases") {
    const Lattice lat(3, 3, 2);
    const LabelImage all_ones(lat, 1);
    CHECK(local_agreement(all_ones, 4, 1) == 4);
    CHECK(local_agreement(all_ones, 4, 2) == 0);
}

TEST_CASE("flip deltas from local agreement match full recomputation") {
    Rng rng(123);
    const Lattice lat(4, 4, 3);
    LabelImage z = random_image(lat, rng);
    std::int64_t s = sufficient_statistic(z);
    for (int flip = 0; flip < 200; ++flip) {
        const auto i = static_cast<std::int64_t>(uniform01(rng) * lat.pixels());
        const auto candidate =
            static_cast<std::uint8_t>(1 + static_cast<std::int32_t>(uniform01(rng) * lat.k));
        s += local_agreement(z, i, candidate) - local_agreement(z, i, z.label(i));
        z.set_label(i, candidate);
        CHECK(s == sufficient_statistic(z));
    }
}

TEST_CASE("critical beta values") {
    CHECK(critical_beta(3) == doctest::Approx(1.005).epsilon(1e-3));
    CHECK(critical_beta(6) == doctest::Approx(1.238).epsilon(1e-3));
    CHECK_THROWS_AS(critical_beta(1), std::invalid_argument);
}

TEST_CASE("label image validates its entries") {
    const Lattice lat(2, 2, 2);
    CHECK_THROWS_AS(LabelImage(lat, std::vector<std::uint8_t>{1, 2, 3, 1}), std::invalid_argument);
    CHECK_THROWS_AS(LabelImage(lat, std::vector<std::uint8_t>{1, 2}), std::invalid_argument);
    CHECK_THROWS_AS(LabelImage(lat, 0), std::invalid_argument);
}

TEST_CASE("observed image requires finite values") {
    CHECK_THROWS_AS(ObservedImage(1, 2, {1.0, std::nan("")}), std::invalid_argument);
    CHECK_THROWS_AS(ObservedImage(1, 2, {1.0}), std::invalid_argument);
}
