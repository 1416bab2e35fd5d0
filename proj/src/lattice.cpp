#include "potts/lattice.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace potts {

Lattice::Lattice(std::int32_t rows_, std::int32_t cols_, std::int32_t k_)
    : rows(rows_), cols(cols_), k(k_) {
    if (rows < 1 || cols < 1) throw std::invalid_argument("lattice dimensions must be positive");
    if (k < 2) throw std::invalid_argument("label count k must be at least 2");
    if (k > 255) throw std::invalid_argument("label count k must fit in a byte");
}

NeighborList neighbors(const Lattice& lat, std::int64_t i) {
    if (i < 0 || i >= lat.pixels()) throw std::invalid_argument("pixel index out of range");
    const std::int64_t r = i / lat.cols;
    const std::int64_t c = i % lat.cols;
    NeighborList out;
    if (r > 0) out.idx[out.count++] = i - lat.cols;
    if (c > 0) out.idx[out.count++] = i - 1;
    if (c + 1 < lat.cols) out.idx[out.count++] = i + 1;
    if (r + 1 < lat.rows) out.idx[out.count++] = i + lat.cols;
    return out;
}

LabelImage::LabelImage(Lattice lat, std::uint8_t fill)
    : lat_(lat), labels_(static_cast<std::size_t>(lat.pixels()), fill) {
    if (fill < 1 || fill > lat_.k) throw std::invalid_argument("fill label outside {1..k}");
}

LabelImage::LabelImage(Lattice lat, std::vector<std::uint8_t> labels)
    : lat_(lat), labels_(std::move(labels)) {
    if (std::ssize(labels_) != lat_.pixels())
        throw std::invalid_argument("label vector length does not match lattice");
    for (std::uint8_t v : labels_)
        if (v < 1 || v > lat_.k) throw std::invalid_argument("label outside {1..k}");
}

ObservedImage::ObservedImage(std::int32_t rows_, std::int32_t cols_, std::vector<double> values_)
    : rows(rows_), cols(cols_), values(std::move(values_)) {
    if (rows < 1 || cols < 1) throw std::invalid_argument("image dimensions must be positive");
    if (std::ssize(values) != pixels())
        throw std::invalid_argument("value vector length does not match dimensions");
    for (double v : values)
        if (!std::isfinite(v)) throw std::invalid_argument("observed values must be finite");
}

std::int64_t sufficient_statistic(const LabelImage& z) {
    const Lattice& lat = z.lattice();
    std::int64_t s = 0;
    for (std::int64_t r = 0; r < lat.rows; ++r) {
        for (std::int64_t c = 0; c < lat.cols; ++c) {
            const std::int64_t i = r * lat.cols + c;
            if (c + 1 < lat.cols && z.label(i) == z.label(i + 1)) ++s;
            if (r + 1 < lat.rows && z.label(i) == z.label(i + lat.cols)) ++s;
        }
    }
    return s;
}

std::int32_t local_agreement(const LabelImage& z, std::int64_t i, std::uint8_t candidate) {
    std::int32_t a = 0;
    for (std::int64_t j : neighbors(z.lattice(), i))
        if (z.label(j) == candidate) ++a;
    return a;
}

double critical_beta(std::int32_t k) {
    if (k < 2) throw std::invalid_argument("critical_beta requires k >= 2");
    return std::log(1.0 + std::sqrt(static_cast<double>(k)));
}

}  // namespace potts
