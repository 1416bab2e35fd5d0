#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

namespace potts {

template <class T>
double mean_of(std::span<const T> xs) {
    if (xs.empty()) throw std::invalid_argument("mean of empty sequence");
    double s = 0.0;
    for (T x : xs) s += static_cast<double>(x);
    return s / static_cast<double>(xs.size());
}

// Sample standard deviation, divisor n-1.
template <class T>
double sample_sd(std::span<const T> xs) {
    if (xs.size() < 2) throw std::invalid_argument("sample sd needs at least two values");
    const double m = mean_of(xs);
    double ss = 0.0;
    for (T x : xs) {
        const double d = static_cast<double>(x) - m;
        ss += d * d;
    }
    return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

inline double weighted_mean(std::span<const double> xs, std::span<const double> ws) {
    double sw = 0.0, sx = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sw += ws[i];
        sx += ws[i] * xs[i];
    }
    if (sw <= 0.0) throw std::invalid_argument("weighted mean with non-positive total weight");
    return sx / sw;
}

inline double weighted_variance(std::span<const double> xs, std::span<const double> ws) {
    const double m = weighted_mean(xs, ws);
    double sw = 0.0, sv = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double d = xs[i] - m;
        sw += ws[i];
        sv += ws[i] * d * d;
    }
    return sv / sw;
}

// q-quantile of a weighted sample: smallest x whose cumulative normalized
// weight reaches q.
inline double weighted_quantile(std::span<const double> xs, std::span<const double> ws, double q) {
    if (xs.empty() || xs.size() != ws.size()) throw std::invalid_argument("bad weighted sample");
    std::vector<std::size_t> order(xs.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
    double total = 0.0;
    for (double w : ws) total += w;
    const double target = q * total;
    double acc = 0.0;
    for (std::size_t j : order) {
        acc += ws[j];
        if (acc >= target) return xs[j];
    }
    return xs[order.back()];
}

}  // namespace potts
