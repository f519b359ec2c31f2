#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "roughmag/errors.hpp"
#include "roughmag/grid.hpp"

namespace roughmag {

// Pairwise (cascade) summation; the reduction order is fixed by the data
// layout, so aggregates do not depend on worker count.
inline double pairwise_sum(std::span<const double> xs) {
    if (xs.size() <= 8) {
        double acc = 0.0;
        for (double x : xs) acc += x;
        return acc;
    }
    const std::size_t half = xs.size() / 2;
    return pairwise_sum(xs.first(half)) + pairwise_sum(xs.subspan(half));
}

struct MeanSE {
    double mean = 0.0;
    double se = 0.0;
    std::size_t n = 0;
};

inline MeanSE mean_se(std::span<const double> xs) {
    MeanSE out;
    out.n = xs.size();
    if (out.n == 0) return out;
    out.mean = pairwise_sum(xs) / static_cast<double>(out.n);
    if (out.n < 2) return out;
    std::vector<double> sq(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double d = xs[i] - out.mean;
        sq[i] = d * d;
    }
    const double var = pairwise_sum(sq) / static_cast<double>(out.n - 1);
    out.se = std::sqrt(var / static_cast<double>(out.n));
    return out;
}

// Ordinary least-squares slope of y against x.
inline double ls_slope(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) throw InsufficientData("ls_slope: need >= 2 points");
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    if (sxx == 0.0) throw InsufficientData("ls_slope: degenerate abscissae");
    return sxy / sxx;
}

// Total variation of a vector path over its grid (Euclidean step norms).
inline double variation_1(const GridPath& z) {
    double acc = 0.0;
    for (std::size_t k = 0; k < z.steps(); ++k) {
        double s = 0.0;
        for (int i = 0; i < z.dim; ++i) {
            const double d = z.value(k + 1, i) - z.value(k, i);
            s += d * d;
        }
        acc += std::sqrt(s);
    }
    return acc;
}

// Exact p-variation over the grid nodes by dynamic programming, O(N^2).
inline double variation_p(const GridPath& z, double p) {
    if (!(p >= 1.0)) throw NumericalError("variation_p: need p >= 1");
    const std::size_t nodes = z.nodes();
    std::vector<double> best(nodes, 0.0);
    for (std::size_t j = 1; j < nodes; ++j) {
        double b = 0.0;
        for (std::size_t i = 0; i < j; ++i) {
            double s = 0.0;
            for (int c = 0; c < z.dim; ++c) {
                const double d = z.value(j, c) - z.value(i, c);
                s += d * d;
            }
            b = std::max(b, best[i] + std::pow(std::sqrt(s), p));
        }
        best[j] = b;
    }
    return std::pow(best[nodes - 1], 1.0 / p);
}

}  // namespace roughmag
