#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "condensity/core.hpp"
#include "condensity/error.hpp"

namespace condensity {

// Standard trapezoidal rule. Summation is sequential left-to-right; on a
// grid built by uniform_grid the partial sums telescope exactly, so constant
// integrands integrate without rounding error.
inline double trapezoid(std::span<const double> values, std::span<const double> grid) {
    if (values.size() != grid.size())
        throw ConfigError("trapezoid: values and grid lengths differ");
    if (grid.size() < 2) throw ConfigError("trapezoid: need at least 2 points");
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
        const double dg = grid[i + 1] - grid[i];
        if (!(dg > 0.0)) throw ConfigError("trapezoid: grid must be strictly increasing");
        acc += dg * (0.5 * (values[i] + values[i + 1]));
    }
    return acc;
}

// n equidistant points on [0, 1], endpoints included.
inline Vector uniform_grid(std::size_t n) {
    if (n < 2) throw ConfigError("uniform_grid: need at least 2 points");
    Vector g(n);
    const double denom = static_cast<double>(n - 1);
    for (std::size_t i = 0; i < n; ++i) g[i] = static_cast<double>(i) / denom;
    return g;
}

// Linear interpolation of (grid, values) at point t; t is clamped to the
// grid range.
inline double interp_linear(std::span<const double> grid, std::span<const double> values, double t) {
    if (t <= grid.front()) return values.front();
    if (t >= grid.back()) return values.back();
    const auto it = std::upper_bound(grid.begin(), grid.end(), t);
    const std::size_t j = static_cast<std::size_t>(it - grid.begin()) - 1;
    const double w = (t - grid[j]) / (grid[j + 1] - grid[j]);
    return values[j] + w * (values[j + 1] - values[j]);
}

// A conditional density evaluated on a grid over the scaled target axis.
struct DensityCurve {
    Vector grid;   // strictly increasing, within [0, 1]
    Vector values; // nonnegative, unit trapezoidal mass

    void validate() const {
        if (grid.size() != values.size() || grid.size() < 2)
            throw ConfigError("density curve: grid/value size mismatch");
        if (grid.front() < 0.0 || grid.back() > 1.0)
            throw ConfigError("density curve: grid must lie in [0, 1]");
        for (double v : values)
            if (!(v >= 0.0)) throw ConfigError("density curve: negative value");
        const double mass = trapezoid(values, grid);
        if (std::abs(mass - 1.0) > 1e-9)
            throw ConfigError("density curve: trapezoidal mass " + std::to_string(mass) + " != 1");
    }
};

// Inverts the trapezoidal CDF of (grid, values) at probability p by monotone
// piecewise-linear interpolation between the CDF knots.
inline double quantile_from_density(std::span<const double> grid, std::span<const double> values,
                                    double p) {
    if (!(p > 0.0 && p < 1.0)) throw ConfigError("quantile: p must be in (0, 1)");
    const std::size_t n = grid.size();
    if (n != values.size() || n < 2) throw ConfigError("quantile: bad curve");
    Vector cdf(n, 0.0);
    for (std::size_t i = 0; i + 1 < n; ++i)
        cdf[i + 1] = cdf[i] + (grid[i + 1] - grid[i]) * 0.5 * (values[i] + values[i + 1]);
    const double total = cdf[n - 1];
    if (!(total > 0.0)) throw ConfigError("quantile: zero-mass curve");
    const double target = p * total;
    for (std::size_t i = 0; i + 1 < n; ++i) {
        if (cdf[i + 1] >= target) {
            const double seg = cdf[i + 1] - cdf[i];
            if (seg <= 0.0) return grid[i];
            const double w = (target - cdf[i]) / seg;
            return grid[i] + w * (grid[i + 1] - grid[i]);
        }
    }
    return grid[n - 1];
}

struct DensitySummaries {
    double mode = 0.0;        // grid point of maximum density, lowest index on ties
    double tail_width = 0.0;  // d9 - d1
    double bowley_skew = 0.0; // ((d9 - m) - (m - d1)) / (d9 - d1)
};

inline DensitySummaries summarize_density(std::span<const double> grid,
                                          std::span<const double> values) {
    if (grid.size() != values.size() || grid.size() < 2)
        throw ConfigError("summaries: bad curve");
    std::size_t arg = 0;
    for (std::size_t i = 1; i < values.size(); ++i)
        if (values[i] > values[arg]) arg = i;
    const double d1 = quantile_from_density(grid, values, 0.1);
    const double m = quantile_from_density(grid, values, 0.5);
    const double d9 = quantile_from_density(grid, values, 0.9);
    DensitySummaries s;
    s.mode = grid[arg];
    s.tail_width = d9 - d1;
    s.bowley_skew = ((d9 - m) - (m - d1)) / (d9 - d1);
    return s;
}

inline double density_quantile(const DensityCurve& curve, double p) {
    return quantile_from_density(curve.grid, curve.values, p);
}

inline DensitySummaries density_summaries(const DensityCurve& curve) {
    return summarize_density(curve.grid, curve.values);
}

} // namespace condensity
