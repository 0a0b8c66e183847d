#pragma once

#include <cmath>
#include <cstddef>
#include <string>

#include "condensity/error.hpp"

namespace condensity {

// Kernel scale. The target axis is min-max scaled to [0, 1], so bandwidths
// above 1 are rejected outright.
class Bandwidth {
public:
    explicit Bandwidth(double h) : h_(h) {
        if (!(h > 0.0) || !(h <= 1.0) || !std::isfinite(h))
            throw ConfigError("bandwidth must satisfy 0 < h <= 1, got " + std::to_string(h));
    }

    double value() const { return h_; }

    bool operator==(const Bandwidth& other) const = default;

private:
    double h_;
};

// Density of the centered Gaussian with standard deviation h, evaluated at t.
inline double kernel_eval(double t, Bandwidth h) {
    constexpr double inv_sqrt_two_pi = 0.3989422804014326779399460599344;
    const double u = t / h.value();
    return inv_sqrt_two_pi / h.value() * std::exp(-0.5 * u * u);
}

// Trapezoidal estimate of the kernel mass on [lo, hi].
inline double kernel_mass(Bandwidth h, double lo, double hi, std::size_t n_points) {
    if (!(lo < hi)) throw ConfigError("kernel_mass: require lo < hi");
    if (n_points < 2) throw ConfigError("kernel_mass: require n_points >= 2");
    const double step = (hi - lo) / static_cast<double>(n_points - 1);
    double acc = 0.0;
    double prev = kernel_eval(lo, h);
    for (std::size_t i = 1; i < n_points; ++i) {
        const double t = (i + 1 == n_points) ? hi : lo + step * static_cast<double>(i);
        const double cur = kernel_eval(t, h);
        acc += 0.5 * (prev + cur) * step;
        prev = cur;
    }
    return acc;
}

} // namespace condensity
