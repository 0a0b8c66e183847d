#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <string>

#include "condensity/core.hpp"
#include "condensity/density.hpp"
#include "condensity/error.hpp"
#include "condensity/kernel.hpp"
#include "condensity/rng.hpp"

namespace condensity {

// Synthetic data-generating mechanisms. Covariates are i.i.d. standard
// normal; the second parameter of each conditional Gaussian is a variance.
enum class Mechanism { Illustration2D, SingleRelevant, Manifold, NonSparse };

struct MechanismSpec {
    Mechanism variant = Mechanism::SingleRelevant;

    std::size_t covariate_dim() const {
        return variant == Mechanism::Illustration2D ? 1 : 20;
    }

    std::string name() const {
        switch (variant) {
            case Mechanism::Illustration2D: return "illustration2d";
            case Mechanism::SingleRelevant: return "single_relevant";
            case Mechanism::Manifold: return "manifold";
            case Mechanism::NonSparse: return "non_sparse";
        }
        throw ConfigError("unknown mechanism");
    }

    static MechanismSpec parse(const std::string& name) {
        if (name == "illustration2d") return {Mechanism::Illustration2D};
        if (name == "single_relevant") return {Mechanism::SingleRelevant};
        if (name == "manifold") return {Mechanism::Manifold};
        if (name == "non_sparse") return {Mechanism::NonSparse};
        throw ConfigError("unknown mechanism '" + name +
                          "' (expected illustration2d|single_relevant|manifold|non_sparse)");
    }
};

struct ConditionalLaw {
    double mean = 0.0;
    double variance = 1.0;
};

// Angle between the first two covariates, mapped into [0, 2pi).
inline double manifold_angle(double x1, double x2) {
    double theta = std::atan2(x2, x1);
    if (theta < 0.0) theta += 6.283185307179586476925286766559;
    return theta;
}

inline ConditionalLaw conditional_law(const MechanismSpec& mech, std::span<const double> x) {
    if (x.size() != mech.covariate_dim())
        throw ConfigError("conditional_law: covariate width mismatch");
    switch (mech.variant) {
        case Mechanism::Illustration2D:
        case Mechanism::SingleRelevant:
            return {x[0], 0.25 + x[0] * x[0]};
        case Mechanism::Manifold:
            return {manifold_angle(x[0], x[1]), 0.5};
        case Mechanism::NonSparse: {
            double mean = 0.0;
            for (double v : x) mean += v;
            return {mean / static_cast<double>(x.size()), 0.5};
        }
    }
    throw ConfigError("unknown mechanism");
}

inline double gaussian_pdf(double y, double mean, double variance) {
    constexpr double inv_sqrt_two_pi = 0.3989422804014326779399460599344;
    const double sd = std::sqrt(variance);
    const double u = (y - mean) / sd;
    return inv_sqrt_two_pi / sd * std::exp(-0.5 * u * u);
}

// Draws n observations; each observation i uses substream(seed, i), so the
// dataset is deterministic per seed and independent of evaluation order.
inline RawDataset sample(const MechanismSpec& mech, std::size_t n, std::uint64_t seed) {
    if (n < 1) throw ConfigError("sample: n must be >= 1");
    const std::size_t d = mech.covariate_dim();
    RawDataset data;
    data.x = Matrix(n, d);
    data.y.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        SplitMix64 rng = substream(seed, i);
        auto row = data.x.row(i);
        for (std::size_t j = 0; j < d; ++j) row[j] = rng.normal();
        const ConditionalLaw law = conditional_law(mech, row);
        data.y[i] = law.mean + std::sqrt(law.variance) * rng.normal();
    }
    return data;
}

// True conditional density of y given x, in original units.
inline double true_density(const MechanismSpec& mech, std::span<const double> x, double y) {
    const ConditionalLaw law = conditional_law(mech, x);
    return gaussian_pdf(y, law.mean, law.variance);
}

using UnitDensity = std::function<double(double)>;

// Convolution of a density on [0,1] with the kernel, evaluated at y:
// the smoothed truth targeted by the regression before h goes to zero.
// The density is treated as zero outside [0,1].
inline double smoothed_truth(const UnitDensity& density, double y, Bandwidth h,
                             std::size_t n_quad) {
    if (n_quad < 2) throw ConfigError("smoothed_truth: n_quad must be >= 2");
    const double step = 1.0 / static_cast<double>(n_quad - 1);
    double acc = 0.0;
    double prev = kernel_eval(-y, h) * density(0.0);
    for (std::size_t i = 1; i < n_quad; ++i) {
        const double g = (i + 1 == n_quad) ? 1.0 : step * static_cast<double>(i);
        const double cur = kernel_eval(g - y, h) * density(g);
        acc += 0.5 * (prev + cur) * step;
        prev = cur;
    }
    return acc;
}

// L2 distance on [0,1] between the smoothed truth and the density itself.
inline double l2_gap(const UnitDensity& density, Bandwidth h, std::size_t n_quad) {
    if (n_quad < 2) throw ConfigError("l2_gap: n_quad must be >= 2");
    const double step = 1.0 / static_cast<double>(n_quad - 1);
    auto sq_diff = [&](double y) {
        const double diff = smoothed_truth(density, y, h, n_quad) - density(y);
        return diff * diff;
    };
    double acc = 0.0;
    double prev = sq_diff(0.0);
    for (std::size_t i = 1; i < n_quad; ++i) {
        const double y = (i + 1 == n_quad) ? 1.0 : step * static_cast<double>(i);
        const double cur = sq_diff(y);
        acc += 0.5 * (prev + cur) * step;
        prev = cur;
    }
    return std::sqrt(acc);
}

} // namespace condensity
