#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "condensity/core.hpp"
#include "condensity/error.hpp"
#include "condensity/kernel.hpp"
#include "condensity/rng.hpp"

namespace condensity {

// Standard deviations are floored so constant columns stay usable.
inline constexpr double kStdFloor = 1e-12;

// Scaling state learned on the training split: min-max range of the target
// plus standardization statistics for the stacked feature columns and for
// the kernel targets.
struct ScalerState {
    double y_min = 0.0;
    double y_max = 1.0;
    Vector feature_means; // length d + 1
    Vector feature_stds;  // length d + 1, each >= kStdFloor
    double target_mean = 0.0;
    double target_std = 1.0;

    double y_range() const { return y_max - y_min; }
};

inline std::pair<double, double> minmax_fit(std::span<const double> y) {
    if (y.empty()) throw DataError("minmax_fit: empty target vector");
    double lo = y[0], hi = y[0];
    for (double v : y) {
        if (!std::isfinite(v)) throw DataError("minmax_fit: non-finite target value");
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    if (!(hi > lo)) throw DegenerateTarget("minmax_fit: target is constant (" + std::to_string(lo) + ")");
    return {lo, hi};
}

// (y - y_min) / (y_max - y_min); with clip, results are clamped into [0, 1]
// (used for validation/test targets outside the training range).
inline Vector minmax_apply(std::span<const double> y, const ScalerState& state, bool clip) {
    const double range = state.y_range();
    Vector out(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
        double v = (y[i] - state.y_min) / range;
        if (clip) v = std::clamp(v, 0.0, 1.0);
        out[i] = v;
    }
    return out;
}

inline Vector minmax_invert(std::span<const double> y01, const ScalerState& state) {
    Vector out(y01.size());
    for (std::size_t i = 0; i < y01.size(); ++i)
        out[i] = state.y_min + y01[i] * state.y_range();
    return out;
}

// Mean and population standard deviation (floored) of a single column.
inline std::pair<double, double> standardize_fit(std::span<const double> values) {
    if (values.empty()) throw DataError("standardize_fit: empty input");
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    var /= static_cast<double>(values.size());
    return {mean, std::max(std::sqrt(var), kStdFloor)};
}

// Column-wise variant for a feature matrix.
inline std::pair<Vector, Vector> standardize_fit_columns(const Matrix& features) {
    if (features.empty()) throw DataError("standardize_fit: empty matrix");
    const std::size_t n = features.rows(), d = features.cols();
    Vector means(d, 0.0), stds(d, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) means[j] += features(i, j);
    for (std::size_t j = 0; j < d; ++j) means[j] /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) {
            const double c = features(i, j) - means[j];
            stds[j] += c * c;
        }
    for (std::size_t j = 0; j < d; ++j)
        stds[j] = std::max(std::sqrt(stds[j] / static_cast<double>(n)), kStdFloor);
    return {means, stds};
}

// The (n*M)-row regression problem: stacked [x_i, y'_im] feature rows and
// kernel targets K_h(y_i - y'_im). Row order is i-major, m-minor.
struct AuxiliaryDesign {
    Matrix features;                     // (n*M) x (d+1); column d holds the auxiliary sample
    Vector targets;                      // n*M kernel evaluations
    std::vector<std::uint32_t> group_index; // row -> source observation
    bool standardized = false;

    std::size_t rows() const { return targets.size(); }
    std::size_t width() const { return features.cols(); }
};

// Draws M auxiliary samples per observation from Unif[0,1] using a
// per-observation substream of `seed`, so the result is independent of any
// parallel schedule over i.
inline AuxiliaryDesign build_design(const Matrix& x, std::span<const double> y_scaled,
                                    std::size_t M, Bandwidth h, std::uint64_t seed) {
    if (M == 0) throw ConfigError("build_design: M must be >= 1");
    const std::size_t n = x.rows();
    const std::size_t d = x.cols();
    if (y_scaled.size() != n) throw ConfigError("build_design: y length mismatch");
    for (double v : y_scaled)
        if (!(v >= 0.0 && v <= 1.0))
            throw ConfigError("build_design: scaled targets must lie in [0, 1]");

    AuxiliaryDesign design;
    design.features = Matrix(n * M, d + 1);
    design.targets.resize(n * M);
    design.group_index.resize(n * M);
    for (std::size_t i = 0; i < n; ++i) {
        SplitMix64 rng = substream(seed, i);
        const auto xi = x.row(i);
        for (std::size_t m = 0; m < M; ++m) {
            const std::size_t r = i * M + m;
            auto row = design.features.row(r);
            std::copy(xi.begin(), xi.end(), row.begin());
            const double aux = rng.uniform();
            row[d] = aux;
            design.targets[r] = kernel_eval(y_scaled[i] - aux, h);
            design.group_index[r] = static_cast<std::uint32_t>(i);
        }
    }
    return design;
}

// Standardizes feature columns and targets in place with the given state
// (training statistics). Flips the standardized flag.
inline void standardize_design(AuxiliaryDesign& design, const ScalerState& scaler) {
    if (design.standardized) throw ConfigError("design already standardized");
    if (scaler.feature_means.size() != design.width())
        throw ConfigError("standardize_design: scaler width mismatch");
    const std::size_t n = design.rows(), w = design.width();
    for (std::size_t i = 0; i < n; ++i) {
        auto row = design.features.row(i);
        for (std::size_t j = 0; j < w; ++j)
            row[j] = (row[j] - scaler.feature_means[j]) / scaler.feature_stds[j];
        design.targets[i] = (design.targets[i] - scaler.target_mean) / scaler.target_std;
    }
    design.standardized = true;
}

} // namespace condensity
