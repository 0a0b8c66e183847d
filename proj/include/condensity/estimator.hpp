#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "condensity/core.hpp"
#include "condensity/density.hpp"
#include "condensity/error.hpp"
#include "condensity/kernel.hpp"
#include "condensity/parallel.hpp"
#include "condensity/regress.hpp"
#include "condensity/rng.hpp"
#include "condensity/transform.hpp"

namespace condensity {

struct FitConfig {
    std::size_t M = 100;
    Bandwidth h{0.01};
    double train_fraction = 0.8;
    int grid_size = 500;
    RegressorConfig regressor;
    std::uint64_t seed = 0;
    int patience = 5;

    void validate() const {
        if (M < 1) throw ConfigError("config: M must be >= 1");
        if (!(train_fraction > 0.0 && train_fraction < 1.0))
            throw ConfigError("config: train_fraction must be in (0, 1)");
        if (grid_size < 2) throw ConfigError("config: grid_size must be >= 2");
        if (patience < 1) throw ConfigError("config: patience must be >= 1");
        regressor.validate();
    }
};

// The deployable estimator: fitted backend, scaling state, and the
// configuration it was trained with.
struct FittedEstimator {
    RegressorModel model;
    ScalerState scaler;
    FitConfig config;
    double validation_ise = 0.0;
    int rounds_trained = 0;
    std::size_t n_train = 0;
    std::size_t n_val = 0;
};

struct IseReport {
    double value = 0.0; // ISE up to the f-independent constant; lower is better
    std::size_t n_test = 0;
    int grid_size = 0;
};

// Seed-stream roles used by fit(); build_design derives its own
// per-observation substreams from the design stream seed.
namespace seed_stream {
inline constexpr std::uint64_t kSplit = 11;
inline constexpr std::uint64_t kDesign = 22;
inline constexpr std::uint64_t kTrain = 33;
} // namespace seed_stream

// ---------------------------------------------------------------------------
// Prediction helpers, templated on the model so tests can substitute stubs.
// A model is anything with input_dim() and predict(const Matrix&) -> Vector.
// ---------------------------------------------------------------------------

// Regressor outputs at rows [x, g] for g in grid, mapped back to the kernel
// target scale. May be negative.
template <class Model>
Vector predict_raw_with(const Model& model, const ScalerState& scaler,
                        std::span<const double> x, std::span<const double> grid) {
    const std::size_t d = scaler.feature_means.size() - 1;
    if (x.size() != d) throw ConfigError("predict_raw: covariate width mismatch");
    Matrix rows(grid.size(), d + 1);
    for (std::size_t r = 0; r < grid.size(); ++r) {
        auto row = rows.row(r);
        for (std::size_t j = 0; j < d; ++j)
            row[j] = (x[j] - scaler.feature_means[j]) / scaler.feature_stds[j];
        row[d] = (grid[r] - scaler.feature_means[d]) / scaler.feature_stds[d];
    }
    Vector out = model.predict(rows);
    for (double& v : out) v = v * scaler.target_std + target_shift(scaler);
    return out;
}

inline double target_shift(const ScalerState& scaler) { return scaler.target_mean; }

// Clip negatives and renormalize to unit trapezoidal mass; a curve with
// (numerically) zero mass falls back to the uniform density.
inline DensityCurve postprocess_density(Vector raw, Vector grid) {
    for (double& v : raw) v = std::max(0.0, v);
    const double mass = trapezoid(raw, grid);
    if (!(mass >= 1e-12)) {
        std::fill(raw.begin(), raw.end(), 1.0);
    } else {
        for (double& v : raw) v /= mass;
    }
    return DensityCurve{std::move(grid), std::move(raw)};
}

template <class Model>
DensityCurve predict_density_with(const Model& model, const ScalerState& scaler, int grid_size,
                                  std::span<const double> x) {
    Vector grid = uniform_grid(static_cast<std::size_t>(grid_size));
    Vector raw = predict_raw_with(model, scaler, x, grid);
    return postprocess_density(std::move(raw), std::move(grid));
}

// Empirical ISE (up to the f-independent constant) of the post-processed
// density on the scaled target axis:
//   mean_i trapz(fhat(.|x_i)^2) - 2 mean_i fhat(ytilde_i|x_i)
// with ytilde the clipped min-max image of y and pointwise evaluation by
// linear interpolation on the grid.
template <class Model>
double ise_with(const Model& model, const ScalerState& scaler, int grid_size, const Matrix& x,
                std::span<const double> y) {
    if (x.rows() == 0) throw DataError("ise: empty test set");
    const Vector y_scaled = minmax_apply(y, scaler, /*clip=*/true);
    double term1 = 0.0, term2 = 0.0;
    Vector sq(static_cast<std::size_t>(grid_size));
    for (std::size_t i = 0; i < x.rows(); ++i) {
        const DensityCurve curve = predict_density_with(model, scaler, grid_size, x.row(i));
        for (std::size_t j = 0; j < curve.values.size(); ++j)
            sq[j] = curve.values[j] * curve.values[j];
        term1 += trapezoid(sq, curve.grid);
        term2 += interp_linear(curve.grid, curve.values, y_scaled[i]);
    }
    const double n = static_cast<double>(x.rows());
    return term1 / n - 2.0 * term2 / n;
}

// ---------------------------------------------------------------------------
// Fitting
// ---------------------------------------------------------------------------

namespace detail {

// Validation ISE evaluator that avoids re-running the full ensemble for the
// tree backend: raw standardized predictions per validation point are cached
// and each new tree only adds its own contribution.
class TreeValidationCache {
public:
    TreeValidationCache(const Matrix& x_val, std::span<const double> y_val_scaled,
                        const ScalerState& scaler, int grid_size)
        : scaler_(scaler), grid_(uniform_grid(static_cast<std::size_t>(grid_size))),
          y_val_(y_val_scaled.begin(), y_val_scaled.end()) {
        const std::size_t d = scaler.feature_means.size() - 1;
        const std::size_t n = x_val.rows();
        x_std_ = Matrix(n, d);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < d; ++j)
                x_std_(i, j) = (x_val(i, j) - scaler.feature_means[j]) / scaler.feature_stds[j];
        grid_std_.resize(grid_.size());
        for (std::size_t j = 0; j < grid_.size(); ++j)
            grid_std_[j] = (grid_[j] - scaler.feature_means[d]) / scaler.feature_stds[d];
        raw_ = Matrix(n, grid_.size(), 0.0);
    }

    void set_base(double base_score) {
        for (std::size_t i = 0; i < raw_.rows(); ++i)
            for (std::size_t j = 0; j < raw_.cols(); ++j) raw_(i, j) = base_score;
    }

    void add_tree(const RegressionTree& tree) {
        for (std::size_t i = 0; i < raw_.rows(); ++i) {
            const auto xi = x_std_.row(i);
            auto out = raw_.row(i);
            for (std::size_t j = 0; j < grid_std_.size(); ++j)
                out[j] += tree.predict_composite(xi, grid_std_[j]);
        }
    }

    double current_ise() const {
        double term1 = 0.0, term2 = 0.0;
        Vector values(grid_.size());
        Vector sq(grid_.size());
        for (std::size_t i = 0; i < raw_.rows(); ++i) {
            for (std::size_t j = 0; j < grid_.size(); ++j)
                values[j] = raw_(i, j) * scaler_.target_std + scaler_.target_mean;
            DensityCurve curve = postprocess_density(std::move(values), grid_);
            for (std::size_t j = 0; j < grid_.size(); ++j)
                sq[j] = curve.values[j] * curve.values[j];
            term1 += trapezoid(sq, curve.grid);
            term2 += interp_linear(curve.grid, curve.values, y_val_[i]);
            values = std::move(curve.values); // reuse the buffer
        }
        const double n = static_cast<double>(raw_.rows());
        return term1 / n - 2.0 * term2 / n;
    }

private:
    const ScalerState& scaler_;
    Vector grid_;
    Vector y_val_;
    Matrix x_std_;
    Vector grid_std_;
    Matrix raw_;
};

// Validation ISE from scaled covariates/targets through the generic path.
template <class Model>
double validation_ise(const Model& model, const ScalerState& scaler, int grid_size,
                      const Matrix& x_val, std::span<const double> y_val_scaled) {
    double term1 = 0.0, term2 = 0.0;
    Vector sq(static_cast<std::size_t>(grid_size));
    for (std::size_t i = 0; i < x_val.rows(); ++i) {
        const DensityCurve curve = predict_density_with(model, scaler, grid_size, x_val.row(i));
        for (std::size_t j = 0; j < curve.values.size(); ++j)
            sq[j] = curve.values[j] * curve.values[j];
        term1 += trapezoid(sq, curve.grid);
        term2 += interp_linear(curve.grid, curve.values, y_val_scaled[i]);
    }
    const double n = static_cast<double>(x_val.rows());
    return term1 / n - 2.0 * term2 / n;
}

} // namespace detail

// Algorithm: seeded split, min-max scale the training target, build the
// auxiliary design, standardize with training statistics, then train with
// early stopping on validation ISE, returning the best snapshot.
inline FittedEstimator fit(const RawDataset& data, const FitConfig& config) {
    config.validate();
    data.validate();

    const std::size_t n = data.size();
    const std::size_t d = data.dim();
    const std::size_t n_train = static_cast<std::size_t>(
        std::floor(static_cast<double>(n) * config.train_fraction));
    const std::size_t n_val = n - n_train;
    if (n_train < 2 || n_val < 1)
        throw TooFewSamples("fit: split " + std::to_string(n_train) + "/" + std::to_string(n_val) +
                            " needs at least 2 training and 1 validation rows");

    // Seeded shuffle; first n_train indices train, the rest validate.
    std::vector<std::uint32_t> order(n);
    std::iota(order.begin(), order.end(), 0u);
    SplitMix64 split_rng = substream(config.seed, seed_stream::kSplit);
    for (std::size_t i = n - 1; i > 0; --i) {
        const std::size_t j = static_cast<std::size_t>(split_rng.next() % (i + 1));
        std::swap(order[i], order[j]);
    }

    Matrix x_train(n_train, d), x_val(n_val, d);
    Vector y_train(n_train), y_val(n_val);
    for (std::size_t i = 0; i < n_train; ++i) {
        const auto src = data.x.row(order[i]);
        std::copy(src.begin(), src.end(), x_train.row(i).begin());
        y_train[i] = data.y[order[i]];
    }
    for (std::size_t i = 0; i < n_val; ++i) {
        const auto src = data.x.row(order[n_train + i]);
        std::copy(src.begin(), src.end(), x_val.row(i).begin());
        y_val[i] = data.y[order[n_train + i]];
    }

    ScalerState scaler;
    std::tie(scaler.y_min, scaler.y_max) = minmax_fit(y_train);
    const Vector y_train_scaled = minmax_apply(y_train, scaler, /*clip=*/false);

    AuxiliaryDesign design = build_design(x_train, y_train_scaled, config.M, config.h,
                                          substream_seed(config.seed, seed_stream::kDesign));
    std::tie(scaler.feature_means, scaler.feature_stds) = standardize_fit_columns(design.features);
    std::tie(scaler.target_mean, scaler.target_std) = standardize_fit(design.targets);
    standardize_design(design, scaler);

    const Vector y_val_scaled = minmax_apply(y_val, scaler, /*clip=*/true);

    TrainState state = fit_init(config.regressor, design,
                                substream_seed(config.seed, seed_stream::kTrain));

    FittedEstimator est;
    est.scaler = scaler;
    est.config = config;
    est.n_train = n_train;
    est.n_val = n_val;

    if (config.regressor.backend == Backend::Knn) {
        est.model = state.snapshot();
        est.validation_ise =
            detail::validation_ise(std::get<KnnModel>(est.model), scaler, config.grid_size,
                                   x_val, y_val_scaled);
        est.rounds_trained = 0;
        return est;
    }

    double best_ise = std::numeric_limits<double>::infinity();
    int best_round = 0;
    int stale = 0;

    if (config.regressor.backend == Backend::Tree) {
        auto& trainer = state.tree_trainer();
        detail::TreeValidationCache cache(x_val, y_val_scaled, scaler, config.grid_size);
        cache.set_base(trainer.model().base_score);
        while (!state.exhausted()) {
            state.train_round();
            cache.add_tree(trainer.last_tree());
            const double ise_now = cache.current_ise();
            if (ise_now < best_ise) {
                best_ise = ise_now;
                best_round = state.rounds_done();
                stale = 0;
            } else if (++stale >= config.patience) {
                break;
            }
        }
        est.rounds_trained = state.rounds_done();
        TreeModel best = trainer.model();
        best.trees.resize(static_cast<std::size_t>(best_round));
        est.model = std::move(best);
        est.validation_ise = best_ise;
        return est;
    }

    // MLP: snapshot the full parameter set at the best epoch.
    auto& trainer = state.mlp_trainer();
    MlpModel best_model = trainer.model();
    while (!state.exhausted()) {
        state.train_round();
        const double ise_now = detail::validation_ise(trainer.model(), scaler, config.grid_size,
                                                      x_val, y_val_scaled);
        if (ise_now < best_ise) {
            best_ise = ise_now;
            best_round = state.rounds_done();
            best_model = trainer.model();
            stale = 0;
        } else if (++stale >= config.patience) {
            break;
        }
    }
    est.rounds_trained = state.rounds_done();
    est.model = std::move(best_model);
    est.validation_ise = best_ise;
    (void)best_round;
    return est;
}

inline Vector predict_raw(const FittedEstimator& est, std::span<const double> x,
                          std::span<const double> grid) {
    for (double g : grid)
        if (!(g >= 0.0 && g <= 1.0)) throw ConfigError("predict_raw: grid must lie in [0, 1]");
    return std::visit(
        [&](const auto& model) { return predict_raw_with(model, est.scaler, x, grid); },
        est.model);
}

inline DensityCurve predict_density(const FittedEstimator& est, std::span<const double> x) {
    return std::visit(
        [&](const auto& model) {
            return predict_density_with(model, est.scaler, est.config.grid_size, x);
        },
        est.model);
}

// Change of variables back to original units: y = y_min + g * range,
// values / range, so the result integrates to one in original units.
inline std::pair<Vector, Vector> to_original_units(const DensityCurve& curve,
                                                   const ScalerState& scaler) {
    const double range = scaler.y_range();
    Vector grid(curve.grid.size()), values(curve.values.size());
    for (std::size_t i = 0; i < curve.grid.size(); ++i) {
        grid[i] = scaler.y_min + curve.grid[i] * range;
        values[i] = curve.values[i] / range;
    }
    return {std::move(grid), std::move(values)};
}

inline IseReport ise(const FittedEstimator& est, const RawDataset& test) {
    if (test.size() == 0) throw DataError("ise: empty test set");
    if (test.dim() + 1 != est.scaler.feature_means.size())
        throw ConfigError("ise: test covariate width mismatch");
    IseReport report;
    report.value = std::visit(
        [&](const auto& model) {
            return ise_with(model, est.scaler, est.config.grid_size, test.x, test.y);
        },
        est.model);
    report.n_test = test.size();
    report.grid_size = est.config.grid_size;
    return report;
}

// Same statistic computed on the original target axis (densities divided by
// the min-max range, evaluations at the raw y values). Useful for comparing
// against results quoted in original units.
inline double ise_original_units(const FittedEstimator& est, const RawDataset& test) {
    if (test.size() == 0) throw DataError("ise: empty test set");
    const double range = est.scaler.y_range();
    double term1 = 0.0, term2 = 0.0;
    Vector sq(static_cast<std::size_t>(est.config.grid_size));
    for (std::size_t i = 0; i < test.size(); ++i) {
        const DensityCurve curve = predict_density(est, test.x.row(i));
        auto [grid_orig, values_orig] = to_original_units(curve, est.scaler);
        for (std::size_t j = 0; j < values_orig.size(); ++j) sq[j] = values_orig[j] * values_orig[j];
        term1 += trapezoid(sq, grid_orig);
        const double y_clipped = std::clamp(test.y[i], est.scaler.y_min, est.scaler.y_max);
        term2 += interp_linear(grid_orig, values_orig, y_clipped);
    }
    (void)range;
    const double n = static_cast<double>(test.size());
    return term1 / n - 2.0 * term2 / n;
}

// ---------------------------------------------------------------------------
// Grid search over (M, h) cells
// ---------------------------------------------------------------------------

struct GridCell {
    std::size_t M = 0;
    double h = 0.0;
    IseReport report;
    bool ok = false;
    std::string error;
};

// Deterministic per-cell seed: base seed combined with hashes of M and the
// bit pattern of h, so a cell's seed does not depend on its position in the
// search lists.
inline std::uint64_t cell_seed(std::uint64_t base, std::size_t M, double h) {
    std::uint64_t h_bits;
    static_assert(sizeof(h_bits) == sizeof(h));
    std::memcpy(&h_bits, &h, sizeof(h));
    return mix64(base ^ mix64(static_cast<std::uint64_t>(M)) ^ mix64(h_bits));
}

// One fit per (M, h) cell; failures are recorded per cell without aborting
// the others. Cells are returned sorted by (M, h) and the result does not
// depend on execution order or thread count.
inline std::vector<GridCell> grid_search(const RawDataset& data, std::span<const std::size_t> Ms,
                                         std::span<const double> hs, const FitConfig& base) {
    if (Ms.empty() || hs.empty()) throw ConfigError("grid_search: empty M or h list");
    std::vector<std::pair<std::size_t, double>> cells;
    for (std::size_t M : Ms)
        for (double h : hs) cells.emplace_back(M, h);
    std::sort(cells.begin(), cells.end());

    std::vector<GridCell> results(cells.size());
    parallel_for_index(cells.size(), thread_limit(), [&](std::size_t idx) {
        GridCell& cell = results[idx];
        cell.M = cells[idx].first;
        cell.h = cells[idx].second;
        try {
            FitConfig config = base;
            config.M = cell.M;
            config.h = Bandwidth(cell.h);
            config.seed = cell_seed(base.seed, cell.M, cell.h);
            const FittedEstimator est = fit(data, config);
            cell.report.value = est.validation_ise;
            cell.report.n_test = est.n_val;
            cell.report.grid_size = config.grid_size;
            cell.ok = true;
        } catch (const std::exception& e) {
            cell.ok = false;
            cell.error = e.what();
        }
    });
    return results;
}

} // namespace condensity
