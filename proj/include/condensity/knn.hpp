#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "condensity/core.hpp"
#include "condensity/error.hpp"

namespace condensity {

// k-nearest-neighbour regressor on the standardized feature space.
// Euclidean distance, ties broken by lowest training-row index. Mainly an
// oracle backend for tests: k = 1 reproduces stored targets, k = n yields
// the global target mean.
struct KnnModel {
    int k = 1;
    Matrix train_features;
    Vector train_targets;

    std::size_t input_dim() const { return train_features.cols(); }

    double predict_row(std::span<const double> row) const {
        const std::size_t n = train_features.rows();
        const std::size_t d = train_features.cols();
        std::vector<std::pair<double, std::size_t>> dist(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double* tr = train_features.data() + i * d;
            double acc = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
                const double diff = tr[j] - row[j];
                acc += diff * diff;
            }
            dist[i] = {acc, i};
        }
        const std::size_t kk = static_cast<std::size_t>(k);
        std::partial_sort(dist.begin(), dist.begin() + kk, dist.end());
        double sum = 0.0;
        for (std::size_t i = 0; i < kk; ++i) sum += train_targets[dist[i].second];
        return sum / static_cast<double>(kk);
    }

    Vector predict(const Matrix& features) const {
        if (features.cols() != input_dim())
            throw ConfigError("knn predict: feature width " + std::to_string(features.cols()) +
                              " != input_dim " + std::to_string(input_dim()));
        Vector out(features.rows());
        for (std::size_t r = 0; r < features.rows(); ++r) out[r] = predict_row(features.row(r));
        return out;
    }

    bool operator==(const KnnModel& other) const = default;
};

} // namespace condensity
