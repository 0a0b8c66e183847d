#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "condensity/error.hpp"

namespace condensity {

using Vector = std::vector<double>;

// Dense row-major matrix of doubles. Rows are contiguous so regression
// backends can take std::span views of individual observations.
class Matrix {
public:
    Matrix() = default;

    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    bool empty() const { return data_.empty(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    bool operator==(const Matrix& other) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    Vector data_;
};

// n observations of d covariates plus a scalar target in original units.
struct RawDataset {
    Matrix x;
    Vector y;

    std::size_t size() const { return y.size(); }
    std::size_t dim() const { return x.cols(); }

    void validate() const {
        if (x.rows() != y.size())
            throw DataError("dataset: covariate rows (" + std::to_string(x.rows()) +
                            ") do not match target length (" + std::to_string(y.size()) + ")");
        if (y.size() < 2) throw TooFewSamples("dataset: need at least 2 observations");
        if (x.cols() < 1) throw DataError("dataset: need at least 1 covariate column");
        for (std::size_t i = 0; i < x.rows(); ++i) {
            for (std::size_t j = 0; j < x.cols(); ++j)
                if (!std::isfinite(x(i, j)))
                    throw DataError("dataset: non-finite covariate at row " + std::to_string(i) +
                                    ", column " + std::to_string(j));
            if (!std::isfinite(y[i]))
                throw DataError("dataset: non-finite target at row " + std::to_string(i));
        }
    }
};

} // namespace condensity
