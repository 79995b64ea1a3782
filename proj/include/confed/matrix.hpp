#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "confed/common.hpp"

namespace confed {

/// Dense row-major matrix of doubles.
struct Matrix {
    size_t rows = 0;
    size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(size_t r, size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

    double& at(size_t r, size_t c) { return data[r * cols + c]; }
    double at(size_t r, size_t c) const { return data[r * cols + c]; }
    double* row(size_t r) { return data.data() + r * cols; }
    const double* row(size_t r) const { return data.data() + r * cols; }
    size_t size() const { return data.size(); }

    bool has_nan() const {
        for (double v : data)
            if (std::isnan(v)) return true;
        return false;
    }
};

/// One minibatch: inputs and aligned targets.
struct Batch {
    Matrix inputs;
    Matrix targets;

    Batch() = default;
    Batch(Matrix in, Matrix tgt) : inputs(std::move(in)), targets(std::move(tgt)) {
        if (inputs.rows != targets.rows)
            throw InvalidInput("Batch: input and target row counts differ");
        if (inputs.has_nan() || targets.has_nan())
            throw InvalidInput("Batch: NaN entries");
    }

    size_t size() const { return inputs.rows; }
};

/// Z = A * W^T where W is (out x in) row-major. Z must be (A.rows x out).
inline void matmul_nt(const Matrix& a, const Matrix& w, Matrix& z) {
    for (size_t i = 0; i < a.rows; ++i) {
        const double* ai = a.row(i);
        double* zi = z.row(i);
        for (size_t o = 0; o < w.rows; ++o) {
            const double* wo = w.row(o);
            double sum = 0.0;
            for (size_t k = 0; k < w.cols; ++k) sum += ai[k] * wo[k];
            zi[o] = sum;
        }
    }
}

}  // namespace confed
