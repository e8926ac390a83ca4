#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace optembed {

// Dense row-major matrix of 64-bit floats. Value type; all layer activations,
// parameters and optimizer moments use it.
struct Matrix {
    size_t rows = 0;
    size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(size_t r, size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

    double& operator()(size_t r, size_t c) { return data[r * cols + c]; }
    double operator()(size_t r, size_t c) const { return data[r * cols + c]; }

    double* row_ptr(size_t r) { return data.data() + r * cols; }
    const double* row_ptr(size_t r) const { return data.data() + r * cols; }

    size_t size() const { return data.size(); }

    bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }

    std::string shape_str() const {
        return std::to_string(rows) + "x" + std::to_string(cols);
    }
};

inline void require_shape(const Matrix& m, size_t r, size_t c, const char* what) {
    if (m.rows != r || m.cols != c) {
        throw std::invalid_argument(std::string(what) + ": expected " + std::to_string(r) +
                                    "x" + std::to_string(c) + ", got " + m.shape_str());
    }
}

// Row-sparse gradients for an embedding table: `rows` lists the touched table
// rows in ascending order, `grads` holds one dense gradient row per entry.
struct RowGrads {
    std::vector<uint32_t> rows;
    Matrix grads;

    size_t count() const { return rows.size(); }
};

}  // namespace optembed
