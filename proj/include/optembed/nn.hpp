#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "optembed/matrix.hpp"
#include "optembed/rng.hpp"

namespace optembed {

// Entries i.i.d. uniform on [-sqrt(6/(rows+cols)), +sqrt(6/(rows+cols))].
Matrix xavier_init(size_t rows, size_t cols, Rng& rng);

struct AdamHyper {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double l2 = 0.0;  // enters as grad += l2 * param before the moment update
};

struct AdamState {
    Matrix m, v;
    uint64_t step = 0;

    explicit AdamState(size_t rows = 0, size_t cols = 0) : m(rows, cols), v(rows, cols) {}
    void reset(size_t rows, size_t cols) { m = Matrix(rows, cols); v = Matrix(rows, cols); step = 0; }
};

void adam_step(Matrix& param, const Matrix& grad, AdamState& st, const AdamHyper& h);

// Lazy Adam for embedding tables: moments and bias-correction step counts
// advance only for rows present in the gradient. Untouched rows keep their
// moments and values, which deviates from dense Adam on purpose: at |f| >>
// batch size a dense update per step would dominate the training cost.
struct RowAdamState {
    Matrix m, v;
    std::vector<uint64_t> row_step;

    explicit RowAdamState(size_t rows = 0, size_t cols = 0)
        : m(rows, cols), v(rows, cols), row_step(rows, 0) {}
};

void adam_step_rows(Matrix& param, const RowGrads& grad, RowAdamState& st, const AdamHyper& h);

// ---------------------------------------------------------------------------
// Layers. Each caches what its backward needs; backward stashes parameter
// gradients in the layer and returns the input gradient.
// ---------------------------------------------------------------------------

struct Affine {
    Matrix W;  // in x out
    Matrix b;  // 1 x out
    AdamState opt_w, opt_b;
    Matrix grad_w, grad_b;

    Affine() = default;
    Affine(size_t in, size_t out, Rng& rng);

    Matrix forward(const Matrix& x);
    Matrix backward(const Matrix& dout);
    void step(const AdamHyper& h);

private:
    Matrix x_cache_;
};

struct Relu {
    Matrix forward(const Matrix& x);
    Matrix backward(const Matrix& dout) const;

private:
    Matrix x_cache_;
};

struct Sigmoid {
    Matrix forward(const Matrix& x);
    Matrix backward(const Matrix& dout) const;

private:
    Matrix y_cache_;
};

// Batch normalization over columns. Train mode normalizes by batch mean and
// (biased) variance with eps=1e-5 and updates running statistics with
// momentum 0.1; eval mode normalizes by the running statistics and is a pure
// per-row function. Train mode requires batch size >= 2.
struct BatchNorm {
    Matrix gamma, beta;                // 1 x C
    Matrix running_mean, running_var;  // 1 x C
    double eps = 1e-5;
    double momentum = 0.1;
    AdamState opt_g, opt_b;
    Matrix grad_g, grad_b;

    BatchNorm() = default;
    explicit BatchNorm(size_t channels);

    Matrix forward(const Matrix& x, bool train);
    Matrix backward(const Matrix& dout);
    void step(const AdamHyper& h);

private:
    Matrix xhat_cache_;
    Matrix inv_std_cache_;  // 1 x C
};

// Mean binary cross-entropy over a batch. Probabilities are clamped to
// [1e-7, 1 - 1e-7] before the logs; the returned gradient is w.r.t. the
// clamped probabilities, d loss / d p_i = -(y_i/p_i - (1-y_i)/(1-p_i)) / B.
struct BceResult {
    double loss;
    std::vector<double> dprobs;
};
BceResult bce_loss(std::span<const double> labels, std::span<const double> probs);

inline constexpr double kProbClamp = 1e-7;

}  // namespace optembed
