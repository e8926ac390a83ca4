#include "optembed/nn.hpp"

#include <cmath>
#include <stdexcept>

#include "optembed/kernels.hpp"

namespace optembed {

Matrix xavier_init(size_t rows, size_t cols, Rng& rng) {
    if (rows == 0 || cols == 0) throw std::invalid_argument("xavier_init: zero dimension");
    const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
    Matrix m(rows, cols);
    for (double& v : m.data) v = (rng.uniform() * 2.0 - 1.0) * bound;
    return m;
}

void adam_step(Matrix& param, const Matrix& grad, AdamState& st, const AdamHyper& h) {
    if (!param.same_shape(grad)) {
        throw std::invalid_argument("adam_step: param " + param.shape_str() + " vs grad " +
                                    grad.shape_str());
    }
    st.step += 1;
    const double bc1 = 1.0 - std::pow(h.beta1, static_cast<double>(st.step));
    const double bc2 = 1.0 - std::pow(h.beta2, static_cast<double>(st.step));
    for (size_t i = 0; i < param.size(); ++i) {
        const double g = grad.data[i] + h.l2 * param.data[i];
        st.m.data[i] = h.beta1 * st.m.data[i] + (1.0 - h.beta1) * g;
        st.v.data[i] = h.beta2 * st.v.data[i] + (1.0 - h.beta2) * g * g;
        const double mhat = st.m.data[i] / bc1;
        const double vhat = st.v.data[i] / bc2;
        param.data[i] -= h.lr * mhat / (std::sqrt(vhat) + h.eps);
    }
}

void adam_step_rows(Matrix& param, const RowGrads& grad, RowAdamState& st, const AdamHyper& h) {
    if (grad.grads.cols != param.cols) {
        throw std::invalid_argument("adam_step_rows: grad width " + grad.grads.shape_str() +
                                    " vs param " + param.shape_str());
    }
    const size_t dim = param.cols;
    for (size_t u = 0; u < grad.count(); ++u) {
        const uint32_t r = grad.rows[u];
        st.row_step[r] += 1;
        const double bc1 = 1.0 - std::pow(h.beta1, static_cast<double>(st.row_step[r]));
        const double bc2 = 1.0 - std::pow(h.beta2, static_cast<double>(st.row_step[r]));
        double* p = param.row_ptr(r);
        double* m = st.m.row_ptr(r);
        double* v = st.v.row_ptr(r);
        const double* g0 = grad.grads.row_ptr(u);
        for (size_t c = 0; c < dim; ++c) {
            const double g = g0[c] + h.l2 * p[c];
            m[c] = h.beta1 * m[c] + (1.0 - h.beta1) * g;
            v[c] = h.beta2 * v[c] + (1.0 - h.beta2) * g * g;
            p[c] -= h.lr * (m[c] / bc1) / (std::sqrt(v[c] / bc2) + h.eps);
        }
    }
}

// --- Affine ---------------------------------------------------------------

Affine::Affine(size_t in, size_t out, Rng& rng)
    : W(xavier_init(in, out, rng)), b(1, out), opt_w(in, out), opt_b(1, out) {}

Matrix Affine::forward(const Matrix& x) {
    if (x.cols != W.rows) {
        throw std::invalid_argument("affine_forward: input " + x.shape_str() + " vs weight " +
                                    W.shape_str());
    }
    x_cache_ = x;
    Matrix out;
    kernels::matmul(x, W, out);
    for (size_t i = 0; i < out.rows; ++i) {
        double* o = out.row_ptr(i);
        for (size_t j = 0; j < out.cols; ++j) o[j] += b(0, j);
    }
    return out;
}

Matrix Affine::backward(const Matrix& dout) {
    if (x_cache_.rows != dout.rows || dout.cols != W.cols) {
        throw std::invalid_argument("affine_backward: dout " + dout.shape_str() +
                                    " vs cached input " + x_cache_.shape_str() + " and weight " +
                                    W.shape_str());
    }
    kernels::matmul_tn(x_cache_, dout, grad_w);
    kernels::colsum(dout, grad_b);
    Matrix dx;
    kernels::matmul_nt(dout, W, dx);
    return dx;
}

void Affine::step(const AdamHyper& h) {
    adam_step(W, grad_w, opt_w, h);
    adam_step(b, grad_b, opt_b, h);
}

// --- Relu / Sigmoid ---------------------------------------------------------

Matrix Relu::forward(const Matrix& x) {
    x_cache_ = x;
    Matrix out = x;
    for (double& v : out.data) v = v > 0.0 ? v : 0.0;
    return out;
}

Matrix Relu::backward(const Matrix& dout) const {
    Matrix dx = dout;
    for (size_t i = 0; i < dx.size(); ++i) {
        if (x_cache_.data[i] <= 0.0) dx.data[i] = 0.0;
    }
    return dx;
}

Matrix Sigmoid::forward(const Matrix& x) {
    Matrix out = x;
    for (double& v : out.data) v = 1.0 / (1.0 + std::exp(-v));
    y_cache_ = out;
    return out;
}

Matrix Sigmoid::backward(const Matrix& dout) const {
    Matrix dx = dout;
    for (size_t i = 0; i < dx.size(); ++i) {
        const double y = y_cache_.data[i];
        dx.data[i] *= y * (1.0 - y);
    }
    return dx;
}

// --- BatchNorm --------------------------------------------------------------

BatchNorm::BatchNorm(size_t channels)
    : gamma(1, channels, 1.0),
      beta(1, channels),
      running_mean(1, channels),
      running_var(1, channels, 1.0),
      opt_g(1, channels),
      opt_b(1, channels) {}

Matrix BatchNorm::forward(const Matrix& x, bool train) {
    if (x.cols != gamma.cols) {
        throw std::invalid_argument("batchnorm: input " + x.shape_str() + " vs " +
                                    std::to_string(gamma.cols) + " channels");
    }
    const size_t B = x.rows, C = x.cols;
    Matrix out(B, C);
    if (train) {
        if (B < 2) throw std::invalid_argument("batchnorm: train mode needs batch size >= 2");
        xhat_cache_ = Matrix(B, C);
        inv_std_cache_ = Matrix(1, C);
        for (size_t j = 0; j < C; ++j) {
            double mean = 0.0;
            for (size_t i = 0; i < B; ++i) mean += x(i, j);
            mean /= static_cast<double>(B);
            double var = 0.0;
            for (size_t i = 0; i < B; ++i) {
                const double d = x(i, j) - mean;
                var += d * d;
            }
            var /= static_cast<double>(B);
            const double inv_std = 1.0 / std::sqrt(var + eps);
            inv_std_cache_(0, j) = inv_std;
            for (size_t i = 0; i < B; ++i) {
                const double xh = (x(i, j) - mean) * inv_std;
                xhat_cache_(i, j) = xh;
                out(i, j) = gamma(0, j) * xh + beta(0, j);
            }
            running_mean(0, j) = (1.0 - momentum) * running_mean(0, j) + momentum * mean;
            running_var(0, j) = (1.0 - momentum) * running_var(0, j) + momentum * var;
        }
    } else {
        for (size_t j = 0; j < C; ++j) {
            const double inv_std = 1.0 / std::sqrt(running_var(0, j) + eps);
            for (size_t i = 0; i < B; ++i) {
                out(i, j) = gamma(0, j) * (x(i, j) - running_mean(0, j)) * inv_std + beta(0, j);
            }
        }
    }
    return out;
}

Matrix BatchNorm::backward(const Matrix& dout) {
    const size_t B = dout.rows, C = dout.cols;
    if (!dout.same_shape(xhat_cache_)) {
        throw std::invalid_argument("batchnorm backward: dout " + dout.shape_str() +
                                    " vs cached " + xhat_cache_.shape_str());
    }
    grad_g = Matrix(1, C);
    grad_b = Matrix(1, C);
    Matrix dx(B, C);
    const double invB = 1.0 / static_cast<double>(B);
    for (size_t j = 0; j < C; ++j) {
        double sum_dy = 0.0, sum_dy_xhat = 0.0;
        for (size_t i = 0; i < B; ++i) {
            sum_dy += dout(i, j);
            sum_dy_xhat += dout(i, j) * xhat_cache_(i, j);
        }
        grad_b(0, j) = sum_dy;
        grad_g(0, j) = sum_dy_xhat;
        const double g_inv_std = gamma(0, j) * inv_std_cache_(0, j);
        for (size_t i = 0; i < B; ++i) {
            dx(i, j) = g_inv_std * invB *
                       (static_cast<double>(B) * dout(i, j) - sum_dy -
                        xhat_cache_(i, j) * sum_dy_xhat);
        }
    }
    return dx;
}

void BatchNorm::step(const AdamHyper& h) {
    adam_step(gamma, grad_g, opt_g, h);
    adam_step(beta, grad_b, opt_b, h);
}

// --- BCE ---------------------------------------------------------------------

BceResult bce_loss(std::span<const double> labels, std::span<const double> probs) {
    if (labels.size() != probs.size()) {
        throw std::invalid_argument("bce_loss: " + std::to_string(labels.size()) + " labels vs " +
                                    std::to_string(probs.size()) + " probabilities");
    }
    const size_t B = labels.size();
    BceResult res;
    res.dprobs.resize(B);
    double total = 0.0;
    for (size_t i = 0; i < B; ++i) {
        double p = probs[i];
        if (p < kProbClamp) p = kProbClamp;
        if (p > 1.0 - kProbClamp) p = 1.0 - kProbClamp;
        const double y = labels[i];
        total += y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
        res.dprobs[i] = -(y / p - (1.0 - y) / (1.0 - p)) / static_cast<double>(B);
    }
    res.loss = -total / static_cast<double>(B);
    return res;
}

}  // namespace optembed
