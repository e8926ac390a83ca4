#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "optembed/matrix.hpp"

namespace optembed::kernels {

// Dense kernels behind the training loop. Each has two implementations: the
// serial reference in kernels::ref and an OpenMP version under the plain name.
// The parallel versions partition output elements across threads and keep the
// per-element accumulation order identical to the reference, so both produce
// bit-identical results for any thread count. Tests assert exact equality;
// tools/bench_kernels compares throughput.

// out = a (r x k) * b (k x c)
void matmul(const Matrix& a, const Matrix& b, Matrix& out);
// out = a (r x k) * b^T, b is (c x k)
void matmul_nt(const Matrix& a, const Matrix& b, Matrix& out);
// out = a^T * b, a is (k x r), b is (k x c)
void matmul_tn(const Matrix& a, const Matrix& b, Matrix& out);
// out[c] = sum over rows of a[:, c]
void colsum(const Matrix& a, Matrix& out);
// out row i = table row idx[i]
void row_gather(const Matrix& table, std::span<const uint32_t> idx, Matrix& out);
// Per-row L1 norms of a table.
void l1_row_norms(const Matrix& table, std::vector<double>& out);

// Accumulates slices of dx0 into per-unique-row gradients. dx0 is B x (n*D);
// position (b, i) contributes dx0[b, i*D .. (i+1)*D) to table row idx[b*n+i].
// Occurrences of a row are accumulated in scan order (b-major), which pins the
// floating-point result independent of threading.
RowGrads scatter_rows(const Matrix& dx0, std::span<const uint32_t> idx, size_t n_fields,
                      size_t dim, size_t table_rows);

namespace ref {
void matmul(const Matrix& a, const Matrix& b, Matrix& out);
void matmul_nt(const Matrix& a, const Matrix& b, Matrix& out);
void matmul_tn(const Matrix& a, const Matrix& b, Matrix& out);
void colsum(const Matrix& a, Matrix& out);
void row_gather(const Matrix& table, std::span<const uint32_t> idx, Matrix& out);
void l1_row_norms(const Matrix& table, std::vector<double>& out);
RowGrads scatter_rows(const Matrix& dx0, std::span<const uint32_t> idx, size_t n_fields,
                      size_t dim, size_t table_rows);
}  // namespace ref

}  // namespace optembed::kernels
