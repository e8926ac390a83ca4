#include "optembed/kernels.hpp"

#include <cmath>
#include <cstdint>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace optembed::kernels {

namespace {

void check_mul(const Matrix& a, const Matrix& b, size_t ak, size_t bk, const char* op) {
    if (ak != bk) {
        throw std::invalid_argument(std::string(op) + ": inner dimensions disagree, " +
                                    a.shape_str() + " vs " + b.shape_str());
    }
}

inline void matmul_row(const Matrix& a, const Matrix& b, Matrix& out, size_t i) {
    const size_t k = a.cols, c = b.cols;
    double* o = out.row_ptr(i);
    for (size_t j = 0; j < c; ++j) o[j] = 0.0;
    const double* ar = a.row_ptr(i);
    for (size_t p = 0; p < k; ++p) {
        const double av = ar[p];
        const double* br = b.row_ptr(p);
        for (size_t j = 0; j < c; ++j) o[j] += av * br[j];
    }
}

inline void matmul_nt_row(const Matrix& a, const Matrix& b, Matrix& out, size_t i) {
    const size_t k = a.cols, c = b.rows;
    const double* ar = a.row_ptr(i);
    double* o = out.row_ptr(i);
    for (size_t j = 0; j < c; ++j) {
        const double* br = b.row_ptr(j);
        double acc = 0.0;
        for (size_t p = 0; p < k; ++p) acc += ar[p] * br[p];
        o[j] = acc;
    }
}

inline void matmul_tn_row(const Matrix& a, const Matrix& b, Matrix& out, size_t i) {
    // out (a.cols x b.cols), out row i = sum over p of a[p,i] * b[p,:]
    const size_t kk = a.rows, c = b.cols;
    double* o = out.row_ptr(i);
    for (size_t j = 0; j < c; ++j) o[j] = 0.0;
    for (size_t p = 0; p < kk; ++p) {
        const double av = a(p, i);
        const double* br = b.row_ptr(p);
        for (size_t j = 0; j < c; ++j) o[j] += av * br[j];
    }
}

inline void colsum_col(const Matrix& a, Matrix& out, size_t j) {
    double acc = 0.0;
    for (size_t i = 0; i < a.rows; ++i) acc += a(i, j);
    out(0, j) = acc;
}

struct ScatterPlan {
    std::vector<uint32_t> unique_rows;        // ascending
    std::vector<uint32_t> occ_offsets;        // size unique+1, into occ_pos
    std::vector<uint32_t> occ_pos;            // flat (b * n + i) positions, scan order
};

ScatterPlan build_scatter_plan(std::span<const uint32_t> idx, size_t table_rows) {
    ScatterPlan plan;
    std::vector<uint32_t> count(table_rows, 0);
    for (uint32_t r : idx) {
        if (r >= table_rows) throw std::out_of_range("scatter_rows: index " + std::to_string(r) +
                                                     " out of table with " + std::to_string(table_rows) + " rows");
        ++count[r];
    }
    std::vector<uint32_t> start(table_rows + 1, 0);
    for (size_t r = 0; r < table_rows; ++r) {
        start[r + 1] = start[r] + count[r];
        if (count[r] > 0) plan.unique_rows.push_back(static_cast<uint32_t>(r));
    }
    plan.occ_pos.resize(idx.size());
    std::vector<uint32_t> cursor(start.begin(), start.end() - 1);
    for (size_t pos = 0; pos < idx.size(); ++pos) {
        plan.occ_pos[cursor[idx[pos]]++] = static_cast<uint32_t>(pos);
    }
    // occ_pos is contiguous by row after the counting sort, so each unique
    // row's occurrence range is [start[r], start of the next unique row).
    plan.occ_offsets.reserve(plan.unique_rows.size() + 1);
    for (uint32_t r : plan.unique_rows) plan.occ_offsets.push_back(start[r]);
    plan.occ_offsets.push_back(static_cast<uint32_t>(idx.size()));
    return plan;
}

inline void scatter_one_row(const Matrix& dx0, const ScatterPlan& plan, size_t n_fields,
                            size_t dim, RowGrads& out, size_t u) {
    double* g = out.grads.row_ptr(u);
    for (size_t c = 0; c < dim; ++c) g[c] = 0.0;
    const uint32_t begin = plan.occ_offsets[u];
    const uint32_t end = plan.occ_offsets[u + 1];
    for (uint32_t o = begin; o < end; ++o) {
        const uint32_t pos = plan.occ_pos[o];
        const size_t b = pos / n_fields;
        const size_t i = pos % n_fields;
        const double* src = dx0.row_ptr(b) + i * dim;
        for (size_t c = 0; c < dim; ++c) g[c] += src[c];
    }
}

}  // namespace

// ---------------------------------------------------------------------------
// Serial reference implementations
// ---------------------------------------------------------------------------

namespace ref {

void matmul(const Matrix& a, const Matrix& b, Matrix& out) {
    check_mul(a, b, a.cols, b.rows, "matmul");
    out = Matrix(a.rows, b.cols);
    for (size_t i = 0; i < a.rows; ++i) matmul_row(a, b, out, i);
}

void matmul_nt(const Matrix& a, const Matrix& b, Matrix& out) {
    check_mul(a, b, a.cols, b.cols, "matmul_nt");
    out = Matrix(a.rows, b.rows);
    for (size_t i = 0; i < a.rows; ++i) matmul_nt_row(a, b, out, i);
}

void matmul_tn(const Matrix& a, const Matrix& b, Matrix& out) {
    check_mul(a, b, a.rows, b.rows, "matmul_tn");
    out = Matrix(a.cols, b.cols);
    for (size_t i = 0; i < a.cols; ++i) matmul_tn_row(a, b, out, i);
}

void colsum(const Matrix& a, Matrix& out) {
    out = Matrix(1, a.cols);
    for (size_t j = 0; j < a.cols; ++j) colsum_col(a, out, j);
}

void row_gather(const Matrix& table, std::span<const uint32_t> idx, Matrix& out) {
    out = Matrix(idx.size(), table.cols);
    for (size_t i = 0; i < idx.size(); ++i) {
        const double* src = table.row_ptr(idx[i]);
        double* dst = out.row_ptr(i);
        for (size_t c = 0; c < table.cols; ++c) dst[c] = src[c];
    }
}

void l1_row_norms(const Matrix& table, std::vector<double>& out) {
    out.assign(table.rows, 0.0);
    for (size_t r = 0; r < table.rows; ++r) {
        const double* row = table.row_ptr(r);
        double acc = 0.0;
        for (size_t c = 0; c < table.cols; ++c) acc += std::fabs(row[c]);
        out[r] = acc;
    }
}

RowGrads scatter_rows(const Matrix& dx0, std::span<const uint32_t> idx, size_t n_fields,
                      size_t dim, size_t table_rows) {
    ScatterPlan plan = build_scatter_plan(idx, table_rows);
    RowGrads out;
    out.rows = plan.unique_rows;
    out.grads = Matrix(plan.unique_rows.size(), dim);
    for (size_t u = 0; u < plan.unique_rows.size(); ++u) {
        scatter_one_row(dx0, plan, n_fields, dim, out, u);
    }
    return out;
}

}  // namespace ref

// ---------------------------------------------------------------------------
// OpenMP implementations. Thresholds keep tiny inputs on the calling thread.
// ---------------------------------------------------------------------------

namespace {
constexpr size_t kParallelFlops = 1 << 15;
}

void matmul(const Matrix& a, const Matrix& b, Matrix& out) {
    check_mul(a, b, a.cols, b.rows, "matmul");
    out = Matrix(a.rows, b.cols);
    const ptrdiff_t n = static_cast<ptrdiff_t>(a.rows);
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (a.rows * a.cols * b.cols > kParallelFlops)
#endif
    for (ptrdiff_t i = 0; i < n; ++i) matmul_row(a, b, out, static_cast<size_t>(i));
}

void matmul_nt(const Matrix& a, const Matrix& b, Matrix& out) {
    check_mul(a, b, a.cols, b.cols, "matmul_nt");
    out = Matrix(a.rows, b.rows);
    const ptrdiff_t n = static_cast<ptrdiff_t>(a.rows);
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (a.rows * a.cols * b.rows > kParallelFlops)
#endif
    for (ptrdiff_t i = 0; i < n; ++i) matmul_nt_row(a, b, out, static_cast<size_t>(i));
}

void matmul_tn(const Matrix& a, const Matrix& b, Matrix& out) {
    check_mul(a, b, a.rows, b.rows, "matmul_tn");
    out = Matrix(a.cols, b.cols);
    const ptrdiff_t n = static_cast<ptrdiff_t>(a.cols);
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (a.rows * a.cols * b.cols > kParallelFlops)
#endif
    for (ptrdiff_t i = 0; i < n; ++i) matmul_tn_row(a, b, out, static_cast<size_t>(i));
}

void colsum(const Matrix& a, Matrix& out) {
    out = Matrix(1, a.cols);
    const ptrdiff_t n = static_cast<ptrdiff_t>(a.cols);
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (a.rows * a.cols > kParallelFlops)
#endif
    for (ptrdiff_t j = 0; j < n; ++j) colsum_col(a, out, static_cast<size_t>(j));
}

void row_gather(const Matrix& table, std::span<const uint32_t> idx, Matrix& out) {
    out = Matrix(idx.size(), table.cols);
    const ptrdiff_t n = static_cast<ptrdiff_t>(idx.size());
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (idx.size() * table.cols > kParallelFlops)
#endif
    for (ptrdiff_t i = 0; i < n; ++i) {
        const double* src = table.row_ptr(idx[i]);
        double* dst = out.row_ptr(static_cast<size_t>(i));
        for (size_t c = 0; c < table.cols; ++c) dst[c] = src[c];
    }
}

void l1_row_norms(const Matrix& table, std::vector<double>& out) {
    out.assign(table.rows, 0.0);
    const ptrdiff_t n = static_cast<ptrdiff_t>(table.rows);
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (table.size() > kParallelFlops)
#endif
    for (ptrdiff_t r = 0; r < n; ++r) {
        const double* row = table.row_ptr(static_cast<size_t>(r));
        double acc = 0.0;
        for (size_t c = 0; c < table.cols; ++c) acc += std::fabs(row[c]);
        out[static_cast<size_t>(r)] = acc;
    }
}

RowGrads scatter_rows(const Matrix& dx0, std::span<const uint32_t> idx, size_t n_fields,
                      size_t dim, size_t table_rows) {
    ScatterPlan plan = build_scatter_plan(idx, table_rows);
    RowGrads out;
    out.rows = plan.unique_rows;
    out.grads = Matrix(plan.unique_rows.size(), dim);
    const ptrdiff_t n = static_cast<ptrdiff_t>(plan.unique_rows.size());
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (idx.size() * dim > kParallelFlops)
#endif
    for (ptrdiff_t u = 0; u < n; ++u) {
        scatter_one_row(dx0, plan, n_fields, dim, out, static_cast<size_t>(u));
    }
    return out;
}

}  // namespace optembed::kernels
