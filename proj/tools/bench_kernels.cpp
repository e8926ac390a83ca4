// Throughput comparison of the serial reference kernels against the OpenMP
// versions, on shapes typical for the training loop. Both paths must agree
// bit-for-bit (the unit tests assert it); this tool only measures speed.

#include <chrono>
#include <cstdio>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "optembed/kernels.hpp"
#include "optembed/rng.hpp"

using namespace optembed;

namespace {

Matrix random_matrix(size_t r, size_t c, Rng& rng) {
    Matrix m(r, c);
    for (double& v : m.data) v = rng.uniform() * 2.0 - 1.0;
    return m;
}

template <typename F>
double time_ms(F&& f, int reps) {
    f();  // warm-up
    const auto t0 = std::chrono::steady_clock::now();
    for (int i = 0; i < reps; ++i) f();
    const auto t1 = std::chrono::steady_clock::now();
    return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

void report(const char* name, double serial_ms, double parallel_ms) {
    std::printf("%-16s serial %8.3f ms   parallel %8.3f ms   speedup %.2fx\n", name, serial_ms,
                parallel_ms, serial_ms / parallel_ms);
}

}  // namespace

int main() {
#ifdef _OPENMP
    std::printf("OpenMP enabled, max threads %d\n", omp_get_max_threads());
#else
    std::printf("built without OpenMP; both columns run serial code\n");
#endif

    Rng rng(7);
    const int reps = 20;

    {
        Matrix a = random_matrix(2048, 256, rng);
        Matrix b = random_matrix(256, 256, rng);
        Matrix out;
        report("matmul",
               time_ms([&] { kernels::ref::matmul(a, b, out); }, reps),
               time_ms([&] { kernels::matmul(a, b, out); }, reps));
    }
    {
        Matrix a = random_matrix(2048, 256, rng);
        Matrix b = random_matrix(256, 256, rng);
        Matrix out;
        report("matmul_nt",
               time_ms([&] { kernels::ref::matmul_nt(a, b, out); }, reps),
               time_ms([&] { kernels::matmul_nt(a, b, out); }, reps));
    }
    {
        Matrix a = random_matrix(2048, 256, rng);
        Matrix b = random_matrix(2048, 256, rng);
        Matrix out;
        report("matmul_tn",
               time_ms([&] { kernels::ref::matmul_tn(a, b, out); }, reps),
               time_ms([&] { kernels::matmul_tn(a, b, out); }, reps));
    }
    {
        Matrix a = random_matrix(2048, 256, rng);
        Matrix out;
        report("colsum",
               time_ms([&] { kernels::ref::colsum(a, out); }, reps),
               time_ms([&] { kernels::colsum(a, out); }, reps));
    }
    {
        Matrix table = random_matrix(100000, 64, rng);
        std::vector<uint32_t> idx(2048 * 24);
        for (auto& i : idx) i = static_cast<uint32_t>(rng.uniform_int(0, table.rows - 1));
        Matrix out;
        report("row_gather",
               time_ms([&] { kernels::ref::row_gather(table, idx, out); }, reps),
               time_ms([&] { kernels::row_gather(table, idx, out); }, reps));
    }
    {
        Matrix table = random_matrix(100000, 64, rng);
        std::vector<double> norms;
        report("l1_row_norms",
               time_ms([&] { kernels::ref::l1_row_norms(table, norms); }, reps),
               time_ms([&] { kernels::l1_row_norms(table, norms); }, reps));
    }
    {
        const size_t B = 2048, n = 24, D = 64, rows = 100000;
        Matrix dx0 = random_matrix(B, n * D, rng);
        std::vector<uint32_t> idx(B * n);
        for (auto& i : idx) i = static_cast<uint32_t>(rng.uniform_int(0, rows - 1));
        report("scatter_rows",
               time_ms([&] { kernels::ref::scatter_rows(dx0, idx, n, D, rows); }, reps),
               time_ms([&] { kernels::scatter_rows(dx0, idx, n, D, rows); }, reps));
    }
    return 0;
}
