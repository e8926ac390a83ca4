#include <vector>

#include "doctest.h"
#include "optembed/kernels.hpp"
#include "optembed/rng.hpp"

using namespace optembed;

namespace {

Matrix random_matrix(size_t r, size_t c, Rng& rng) {
    Matrix m(r, c);
    for (double& v : m.data) v = rng.uniform() * 4.0 - 2.0;
    return m;
}

bool bit_equal(const Matrix& a, const Matrix& b) {
    if (!a.same_shape(b)) return false;
    for (size_t i = 0; i < a.size(); ++i) {
        if (a.data[i] != b.data[i]) return false;
    }
    return true;
}

}  // namespace

TEST_CASE("matmul matches hand-computed product") {
    Matrix a(2, 3);
    a.data = {1, 2, 3, 4, 5, 6};
    Matrix b(3, 2);
    b.data = {7, 8, 9, 10, 11, 12};
    Matrix out;
    kernels::matmul(a, b, out);
    CHECK(out(0, 0) == 58);
    CHECK(out(0, 1) == 64);
    CHECK(out(1, 0) == 139);
    CHECK(out(1, 1) == 154);
}

TEST_CASE("matmul shape mismatch names both shapes") {
    Matrix a(2, 3), b(2, 2), out;
    CHECK_THROWS_WITH_AS(kernels::matmul(a, b, out),
                         doctest::Contains("2x3"), std::invalid_argument);
}

TEST_CASE("parallel kernels are bit-identical to the serial reference") {
    Rng rng(31);
    for (int trial = 0; trial < 20; ++trial) {
        const size_t r = 1 + rng.uniform_int(0, 60);
        const size_t k = 1 + rng.uniform_int(0, 60);
        const size_t c = 1 + rng.uniform_int(0, 60);
        Matrix a = random_matrix(r, k, rng);
        Matrix b = random_matrix(k, c, rng);
        Matrix bt = random_matrix(c, k, rng);
        Matrix a2 = random_matrix(k, r, rng);

        Matrix got, want;
        kernels::matmul(a, b, got);
        kernels::ref::matmul(a, b, want);
        CHECK(bit_equal(got, want));

        kernels::matmul_nt(a, bt, got);
        kernels::ref::matmul_nt(a, bt, want);
        CHECK(bit_equal(got, want));

        kernels::matmul_tn(a2, b, got);
        kernels::ref::matmul_tn(a2, b, want);
        CHECK(bit_equal(got, want));

        kernels::colsum(a, got);
        kernels::ref::colsum(a, want);
        CHECK(bit_equal(got, want));
    }
}

TEST_CASE("gather/scatter/norms match the serial reference bitwise") {
    Rng rng(47);
    for (int trial = 0; trial < 20; ++trial) {
        const size_t rows = 5 + rng.uniform_int(0, 200);
        const size_t dim = 1 + rng.uniform_int(0, 15);
        const size_t n_fields = 1 + rng.uniform_int(0, 5);
        const size_t batch = 1 + rng.uniform_int(0, 64);
        Matrix table = random_matrix(rows, dim, rng);
        std::vector<uint32_t> idx(batch * n_fields);
        for (auto& i : idx) i = static_cast<uint32_t>(rng.uniform_int(0, rows - 1));

        Matrix got, want;
        kernels::row_gather(table, idx, got);
        kernels::ref::row_gather(table, idx, want);
        CHECK(bit_equal(got, want));

        std::vector<double> n1, n2;
        kernels::l1_row_norms(table, n1);
        kernels::ref::l1_row_norms(table, n2);
        CHECK(n1 == n2);

        Matrix dx0 = random_matrix(batch, n_fields * dim, rng);
        RowGrads g1 = kernels::scatter_rows(dx0, idx, n_fields, dim, rows);
        RowGrads g2 = kernels::ref::scatter_rows(dx0, idx, n_fields, dim, rows);
        CHECK(g1.rows == g2.rows);
        CHECK(bit_equal(g1.grads, g2.grads));
    }
}

TEST_CASE("scatter accumulates duplicate indices and skips untouched rows") {
    // Two batch rows hit table row 3 in field 0; row 9 is never referenced.
    Matrix dx0(2, 4);  // n=2 fields, dim=2
    dx0.data = {1, 2, 3, 4, 5, 6, 7, 8};
    std::vector<uint32_t> idx = {3, 5, 3, 5};
    RowGrads g = kernels::scatter_rows(dx0, idx, 2, 2, 10);
    REQUIRE(g.rows == std::vector<uint32_t>{3, 5});
    CHECK(g.grads(0, 0) == 1 + 5);
    CHECK(g.grads(0, 1) == 2 + 6);
    CHECK(g.grads(1, 0) == 3 + 7);
    CHECK(g.grads(1, 1) == 4 + 8);
}

TEST_CASE("gather/scatter round trip is linear in duplicates") {
    // A row referenced twice receives exactly twice the single-reference grad.
    Matrix dx0(2, 2);
    dx0.data = {1.5, -2.5, 1.5, -2.5};
    std::vector<uint32_t> once = {4, 6};
    std::vector<uint32_t> twice = {4, 4};
    RowGrads g_once = kernels::scatter_rows(dx0, once, 1, 2, 8);
    RowGrads g_twice = kernels::scatter_rows(dx0, twice, 1, 2, 8);
    CHECK(g_twice.grads(0, 0) == 2 * g_once.grads(0, 0));
    CHECK(g_twice.grads(0, 1) == 2 * g_once.grads(0, 1));
}
