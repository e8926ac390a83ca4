#include <cmath>

#include "doctest.h"
#include "optembed/model.hpp"
#include "optembed/rng.hpp"
#include "test_util.hpp"

using namespace optembed;
using testutil::make_schema;

namespace {

CtrModel small_model(const FieldSchema& schema, size_t dim, bool bn, uint64_t seed) {
    Rng rng(seed);
    return CtrModel(schema, dim, {8, 4}, bn, "mlp", rng);
}

}  // namespace

TEST_CASE("apply_masks identity reproduces the table") {
    FieldSchema schema = make_schema({3, 4});
    Rng rng(1);
    Matrix E = xavier_init(schema.total, 5, rng);
    MaskedEmbedding me = apply_masks(E, EmbeddingMask::all_ones(schema.total),
                                     DimensionMask::full(2, 5), schema);
    CHECK(me.table.data == E.data);
    CHECK(me.row_mask_applied);
    CHECK(me.dim_mask_applied);
}

TEST_CASE("apply_masks zeroes pruned rows and broadcast columns") {
    FieldSchema schema = make_schema({2});
    Matrix E(2, 3);
    E.data = {1, 2, 3, 4, 5, 6};
    EmbeddingMask me = EmbeddingMask::all_ones(2);
    DimensionMask md{{2}};
    MaskedEmbedding out = apply_masks(E, me, md, schema);
    CHECK(out.table.data == std::vector<double>{1, 2, 0, 4, 5, 0});

    me.keep[0] = 0;
    out = apply_masks(E, me, md, schema);
    CHECK(out.table.data == std::vector<double>{0, 0, 0, 4, 5, 0});
}

TEST_CASE("apply_masks rejects length mismatches") {
    FieldSchema schema = make_schema({2, 2});
    Matrix E(4, 3);
    EmbeddingMask wrong;
    wrong.keep = {1, 1};
    CHECK_THROWS_AS(apply_masks(E, wrong, DimensionMask::full(2, 3), schema),
                    std::invalid_argument);
    CHECK_THROWS_AS(apply_masks(E, EmbeddingMask::all_ones(4), DimensionMask{{3}}, schema),
                    std::invalid_argument);
}

TEST_CASE("apply_masks is idempotent") {
    FieldSchema schema = make_schema({4, 3});
    Rng rng(2);
    Matrix E = xavier_init(schema.total, 4, rng);
    EmbeddingMask me = EmbeddingMask::all_ones(schema.total);
    me.keep[1] = 0;
    me.keep[5] = 0;
    DimensionMask md{{2, 3}};
    MaskedEmbedding once = apply_masks(E, me, md, schema);
    MaskedEmbedding twice = apply_masks(once.table, me, md, schema);
    CHECK(once.table.data == twice.table.data);
}

TEST_CASE("fully masked table predicts 0.5 with zero biases") {
    FieldSchema schema = make_schema({3, 3});
    CtrModel model = small_model(schema, 4, true, 3);
    EmbeddingMask none;
    none.keep.assign(schema.total, 0);
    std::vector<uint32_t> idx = {1, 4, 2, 5};
    auto probs = model.forward(idx, none, DimensionMask::full(2, 4), /*train=*/false);
    CHECK(probs[0] == 0.5);
    CHECK(probs[1] == 0.5);
}

TEST_CASE("eval-mode prediction is batch-size independent") {
    FieldSchema schema = make_schema({6, 6, 6});
    CtrModel model = small_model(schema, 4, true, 4);
    Rng rng(5);
    std::vector<uint32_t> idx;
    for (int b = 0; b < 32; ++b) {
        for (size_t f = 0; f < 3; ++f) {
            idx.push_back(schema.fields[f].offset +
                          static_cast<uint32_t>(rng.uniform_int(0, 5)));
        }
    }
    EmbeddingMask me = EmbeddingMask::all_ones(schema.total);
    DimensionMask md = DimensionMask::full(3, 4);
    auto full = model.forward(idx, me, md, false);
    std::vector<uint32_t> one(idx.begin() + 3 * 7, idx.begin() + 3 * 8);
    auto single = model.forward(one, me, md, false);
    CHECK(std::fabs(single[0] - full[7]) < 1e-10);
}

TEST_CASE("zeroing already-masked entries does not change predictions") {
    FieldSchema schema = make_schema({5, 4});
    CtrModel model = small_model(schema, 4, true, 6);
    EmbeddingMask me = EmbeddingMask::all_ones(schema.total);
    me.keep[2] = 0;
    me.keep[7] = 0;
    DimensionMask md{{2, 3}};
    std::vector<uint32_t> idx = {2, 5, 1, 7, 4, 8};
    auto before = model.forward(idx, me, md, false);

    // Zero exactly what the masks hide.
    Matrix& E = model.embedding().E;
    MaskedEmbedding masked = apply_masks(E, me, md, schema);
    E = masked.table;
    auto after = model.forward(idx, me, md, false);
    CHECK(before == after);
}

TEST_CASE("backward requires a forward call and validates sizes") {
    FieldSchema schema = make_schema({3});
    CtrModel model = small_model(schema, 2, false, 7);
    std::vector<double> d = {0.1};
    CHECK_THROWS_AS(model.backward(d), std::logic_error);
    std::vector<uint32_t> idx = {1};
    model.forward(idx, EmbeddingMask::all_ones(3), DimensionMask::full(1, 2), false);
    std::vector<double> wrong = {0.1, 0.2};
    CHECK_THROWS_AS(model.backward(wrong), std::invalid_argument);
}

TEST_CASE("forward rejects out-of-field indices naming row and field") {
    FieldSchema schema = make_schema({3, 3});
    CtrModel model = small_model(schema, 2, false, 8);
    std::vector<uint32_t> idx = {1, 1};  // field 1 must be in [3, 6)
    CHECK_THROWS_WITH_AS(model.forward(idx, EmbeddingMask::all_ones(6),
                                       DimensionMask::full(2, 2), false),
                         doctest::Contains("field 1"), std::out_of_range);
}

TEST_CASE("rows not referenced by the batch are absent from the gradient") {
    FieldSchema schema = make_schema({4, 4});
    CtrModel model = small_model(schema, 3, false, 9);
    std::vector<uint32_t> idx = {1, 5, 1, 6};
    EmbeddingMask me = EmbeddingMask::all_ones(8);
    DimensionMask md = DimensionMask::full(2, 3);
    model.forward(idx, me, md, false);
    std::vector<double> dprobs = {0.3, -0.2};
    RowGrads g = model.backward(dprobs);
    CHECK(g.rows == std::vector<uint32_t>{1, 5, 6});
}

TEST_CASE("duplicated feature indices accumulate gradients linearly") {
    FieldSchema schema = make_schema({4, 4});
    // No batch norm: rows are independent, so the combined batch gradient for
    // a shared index must equal the sum of single-row gradients.
    CtrModel model = small_model(schema, 3, false, 10);
    EmbeddingMask me = EmbeddingMask::all_ones(8);
    DimensionMask md = DimensionMask::full(2, 3);

    std::vector<uint32_t> both = {2, 5, 2, 6};
    model.forward(both, me, md, false);
    std::vector<double> dprobs = {1.0, 1.0};
    RowGrads combined = model.backward(dprobs);

    std::vector<uint32_t> first = {2, 5};
    model.forward(first, me, md, false);
    std::vector<double> one = {1.0};
    RowGrads g1 = model.backward(one);
    std::vector<uint32_t> second = {2, 6};
    model.forward(second, me, md, false);
    RowGrads g2 = model.backward(one);

    auto row_of = [](const RowGrads& g, uint32_t row) {
        for (size_t u = 0; u < g.count(); ++u) {
            if (g.rows[u] == row) return std::vector<double>(g.grads.row_ptr(u),
                                                             g.grads.row_ptr(u) + g.grads.cols);
        }
        return std::vector<double>();
    };
    auto sum = row_of(g1, 2);
    auto other = row_of(g2, 2);
    for (size_t c = 0; c < sum.size(); ++c) sum[c] += other[c];
    auto got = row_of(combined, 2);
    for (size_t c = 0; c < sum.size(); ++c) CHECK(got[c] == doctest::Approx(sum[c]).epsilon(1e-12));
}

TEST_CASE("gradient positions hidden by the dimension mask are zero") {
    FieldSchema schema = make_schema({4, 4});
    CtrModel model = small_model(schema, 4, false, 11);
    EmbeddingMask me = EmbeddingMask::all_ones(8);
    DimensionMask md{{2, 1}};
    std::vector<uint32_t> idx = {1, 5, 3, 7};
    model.forward(idx, me, md, false);
    std::vector<double> dprobs = {0.5, -0.5};
    RowGrads g = model.backward(dprobs);
    for (size_t u = 0; u < g.count(); ++u) {
        const uint32_t field = g.rows[u] < 4 ? 0 : 1;
        for (size_t c = md.d[field]; c < 4; ++c) CHECK(g.grads(u, c) == 0.0);
    }
}

TEST_CASE("full-model embedding gradient matches finite differences") {
    FieldSchema schema = make_schema({5, 4});
    CtrModel model = small_model(schema, 3, /*bn=*/false, 12);
    EmbeddingMask me = EmbeddingMask::all_ones(schema.total);
    DimensionMask md = DimensionMask::full(2, 3);
    std::vector<uint32_t> idx = {1, 6, 3, 5, 2, 8};
    std::vector<double> labels = {1.0, 0.0, 1.0};

    auto loss = [&] {
        auto probs = model.forward(idx, me, md, false);
        return bce_loss(labels, probs).loss;
    };
    auto probs = model.forward(idx, me, md, false);
    BceResult bce = bce_loss(labels, probs);
    RowGrads g = model.backward(bce.dprobs);

    Matrix& E = model.embedding().E;
    for (size_t u = 0; u < g.count(); ++u) {
        for (size_t c = 0; c < 3; ++c) {
            double& entry = E(g.rows[u], c);
            const double orig = entry;
            entry = orig + 1e-5;
            const double fp = loss();
            entry = orig - 1e-5;
            const double fm = loss();
            entry = orig;
            const double numeric = (fp - fm) / 2e-5;
            const double analytic = g.grads(u, c);
            const double denom = std::max({std::fabs(numeric), std::fabs(analytic), 1e-3});
            CHECK(std::fabs(numeric - analytic) / denom < 1e-5);
        }
    }
}

TEST_CASE("full-model parameter gradients match finite differences") {
    FieldSchema schema = make_schema({4, 5});
    CtrModel model = small_model(schema, 3, /*bn=*/false, 14);
    EmbeddingMask me = EmbeddingMask::all_ones(schema.total);
    DimensionMask md = DimensionMask::full(2, 3);
    std::vector<uint32_t> idx = {2, 5, 1, 8};
    std::vector<double> labels = {1.0, 0.0};

    auto loss = [&] {
        auto probs = model.forward(idx, me, md, false);
        return bce_loss(labels, probs).loss;
    };
    auto probs = model.forward(idx, me, md, false);
    model.backward(bce_loss(labels, probs).dprobs);

    auto& mlp = dynamic_cast<MlpInteraction&>(model.interaction());
    auto check_entries = [&](Matrix& param, const Matrix& grad) {
        for (size_t i = 0; i < param.size(); ++i) {
            double& entry = param.data[i];
            const double orig = entry;
            entry = orig + 1e-5;
            const double fp = loss();
            entry = orig - 1e-5;
            const double fm = loss();
            entry = orig;
            const double numeric = (fp - fm) / 2e-5;
            const double denom = std::max({std::fabs(numeric), std::fabs(grad.data[i]), 1e-3});
            CHECK(std::fabs(numeric - grad.data[i]) / denom < 1e-5);
        }
    };
    for (auto& layer : mlp.hidden_layers()) {
        check_entries(layer.W, layer.grad_w);
        check_entries(layer.b, layer.grad_b);
    }
    check_entries(mlp.head().W, mlp.head().grad_w);
    check_entries(mlp.head().b, mlp.head().grad_b);
}

TEST_CASE("model serialization round-trips predictions bitwise") {
    FieldSchema schema = make_schema({6, 5});
    CtrModel model = small_model(schema, 4, true, 13);
    EmbeddingMask me = EmbeddingMask::all_ones(schema.total);
    DimensionMask md = DimensionMask::full(2, 4);
    std::vector<uint32_t> idx = {1, 7, 4, 9};
    auto before = model.forward(idx, me, md, false);

    BinaryWriter w;
    model.serialize(w);
    BinaryReader r(w.bytes());
    CtrModel loaded;
    loaded.deserialize(r);
    auto after = loaded.forward(idx, me, md, false);
    CHECK(before == after);
}
