#include "optembed/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "optembed/kernels.hpp"

namespace optembed {

MaskedEmbedding apply_masks(const Matrix& E, const EmbeddingMask& me, const DimensionMask& md,
                            const FieldSchema& schema) {
    if (me.keep.size() != E.rows) {
        throw std::invalid_argument("apply_masks: embedding mask has " +
                                    std::to_string(me.keep.size()) + " entries, table has " +
                                    std::to_string(E.rows) + " rows");
    }
    validate_dim_mask(md, schema.n_fields(), static_cast<uint32_t>(E.cols));

    MaskedEmbedding out;
    out.table = Matrix(E.rows, E.cols);
    for (size_t f = 0; f < schema.n_fields(); ++f) {
        const auto& field = schema.fields[f];
        const uint32_t d = md.d[f];
        for (uint32_t local = 0; local < field.cardinality; ++local) {
            const uint32_t j = field.offset + local;
            if (!me.keep[j]) continue;  // row stays zero
            const double* src = E.row_ptr(j);
            double* dst = out.table.row_ptr(j);
            for (uint32_t c = 0; c < d; ++c) dst[c] = src[c];
        }
    }
    out.row_mask_applied = true;
    out.dim_mask_applied = true;
    return out;
}

// --- MlpInteraction ---------------------------------------------------------

MlpInteraction::MlpInteraction(size_t input_dim, const std::vector<size_t>& hidden,
                               bool batch_norm, Rng& rng)
    : use_bn_(batch_norm) {
    size_t in = input_dim;
    for (size_t width : hidden) {
        hidden_.emplace_back(in, width, rng);
        if (use_bn_) bns_.emplace_back(width);
        relus_.emplace_back();
        in = width;
    }
    head_ = Affine(in, 1, rng);
}

Matrix MlpInteraction::forward(const Matrix& x0, bool train) {
    Matrix x = x0;
    for (size_t l = 0; l < hidden_.size(); ++l) {
        x = hidden_[l].forward(x);
        if (use_bn_) x = bns_[l].forward(x, train);
        x = relus_[l].forward(x);
    }
    return head_.forward(x);
}

Matrix MlpInteraction::backward(const Matrix& dlogits) {
    Matrix d = head_.backward(dlogits);
    for (size_t l = hidden_.size(); l-- > 0;) {
        d = relus_[l].backward(d);
        if (use_bn_) d = bns_[l].backward(d);
        d = hidden_[l].backward(d);
    }
    return d;
}

void MlpInteraction::step(const AdamHyper& h) {
    for (auto& a : hidden_) a.step(h);
    for (auto& bn : bns_) bn.step(h);
    head_.step(h);
}

void MlpInteraction::serialize(BinaryWriter& w) const {
    w.u8(use_bn_ ? 1 : 0);
    w.u32(static_cast<uint32_t>(hidden_.size()));
    auto write_adam = [&w](const AdamState& st) {
        w.matrix(st.m);
        w.matrix(st.v);
        w.u64(st.step);
    };
    auto write_affine = [&](const Affine& a) {
        w.matrix(a.W);
        w.matrix(a.b);
        write_adam(a.opt_w);
        write_adam(a.opt_b);
    };
    for (const auto& a : hidden_) write_affine(a);
    for (const auto& bn : bns_) {
        w.matrix(bn.gamma);
        w.matrix(bn.beta);
        w.matrix(bn.running_mean);
        w.matrix(bn.running_var);
        write_adam(bn.opt_g);
        write_adam(bn.opt_b);
    }
    write_affine(head_);
}

void MlpInteraction::deserialize(BinaryReader& r) {
    use_bn_ = r.u8() != 0;
    const uint32_t n_hidden = r.u32();
    auto read_adam = [&r](AdamState& st) {
        st.m = r.matrix();
        st.v = r.matrix();
        st.step = r.u64();
    };
    auto read_affine = [&](Affine& a) {
        a.W = r.matrix();
        a.b = r.matrix();
        read_adam(a.opt_w);
        read_adam(a.opt_b);
    };
    hidden_.assign(n_hidden, Affine());
    relus_.assign(n_hidden, Relu());
    for (auto& a : hidden_) read_affine(a);
    bns_.clear();
    if (use_bn_) {
        bns_.assign(n_hidden, BatchNorm());
        for (auto& bn : bns_) {
            bn.gamma = r.matrix();
            bn.beta = r.matrix();
            bn.running_mean = r.matrix();
            bn.running_var = r.matrix();
            read_adam(bn.opt_g);
            read_adam(bn.opt_b);
        }
    }
    read_affine(head_);
}

std::unique_ptr<InteractionLayer> make_interaction(const std::string& kind, size_t input_dim,
                                                   const std::vector<size_t>& hidden,
                                                   bool batch_norm, Rng& rng) {
    if (kind == "mlp") {
        return std::make_unique<MlpInteraction>(input_dim, hidden, batch_norm, rng);
    }
    throw std::invalid_argument("unknown interaction kind '" + kind + "'");
}

// --- CtrModel ----------------------------------------------------------------

CtrModel::CtrModel(const FieldSchema& schema, size_t dim, const std::vector<size_t>& mlp_dims,
                   bool batch_norm, const std::string& interaction_kind, Rng& rng)
    : emb_(schema.total, dim, rng),
      n_fields_(schema.n_fields()),
      dim_(dim) {
    row_field_.resize(schema.total);
    for (size_t f = 0; f < schema.n_fields(); ++f) {
        const auto& field = schema.fields[f];
        field_offsets_.push_back(field.offset);
        field_cards_.push_back(field.cardinality);
        for (uint32_t local = 0; local < field.cardinality; ++local) {
            row_field_[field.offset + local] = static_cast<uint32_t>(f);
        }
    }
    interaction_ = make_interaction(interaction_kind, n_fields_ * dim_, mlp_dims, batch_norm, rng);
}

std::vector<double> CtrModel::forward(std::span<const uint32_t> flat_idx, const EmbeddingMask& me,
                                      const DimensionMask& md, bool train) {
    if (flat_idx.size() % n_fields_ != 0) {
        throw std::invalid_argument("forward: index count not a multiple of field count");
    }
    if (me.keep.size() != table_rows()) {
        throw std::invalid_argument("forward: embedding mask length " +
                                    std::to_string(me.keep.size()) + " vs table rows " +
                                    std::to_string(table_rows()));
    }
    validate_dim_mask(md, n_fields_, static_cast<uint32_t>(dim_));
    const size_t B = flat_idx.size() / n_fields_;
    for (size_t b = 0; b < B; ++b) {
        for (size_t i = 0; i < n_fields_; ++i) {
            const uint32_t j = flat_idx[b * n_fields_ + i];
            if (j < field_offsets_[i] || j >= field_offsets_[i] + field_cards_[i]) {
                throw std::out_of_range("forward: row " + std::to_string(b) + " field " +
                                        std::to_string(i) + " index " + std::to_string(j) +
                                        " outside field range");
            }
        }
    }

    Matrix gathered;
    kernels::row_gather(emb_.E, flat_idx, gathered);
    // (B*n) x D rows laid out contiguously are exactly the B x (n*D)
    // concatenation in field order.
    Matrix x0;
    x0.rows = B;
    x0.cols = n_fields_ * dim_;
    x0.data = std::move(gathered.data);

    for (size_t b = 0; b < B; ++b) {
        double* row = x0.row_ptr(b);
        for (size_t i = 0; i < n_fields_; ++i) {
            const uint32_t j = flat_idx[b * n_fields_ + i];
            double* block = row + i * dim_;
            if (!me.keep[j]) {
                for (size_t c = 0; c < dim_; ++c) block[c] = 0.0;
            } else {
                for (size_t c = md.d[i]; c < dim_; ++c) block[c] = 0.0;
            }
        }
    }

    Matrix logits = interaction_->forward(x0, train);
    prob_cache_.resize(B);
    for (size_t b = 0; b < B; ++b) prob_cache_[b] = 1.0 / (1.0 + std::exp(-logits(b, 0)));

    idx_cache_.assign(flat_idx.begin(), flat_idx.end());
    md_cache_ = md;
    has_forward_ = true;
    return prob_cache_;
}

RowGrads CtrModel::backward(std::span<const double> dprobs) {
    if (!has_forward_) throw std::logic_error("backward called without a matching forward");
    const size_t B = prob_cache_.size();
    if (dprobs.size() != B) {
        throw std::invalid_argument("backward: " + std::to_string(dprobs.size()) +
                                    " gradients vs batch of " + std::to_string(B));
    }
    Matrix dlogits(B, 1);
    for (size_t b = 0; b < B; ++b) {
        const double p = prob_cache_[b];
        dlogits(b, 0) = dprobs[b] * p * (1.0 - p);
    }
    Matrix dx0 = interaction_->backward(dlogits);
    RowGrads g = kernels::scatter_rows(dx0, idx_cache_, n_fields_, dim_, table_rows());
    for (size_t u = 0; u < g.count(); ++u) {
        const uint32_t field = row_field_[g.rows[u]];
        double* grad = g.grads.row_ptr(u);
        for (size_t c = md_cache_.d[field]; c < dim_; ++c) grad[c] = 0.0;
    }
    has_forward_ = false;
    return g;
}

void CtrModel::serialize(BinaryWriter& w) const {
    w.matrix(emb_.E);
    w.matrix(emb_.opt.m);
    w.matrix(emb_.opt.v);
    w.u64(emb_.opt.row_step.size());
    for (uint64_t s : emb_.opt.row_step) w.u64(s);
    w.u64(n_fields_);
    w.u64(dim_);
    w.u64(row_field_.size());
    for (uint32_t f : row_field_) w.u32(f);
    for (uint32_t o : field_offsets_) w.u32(o);
    for (uint32_t c : field_cards_) w.u32(c);
    w.str(interaction_->kind());
    interaction_->serialize(w);
}

void CtrModel::deserialize(BinaryReader& r) {
    emb_.E = r.matrix();
    emb_.opt.m = r.matrix();
    emb_.opt.v = r.matrix();
    emb_.opt.row_step.resize(r.u64());
    for (auto& s : emb_.opt.row_step) s = r.u64();
    n_fields_ = r.u64();
    dim_ = r.u64();
    row_field_.resize(r.u64());
    for (auto& f : row_field_) f = r.u32();
    field_offsets_.resize(n_fields_);
    for (auto& o : field_offsets_) o = r.u32();
    field_cards_.resize(n_fields_);
    for (auto& c : field_cards_) c = r.u32();
    const std::string kind = r.str();
    if (kind == "mlp") {
        interaction_ = std::make_unique<MlpInteraction>();
    } else {
        throw std::runtime_error("checkpoint has unknown interaction kind '" + kind + "'");
    }
    interaction_->deserialize(r);
    has_forward_ = false;
}

std::vector<double> predict(CtrModel& model, const EncodedDataset& data, const EmbeddingMask& me,
                            const DimensionMask& md, size_t batch_size) {
    std::vector<double> scores;
    scores.reserve(data.n_rows());
    const size_t n = model.n_fields();
    for (size_t begin = 0; begin < data.n_rows(); begin += batch_size) {
        const size_t end = std::min(begin + batch_size, data.n_rows());
        std::span<const uint32_t> idx(data.indices.data() + begin * n, (end - begin) * n);
        auto probs = model.forward(idx, me, md, /*train=*/false);
        scores.insert(scores.end(), probs.begin(), probs.end());
    }
    return scores;
}

}  // namespace optembed
