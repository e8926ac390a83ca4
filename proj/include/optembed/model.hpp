#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "optembed/data.hpp"
#include "optembed/io.hpp"
#include "optembed/masks.hpp"
#include "optembed/nn.hpp"

namespace optembed {

struct EmbeddingTable {
    Matrix E;          // |f| x D
    RowAdamState opt;

    EmbeddingTable() = default;
    EmbeddingTable(size_t rows, size_t dim, Rng& rng)
        : E(xavier_init(rows, dim, rng)), opt(rows, dim) {}

    size_t dim() const { return E.cols; }
};

// Effective table E ⊙ m_e ⊙ expand(m_d) with flags recording which masks were
// applied. m_e broadcasts over columns; m_d broadcasts each field's kept-column
// prefix over that field's rows.
struct MaskedEmbedding {
    Matrix table;
    bool row_mask_applied = false;
    bool dim_mask_applied = false;
};

MaskedEmbedding apply_masks(const Matrix& E, const EmbeddingMask& me, const DimensionMask& md,
                            const FieldSchema& schema);

// Feature-interaction stage: consumes the concatenated masked embeddings and
// produces one logit per row. Only the MLP variant ships; the interface keeps
// the model open to other interaction types.
class InteractionLayer {
public:
    virtual ~InteractionLayer() = default;
    virtual Matrix forward(const Matrix& x0, bool train) = 0;      // B x 1 logits
    virtual Matrix backward(const Matrix& dlogits) = 0;            // d x0
    virtual void step(const AdamHyper& h) = 0;
    virtual std::string kind() const = 0;
    virtual void serialize(BinaryWriter& w) const = 0;
    virtual void deserialize(BinaryReader& r) = 0;
};

// Hidden stack of affine (+ optional batch norm) + relu, then a single-unit
// affine head. Batch norm is applied to hidden layers only, never to the
// embedding output, so running statistics do not depend on the sampled
// dimension mask.
class MlpInteraction : public InteractionLayer {
public:
    MlpInteraction() = default;
    MlpInteraction(size_t input_dim, const std::vector<size_t>& hidden, bool batch_norm, Rng& rng);

    Matrix forward(const Matrix& x0, bool train) override;
    Matrix backward(const Matrix& dlogits) override;
    void step(const AdamHyper& h) override;
    std::string kind() const override { return "mlp"; }
    void serialize(BinaryWriter& w) const override;
    void deserialize(BinaryReader& r) override;

    std::vector<Affine>& hidden_layers() { return hidden_; }
    std::vector<BatchNorm>& batch_norms() { return bns_; }
    Affine& head() { return head_; }

private:
    bool use_bn_ = false;
    std::vector<Affine> hidden_;
    std::vector<BatchNorm> bns_;
    std::vector<Relu> relus_;
    Affine head_;
};

std::unique_ptr<InteractionLayer> make_interaction(const std::string& kind, size_t input_dim,
                                                   const std::vector<size_t>& hidden,
                                                   bool batch_norm, Rng& rng);

class CtrModel {
public:
    CtrModel() = default;
    CtrModel(const FieldSchema& schema, size_t dim, const std::vector<size_t>& mlp_dims,
             bool batch_norm, const std::string& interaction_kind, Rng& rng);

    // flat_idx holds B*n global indices in row-major batch order; masks are
    // applied on the fly during the gather. Returns one click probability per
    // batch row.
    std::vector<double> forward(std::span<const uint32_t> flat_idx, const EmbeddingMask& me,
                                const DimensionMask& md, bool train);

    // Gradient of the loss w.r.t. the masked embedding values for exactly the
    // rows the batch touched (dimension-masked positions already zeroed), with
    // interaction parameter gradients stashed for step(). Requires a matching
    // forward call.
    RowGrads backward(std::span<const double> dprobs);

    void step_interaction(const AdamHyper& h) { interaction_->step(h); }

    EmbeddingTable& embedding() { return emb_; }
    const EmbeddingTable& embedding() const { return emb_; }
    InteractionLayer& interaction() { return *interaction_; }
    const InteractionLayer& interaction() const { return *interaction_; }

    size_t n_fields() const { return n_fields_; }
    size_t dim() const { return dim_; }
    size_t table_rows() const { return emb_.E.rows; }
    uint32_t field_of_row(uint32_t row) const { return row_field_[row]; }

    void serialize(BinaryWriter& w) const;
    void deserialize(BinaryReader& r);

private:
    EmbeddingTable emb_;
    std::unique_ptr<InteractionLayer> interaction_;
    std::vector<uint32_t> row_field_;
    std::vector<uint32_t> field_offsets_;
    std::vector<uint32_t> field_cards_;
    size_t n_fields_ = 0;
    size_t dim_ = 0;

    bool has_forward_ = false;
    std::vector<uint32_t> idx_cache_;
    DimensionMask md_cache_;
    std::vector<double> prob_cache_;
};

// Forward-only scoring over a whole dataset in fixed-size batches (eval mode).
std::vector<double> predict(CtrModel& model, const EncodedDataset& data, const EmbeddingMask& me,
                            const DimensionMask& md, size_t batch_size);

}  // namespace optembed
