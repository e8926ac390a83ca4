#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "optembed/config.hpp"
#include "optembed/data.hpp"
#include "optembed/model.hpp"
#include "optembed/prune.hpp"

namespace optembed {

// Named RNG streams derived from the master seed. Each pipeline phase owns a
// stream so re-running one phase reproduces it regardless of what ran before.
enum class RngStream : uint64_t {
    split = 1,
    synth = 2,
    supernet_init = 3,
    supernet_train = 4,
    search = 5,
    retrain_init = 6,
    retrain_train = 7,
};

inline Rng phase_rng(uint64_t seed, RngStream stream) {
    return Rng::stream(seed, static_cast<uint64_t>(stream));
}

// --- metrics -----------------------------------------------------------------

// Probability that a uniformly random positive outranks a uniformly random
// negative, ties counted 0.5; computed from average ranks. Throws when only
// one class is present.
double auc(std::span<const uint8_t> labels, std::span<const double> scores);

// Mean negative cross-entropy with the same 1e-7 probability clamp as the
// training loss.
double logloss(std::span<const uint8_t> labels, std::span<const double> scores);

// 1 - (#remaining params) / (|f| * D) where a surviving row of field i keeps
// d_i parameters.
double sparsity(const EmbeddingMask& me, const DimensionMask& md, const FieldSchema& schema,
                uint32_t D);

struct MetricRecord {
    std::string phase;
    uint64_t step = 0;  // epoch or search iteration
    double auc = 0.0;
    double logloss = 0.0;
    double sparsity = 0.0;
    uint64_t kept_rows = 0;
    double mean_dim = 0.0;
};

void write_metrics_tsv(const std::string& path, const std::vector<MetricRecord>& records);

// --- checkpoint ----------------------------------------------------------------

// One container for both the supernet and the retrained model: magic "OECK",
// version, then named length-prefixed sections; tensors carry shape headers
// and little-endian 64-bit floats throughout.
struct Checkpoint {
    std::string kind;  // "supernet" | "final"
    CtrModel model;
    ThresholdVector thresholds;          // supernet only
    EmbeddingMask me_star;               // best mask (supernet) / training mask (final)
    DimensionMask md_star;               // final only
    std::vector<double> val_auc_history;
    std::vector<EmbeddingMask> me_history;  // supernet: mask at each epoch end
    uint32_t best_epoch = 0;
    double best_val_auc = 0.0;
    std::array<uint64_t, 4> rng_state{};
    std::string config_text;
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

// --- training phases -----------------------------------------------------------

// Supernet training with simultaneous pruning: per mini-batch the embedding
// mask is recomputed from the current (E, t), one dimension mask is sampled
// fresh and shared across the batch, and E, t, W update from the split
// gradient, the sparse regularizer and Adam respectively. Validation AUC for
// epoch selection uses the full dimension mask. Early-stops on val AUC; the
// returned checkpoint holds the best epoch's state and its mask as me_star.
Checkpoint train_supernet(const EncodedDataset& train, const EncodedDataset& val,
                          const FieldSchema& schema, const RunConfig& cfg,
                          std::vector<MetricRecord>* metrics = nullptr);

// From-scratch training under fixed masks: fresh Xavier init, no threshold
// updates, no dimension sampling, learning rate and l2 reused from the
// supernet phase. Identity masks make this the plain baseline.
Checkpoint retrain(const EncodedDataset& train, const EncodedDataset& val,
                   const FieldSchema& schema, const EmbeddingMask& me_star,
                   const DimensionMask& md_star, const RunConfig& cfg,
                   const std::string& phase_name = "retrain",
                   std::vector<MetricRecord>* metrics = nullptr);

// Validation AUC of a checkpointed model under the given masks (eval mode).
double evaluate_checkpoint(Checkpoint& ckpt, const EncodedDataset& data, const EmbeddingMask& me,
                           const DimensionMask& md, size_t eval_batch);

}  // namespace optembed
