#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "optembed/data.hpp"
#include "optembed/masks.hpp"
#include "optembed/matrix.hpp"
#include "optembed/nn.hpp"

namespace optembed {

// Trainable field-wise pruning thresholds, one per field, with a dedicated
// Adam optimizer (no weight decay; the sparse regularizer supplies the
// pressure toward larger thresholds).
struct ThresholdVector {
    Matrix t;  // 1 x n
    AdamState opt;

    ThresholdVector() = default;
    explicit ThresholdVector(size_t n_fields, double init = 0.0)
        : t(1, n_fields, init), opt(1, n_fields) {}

    size_t n_fields() const { return t.cols; }
};

// Per-row L1 norms of the embedding table.
std::vector<double> l1_norms(const Matrix& E);

// 1 iff x > 0 strictly; 0 at x = 0.
inline double unit_step(double x) { return x > 0.0 ? 1.0 : 0.0; }

// Long-tail surrogate for the unit step's derivative:
//   2 - 4|x|  for |x| <= 0.4
//   0.4       for 0.4 < |x| <= 1
//   0         otherwise
double longtail_H(double x);

// m_e[j] = unit_step(L1(E row j) - t[field(j)]).
EmbeddingMask gen_embedding_mask(const Matrix& E, const Matrix& t, const FieldSchema& schema);

struct PruneGrads {
    RowGrads dE;  // same touched rows as the incoming gradient
    Matrix dt;    // 1 x n
};

// Splits the masked-embedding gradient into the performance part dE_hat ⊙ m_e
// and the structure part dE_hat ⊙ E ⊙ H(L1(e_j) - t_k) ⊙ sign(E); the
// threshold gradient applies the same surrogate through -t, summed per field
// over the batch-touched rows:
//   dt[k] -= H(L1(e_j) - t_k) * sum_c dE_hat[j,c] * E[j,c].
// The structure part can push a pruned row back above its threshold, which is
// what lets an accidentally removed embedding recover.
PruneGrads masked_embed_grads(const RowGrads& de_hat, const Matrix& E, const EmbeddingMask& me,
                              const Matrix& t, const FieldSchema& schema);

struct SparseRegResult {
    double value;  // sum_i exp(-t_i)
    Matrix dt;     // 1 x n, d value / d t_i = -exp(-t_i)
};
SparseRegResult sparse_reg(const Matrix& t);

// Scatter of (frequency, L1 norm) per feature value with a per-field Pearson
// correlation. Fields where either variable is constant are flagged degenerate
// and report a correlation of 0.
struct NormFrequencyField {
    std::string field_name;
    std::vector<uint32_t> feature_ids;  // global indices
    std::vector<uint64_t> frequencies;
    std::vector<double> l1;
    double pearson = 0.0;
    bool degenerate = false;
};

std::vector<NormFrequencyField> norm_frequency_report(const Matrix& E,
                                                      const std::vector<uint64_t>& frequencies,
                                                      const FieldSchema& schema);

// Tab-separated scatter data (field, feature_id, frequency, l1_norm) followed
// by one summary file row per field.
void write_norm_frequency_scatter(const std::vector<NormFrequencyField>& report,
                                  const std::string& scatter_path,
                                  const std::string& summary_path);

}  // namespace optembed
