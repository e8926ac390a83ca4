#include "optembed/prune.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "optembed/kernels.hpp"

namespace optembed {

std::vector<double> l1_norms(const Matrix& E) {
    std::vector<double> out;
    kernels::l1_row_norms(E, out);
    return out;
}

double longtail_H(double x) {
    const double ax = std::fabs(x);
    if (ax <= 0.4) return 2.0 - 4.0 * ax;
    if (ax <= 1.0) return 0.4;
    return 0.0;
}

EmbeddingMask gen_embedding_mask(const Matrix& E, const Matrix& t, const FieldSchema& schema) {
    if (t.cols != schema.n_fields()) {
        throw std::invalid_argument("gen_embedding_mask: threshold length " +
                                    std::to_string(t.cols) + " vs " +
                                    std::to_string(schema.n_fields()) + " fields");
    }
    if (E.rows != schema.total) {
        throw std::invalid_argument("gen_embedding_mask: table rows " + std::to_string(E.rows) +
                                    " vs schema total " + std::to_string(schema.total));
    }
    const std::vector<double> norms = l1_norms(E);
    EmbeddingMask mask;
    mask.keep.resize(E.rows);
    for (size_t f = 0; f < schema.n_fields(); ++f) {
        const auto& field = schema.fields[f];
        const double threshold = t(0, f);
        for (uint32_t local = 0; local < field.cardinality; ++local) {
            const uint32_t j = field.offset + local;
            mask.keep[j] = static_cast<uint8_t>(unit_step(norms[j] - threshold));
        }
    }
    return mask;
}

PruneGrads masked_embed_grads(const RowGrads& de_hat, const Matrix& E, const EmbeddingMask& me,
                              const Matrix& t, const FieldSchema& schema) {
    if (de_hat.grads.cols != E.cols) {
        throw std::invalid_argument("masked_embed_grads: gradient width " +
                                    std::to_string(de_hat.grads.cols) + " vs table width " +
                                    std::to_string(E.cols));
    }
    if (me.keep.size() != E.rows) {
        throw std::invalid_argument("masked_embed_grads: mask length " +
                                    std::to_string(me.keep.size()) + " vs table rows " +
                                    std::to_string(E.rows));
    }
    if (t.cols != schema.n_fields()) {
        throw std::invalid_argument("masked_embed_grads: threshold length " +
                                    std::to_string(t.cols) + " vs " +
                                    std::to_string(schema.n_fields()) + " fields");
    }

    PruneGrads out;
    out.dE.rows = de_hat.rows;
    out.dE.grads = Matrix(de_hat.count(), E.cols);
    out.dt = Matrix(1, schema.n_fields());

    const size_t dim = E.cols;
    for (size_t u = 0; u < de_hat.count(); ++u) {
        const uint32_t j = de_hat.rows[u];
        const size_t field = schema.field_of(j);
        const double* e = E.row_ptr(j);
        const double* g = de_hat.grads.row_ptr(u);
        double* o = out.dE.grads.row_ptr(u);

        double norm = 0.0;
        for (size_t c = 0; c < dim; ++c) norm += std::fabs(e[c]);
        const double gap = norm - t(0, field);
        const double h = longtail_H(gap);
        const double keep = static_cast<double>(me.keep[j]);

        double dot = 0.0;
        for (size_t c = 0; c < dim; ++c) {
            const double sign = e[c] > 0.0 ? 1.0 : (e[c] < 0.0 ? -1.0 : 0.0);
            o[c] = g[c] * keep + g[c] * e[c] * h * sign;
            dot += g[c] * e[c];
        }
        out.dt(0, field) -= dot * h;
    }
    return out;
}

SparseRegResult sparse_reg(const Matrix& t) {
    SparseRegResult res;
    res.dt = Matrix(1, t.cols);
    res.value = 0.0;
    for (size_t i = 0; i < t.cols; ++i) {
        const double e = std::exp(-t(0, i));
        res.value += e;
        res.dt(0, i) = -e;
    }
    return res;
}

std::vector<NormFrequencyField> norm_frequency_report(const Matrix& E,
                                                      const std::vector<uint64_t>& frequencies,
                                                      const FieldSchema& schema) {
    if (frequencies.size() != E.rows) {
        throw std::invalid_argument("norm_frequency_report: " +
                                    std::to_string(frequencies.size()) + " frequencies vs " +
                                    std::to_string(E.rows) + " table rows");
    }
    const std::vector<double> norms = l1_norms(E);
    std::vector<NormFrequencyField> out;
    out.reserve(schema.n_fields());
    for (size_t f = 0; f < schema.n_fields(); ++f) {
        const auto& field = schema.fields[f];
        NormFrequencyField rec;
        rec.field_name = field.name;
        for (uint32_t local = 0; local < field.cardinality; ++local) {
            const uint32_t j = field.offset + local;
            rec.feature_ids.push_back(j);
            rec.frequencies.push_back(frequencies[j]);
            rec.l1.push_back(norms[j]);
        }

        const size_t m = rec.feature_ids.size();
        double mean_f = 0.0, mean_n = 0.0;
        for (size_t i = 0; i < m; ++i) {
            mean_f += static_cast<double>(rec.frequencies[i]);
            mean_n += rec.l1[i];
        }
        mean_f /= static_cast<double>(m);
        mean_n /= static_cast<double>(m);
        double cov = 0.0, var_f = 0.0, var_n = 0.0;
        for (size_t i = 0; i < m; ++i) {
            const double df = static_cast<double>(rec.frequencies[i]) - mean_f;
            const double dn = rec.l1[i] - mean_n;
            cov += df * dn;
            var_f += df * df;
            var_n += dn * dn;
        }
        if (var_f <= 0.0 || var_n <= 0.0) {
            rec.degenerate = true;
            rec.pearson = 0.0;
        } else {
            rec.pearson = cov / std::sqrt(var_f * var_n);
        }
        out.push_back(std::move(rec));
    }
    return out;
}

void write_norm_frequency_scatter(const std::vector<NormFrequencyField>& report,
                                  const std::string& scatter_path,
                                  const std::string& summary_path) {
    std::FILE* scatter = std::fopen(scatter_path.c_str(), "w");
    if (!scatter) throw std::runtime_error("cannot open " + scatter_path);
    std::fprintf(scatter, "field\tfeature_id\tfrequency\tl1_norm\n");
    for (const auto& rec : report) {
        for (size_t i = 0; i < rec.feature_ids.size(); ++i) {
            std::fprintf(scatter, "%s\t%u\t%llu\t%.17g\n", rec.field_name.c_str(),
                         rec.feature_ids[i],
                         static_cast<unsigned long long>(rec.frequencies[i]), rec.l1[i]);
        }
    }
    std::fclose(scatter);

    std::FILE* summary = std::fopen(summary_path.c_str(), "w");
    if (!summary) throw std::runtime_error("cannot open " + summary_path);
    std::fprintf(summary, "field\tvalues\tpearson\tdegenerate\n");
    for (const auto& rec : report) {
        std::fprintf(summary, "%s\t%zu\t%.17g\t%d\n", rec.field_name.c_str(),
                     rec.feature_ids.size(), rec.pearson, rec.degenerate ? 1 : 0);
    }
    std::fclose(summary);
}

}  // namespace optembed
