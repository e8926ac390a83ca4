#include "optembed/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>

namespace optembed {

// --- metrics -----------------------------------------------------------------

double auc(std::span<const uint8_t> labels, std::span<const double> scores) {
    if (labels.size() != scores.size()) {
        throw std::invalid_argument("auc: label/score length mismatch");
    }
    const size_t n = labels.size();
    size_t positives = 0;
    for (uint8_t l : labels) positives += l;
    const size_t negatives = n - positives;
    if (positives == 0 || negatives == 0) throw std::invalid_argument("AUC undefined: single-class input");

    std::vector<uint32_t> order(n);
    std::iota(order.begin(), order.end(), 0u);
    std::sort(order.begin(), order.end(), [&](uint32_t a, uint32_t b) {
        if (scores[a] != scores[b]) return scores[a] < scores[b];
        return a < b;
    });

    // Average ranks within tied groups make each tied positive-negative pair
    // contribute exactly 0.5, matching the pairwise definition.
    double rank_sum_pos = 0.0;
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j < n && scores[order[j]] == scores[order[i]]) ++j;
        const double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
        for (size_t k = i; k < j; ++k) {
            if (labels[order[k]]) rank_sum_pos += avg_rank;
        }
        i = j;
    }
    const double p = static_cast<double>(positives);
    return (rank_sum_pos - p * (p + 1.0) / 2.0) /
           (p * static_cast<double>(negatives));
}

double logloss(std::span<const uint8_t> labels, std::span<const double> scores) {
    std::vector<double> y(labels.size());
    for (size_t i = 0; i < labels.size(); ++i) y[i] = static_cast<double>(labels[i]);
    return bce_loss(y, scores).loss;
}

double sparsity(const EmbeddingMask& me, const DimensionMask& md, const FieldSchema& schema,
                uint32_t D) {
    if (me.keep.size() != schema.total) {
        throw std::invalid_argument("sparsity: mask length " + std::to_string(me.keep.size()) +
                                    " vs schema total " + std::to_string(schema.total));
    }
    validate_dim_mask(md, schema.n_fields(), D);
    uint64_t remaining = 0;
    for (size_t f = 0; f < schema.n_fields(); ++f) {
        const auto& field = schema.fields[f];
        for (uint32_t local = 0; local < field.cardinality; ++local) {
            if (me.keep[field.offset + local]) remaining += md.d[f];
        }
    }
    return 1.0 - static_cast<double>(remaining) /
                     (static_cast<double>(schema.total) * static_cast<double>(D));
}

void write_metrics_tsv(const std::string& path, const std::vector<MetricRecord>& records) {
    std::FILE* out = std::fopen(path.c_str(), "w");
    if (!out) throw std::runtime_error("cannot open " + path);
    std::fprintf(out, "phase\tstep\tauc\tlogloss\tsparsity\tkept_rows\tmean_dim\n");
    for (const auto& r : records) {
        std::fprintf(out, "%s\t%llu\t%.17g\t%.17g\t%.17g\t%llu\t%.17g\n", r.phase.c_str(),
                     static_cast<unsigned long long>(r.step), r.auc, r.logloss, r.sparsity,
                     static_cast<unsigned long long>(r.kept_rows), r.mean_dim);
    }
    std::fclose(out);
}

// --- checkpoint ----------------------------------------------------------------

namespace {

constexpr char kCkptMagic[4] = {'O', 'E', 'C', 'K'};
constexpr uint32_t kCkptVersion = 1;

void write_section(BinaryWriter& w, const std::string& name, const BinaryWriter& payload) {
    w.str(name);
    w.u64(payload.bytes().size());
    for (uint8_t b : payload.bytes()) w.u8(b);
}

void write_mask_bits(BinaryWriter& w, const EmbeddingMask& me) {
    w.u64(me.keep.size());
    for (uint8_t k : me.keep) w.u8(k);
}

EmbeddingMask read_mask_bits(BinaryReader& r) {
    EmbeddingMask me;
    me.keep.resize(r.u64());
    for (auto& k : me.keep) k = r.u8();
    return me;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    BinaryWriter w;
    w.magic(kCkptMagic);
    w.u32(kCkptVersion);

    BinaryWriter meta;
    meta.str(ckpt.kind);
    meta.u32(ckpt.best_epoch);
    meta.f64(ckpt.best_val_auc);
    write_section(w, "meta", meta);

    BinaryWriter config;
    config.str(ckpt.config_text);
    write_section(w, "config", config);

    BinaryWriter rng;
    for (uint64_t s : ckpt.rng_state) rng.u64(s);
    write_section(w, "rng", rng);

    BinaryWriter model;
    ckpt.model.serialize(model);
    write_section(w, "model", model);

    BinaryWriter thresholds;
    thresholds.matrix(ckpt.thresholds.t);
    thresholds.matrix(ckpt.thresholds.opt.m);
    thresholds.matrix(ckpt.thresholds.opt.v);
    thresholds.u64(ckpt.thresholds.opt.step);
    write_section(w, "thresholds", thresholds);

    BinaryWriter me_star;
    write_mask_bits(me_star, ckpt.me_star);
    write_section(w, "me_star", me_star);

    BinaryWriter md_star;
    md_star.u64(ckpt.md_star.d.size());
    for (uint32_t d : ckpt.md_star.d) md_star.u32(d);
    write_section(w, "md_star", md_star);

    BinaryWriter history;
    history.u64(ckpt.val_auc_history.size());
    for (double v : ckpt.val_auc_history) history.f64(v);
    history.u64(ckpt.me_history.size());
    for (const auto& me : ckpt.me_history) write_mask_bits(history, me);
    write_section(w, "history", history);

    w.save(path);
}

Checkpoint load_checkpoint(const std::string& path) {
    BinaryReader r = BinaryReader::from_file(path);
    r.expect_magic(kCkptMagic, path.c_str());
    const uint32_t version = r.u32();
    if (version != kCkptVersion) {
        throw std::runtime_error(path + ": unsupported checkpoint version " +
                                 std::to_string(version));
    }

    Checkpoint ckpt;
    while (!r.at_end()) {
        const std::string name = r.str();
        const uint64_t len = r.u64();
        std::vector<uint8_t> payload(len);
        for (auto& b : payload) b = r.u8();
        BinaryReader section(std::move(payload));
        if (name == "meta") {
            ckpt.kind = section.str();
            ckpt.best_epoch = section.u32();
            ckpt.best_val_auc = section.f64();
        } else if (name == "config") {
            ckpt.config_text = section.str();
        } else if (name == "rng") {
            for (auto& s : ckpt.rng_state) s = section.u64();
        } else if (name == "model") {
            ckpt.model.deserialize(section);
        } else if (name == "thresholds") {
            ckpt.thresholds.t = section.matrix();
            ckpt.thresholds.opt.m = section.matrix();
            ckpt.thresholds.opt.v = section.matrix();
            ckpt.thresholds.opt.step = section.u64();
        } else if (name == "me_star") {
            ckpt.me_star = read_mask_bits(section);
        } else if (name == "md_star") {
            ckpt.md_star.d.resize(section.u64());
            for (auto& d : ckpt.md_star.d) d = section.u32();
        } else if (name == "history") {
            ckpt.val_auc_history.resize(section.u64());
            for (auto& v : ckpt.val_auc_history) v = section.f64();
            ckpt.me_history.resize(section.u64());
            for (auto& me : ckpt.me_history) me = read_mask_bits(section);
        } else {
            throw std::runtime_error(path + ": unknown checkpoint section '" + name + "'");
        }
    }
    return ckpt;
}

// --- training ------------------------------------------------------------------

namespace {

struct BatchPlan {
    std::vector<size_t> begins;  // into the shuffled order
    std::vector<size_t> ends;
};

// Contiguous slices of batch_size; a trailing singleton merges into the
// previous batch so train-mode batch norm always sees at least two rows.
BatchPlan plan_batches(size_t n_rows, size_t batch_size) {
    BatchPlan plan;
    size_t begin = 0;
    while (begin < n_rows) {
        size_t end = std::min(begin + batch_size, n_rows);
        if (n_rows - end == 1) end = n_rows;
        plan.begins.push_back(begin);
        plan.ends.push_back(end);
        begin = end;
    }
    return plan;
}

void shuffle_order(std::vector<uint32_t>& order, Rng& rng) {
    for (size_t i = order.size() - 1; i > 0; --i) {
        const size_t j = static_cast<size_t>(rng.uniform_int(0, i));
        std::swap(order[i], order[j]);
    }
}

struct BatchBuffers {
    std::vector<uint32_t> idx;
    std::vector<double> labels;
};

void fill_batch(const EncodedDataset& data, const std::vector<uint32_t>& order, size_t begin,
                size_t end, BatchBuffers& buf) {
    buf.idx.clear();
    buf.labels.clear();
    for (size_t i = begin; i < end; ++i) {
        const uint32_t row = order[i];
        auto span = data.row(row);
        buf.idx.insert(buf.idx.end(), span.begin(), span.end());
        buf.labels.push_back(static_cast<double>(data.labels[row]));
    }
}

MetricRecord epoch_metric(const std::string& phase, uint64_t epoch, double val_auc,
                          double val_logloss, const EmbeddingMask& me, const DimensionMask& md,
                          const FieldSchema& schema, uint32_t D) {
    MetricRecord rec;
    rec.phase = phase;
    rec.step = epoch;
    rec.auc = val_auc;
    rec.logloss = val_logloss;
    rec.sparsity = sparsity(me, md, schema, D);
    rec.kept_rows = me.kept_count();
    rec.mean_dim = md.mean_dim();
    return rec;
}

}  // namespace

Checkpoint train_supernet(const EncodedDataset& train, const EncodedDataset& val,
                          const FieldSchema& schema, const RunConfig& cfg,
                          std::vector<MetricRecord>* metrics) {
    if (train.n_rows() == 0 || val.n_rows() == 0) {
        throw std::invalid_argument("train_supernet: empty split");
    }
    const size_t n = schema.n_fields();
    const uint32_t D = cfg.embed_dim;

    Rng init_rng = phase_rng(cfg.seed, RngStream::supernet_init);
    CtrModel model(schema, D, cfg.mlp_dims, cfg.batch_norm, cfg.interaction, init_rng);
    ThresholdVector thresholds(n, cfg.t_init);

    const AdamHyper model_hyper{cfg.lr, 0.9, 0.999, 1e-8, cfg.l2};
    const AdamHyper threshold_hyper{cfg.lr_t, 0.9, 0.999, 1e-8, 0.0};

    Rng train_rng = phase_rng(cfg.seed, RngStream::supernet_train);
    std::vector<uint32_t> order(train.n_rows());
    std::iota(order.begin(), order.end(), 0u);
    const DimensionMask full_dim = DimensionMask::full(n, D);

    Checkpoint best;
    best.kind = "supernet";
    std::vector<double> auc_history;
    std::vector<EmbeddingMask> me_history;
    double best_auc = -1.0;
    uint32_t best_epoch = 0;
    uint32_t epochs_without_improvement = 0;
    BinaryWriter best_model_bytes;
    ThresholdVector best_thresholds;
    std::array<uint64_t, 4> best_rng_state{};

    BatchBuffers buf;
    for (uint32_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        shuffle_order(order, train_rng);
        const BatchPlan plan = plan_batches(train.n_rows(), cfg.batch_size);
        for (size_t b = 0; b < plan.begins.size(); ++b) {
            fill_batch(train, order, plan.begins[b], plan.ends[b], buf);
            const EmbeddingMask me = gen_embedding_mask(model.embedding().E, thresholds.t, schema);
            const DimensionMask md = sample_dim_mask(train_rng, n, D);

            auto probs = model.forward(buf.idx, me, md, /*train=*/true);
            BceResult loss = bce_loss(buf.labels, probs);
            if (!std::isfinite(loss.loss)) {
                throw std::runtime_error("training diverged: loss is not finite at epoch " +
                                         std::to_string(epoch) + " batch " + std::to_string(b));
            }
            RowGrads de_hat = model.backward(loss.dprobs);
            PruneGrads pg = masked_embed_grads(de_hat, model.embedding().E, me, thresholds.t, schema);
            adam_step_rows(model.embedding().E, pg.dE, model.embedding().opt, model_hyper);

            const SparseRegResult reg = sparse_reg(thresholds.t);
            Matrix dt = pg.dt;
            for (size_t i = 0; i < dt.cols; ++i) dt(0, i) += cfg.alpha * reg.dt(0, i);
            adam_step(thresholds.t, dt, thresholds.opt, threshold_hyper);

            model.step_interaction(model_hyper);
        }

        const EmbeddingMask me_epoch = gen_embedding_mask(model.embedding().E, thresholds.t, schema);
        auto val_scores = predict(model, val, me_epoch, full_dim, cfg.eval_batch);
        const double val_auc = auc(val.labels, val_scores);
        const double val_ll = logloss(val.labels, val_scores);
        auc_history.push_back(val_auc);
        me_history.push_back(me_epoch);
        if (metrics) {
            metrics->push_back(
                epoch_metric("supernet", epoch, val_auc, val_ll, me_epoch, full_dim, schema, D));
        }

        if (val_auc > best_auc) {
            best_auc = val_auc;
            best_epoch = epoch;
            epochs_without_improvement = 0;
            best_model_bytes = BinaryWriter();
            model.serialize(best_model_bytes);
            best_thresholds = thresholds;
            best_rng_state = train_rng.state();
        } else {
            ++epochs_without_improvement;
            if (epochs_without_improvement >= cfg.patience) break;
        }
    }

    BinaryReader model_reader(best_model_bytes.bytes());
    best.model.deserialize(model_reader);
    best.thresholds = best_thresholds;
    best.me_star = me_history[best_epoch];
    best.val_auc_history = auc_history;
    best.me_history = me_history;
    best.best_epoch = best_epoch;
    best.best_val_auc = best_auc;
    best.rng_state = best_rng_state;
    return best;
}

Checkpoint retrain(const EncodedDataset& train, const EncodedDataset& val,
                   const FieldSchema& schema, const EmbeddingMask& me_star,
                   const DimensionMask& md_star, const RunConfig& cfg,
                   const std::string& phase_name, std::vector<MetricRecord>* metrics) {
    if (me_star.keep.size() != schema.total) {
        throw std::invalid_argument("retrain: embedding mask length " +
                                    std::to_string(me_star.keep.size()) + " vs schema total " +
                                    std::to_string(schema.total));
    }
    validate_dim_mask(md_star, schema.n_fields(), cfg.embed_dim);

    const uint32_t D = cfg.embed_dim;
    Rng init_rng = phase_rng(cfg.seed, RngStream::retrain_init);
    CtrModel model(schema, D, cfg.mlp_dims, cfg.batch_norm, cfg.interaction, init_rng);
    const AdamHyper model_hyper{cfg.lr, 0.9, 0.999, 1e-8, cfg.l2};

    Rng train_rng = phase_rng(cfg.seed, RngStream::retrain_train);
    std::vector<uint32_t> order(train.n_rows());
    std::iota(order.begin(), order.end(), 0u);

    std::vector<double> auc_history;
    double best_auc = -1.0;
    uint32_t best_epoch = 0;
    uint32_t epochs_without_improvement = 0;
    BinaryWriter best_model_bytes;
    std::array<uint64_t, 4> best_rng_state{};

    BatchBuffers buf;
    for (uint32_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        shuffle_order(order, train_rng);
        const BatchPlan plan = plan_batches(train.n_rows(), cfg.batch_size);
        for (size_t b = 0; b < plan.begins.size(); ++b) {
            fill_batch(train, order, plan.begins[b], plan.ends[b], buf);
            auto probs = model.forward(buf.idx, me_star, md_star, /*train=*/true);
            BceResult loss = bce_loss(buf.labels, probs);
            if (!std::isfinite(loss.loss)) {
                throw std::runtime_error("training diverged: loss is not finite at epoch " +
                                         std::to_string(epoch) + " batch " + std::to_string(b));
            }
            RowGrads de_hat = model.backward(loss.dprobs);
            // Fixed masks: only surviving rows train; pruned rows keep their
            // init values and never touch their optimizer state.
            RowGrads filtered;
            for (size_t u = 0; u < de_hat.count(); ++u) {
                if (me_star.keep[de_hat.rows[u]]) filtered.rows.push_back(de_hat.rows[u]);
            }
            filtered.grads = Matrix(filtered.rows.size(), de_hat.grads.cols);
            size_t fu = 0;
            for (size_t u = 0; u < de_hat.count(); ++u) {
                if (!me_star.keep[de_hat.rows[u]]) continue;
                const double* src = de_hat.grads.row_ptr(u);
                double* dst = filtered.grads.row_ptr(fu++);
                for (size_t c = 0; c < de_hat.grads.cols; ++c) dst[c] = src[c];
            }
            adam_step_rows(model.embedding().E, filtered, model.embedding().opt, model_hyper);
            model.step_interaction(model_hyper);
        }

        auto val_scores = predict(model, val, me_star, md_star, cfg.eval_batch);
        const double val_auc = auc(val.labels, val_scores);
        const double val_ll = logloss(val.labels, val_scores);
        auc_history.push_back(val_auc);
        if (metrics) {
            metrics->push_back(
                epoch_metric(phase_name, epoch, val_auc, val_ll, me_star, md_star, schema, D));
        }

        if (val_auc > best_auc) {
            best_auc = val_auc;
            best_epoch = epoch;
            epochs_without_improvement = 0;
            best_model_bytes = BinaryWriter();
            model.serialize(best_model_bytes);
            best_rng_state = train_rng.state();
        } else {
            ++epochs_without_improvement;
            if (epochs_without_improvement >= cfg.patience) break;
        }
    }

    Checkpoint out;
    out.kind = "final";
    BinaryReader model_reader(best_model_bytes.bytes());
    out.model.deserialize(model_reader);
    out.me_star = me_star;
    out.md_star = md_star;
    out.val_auc_history = auc_history;
    out.best_epoch = best_epoch;
    out.best_val_auc = best_auc;
    out.rng_state = best_rng_state;
    return out;
}

double evaluate_checkpoint(Checkpoint& ckpt, const EncodedDataset& data, const EmbeddingMask& me,
                           const DimensionMask& md, size_t eval_batch) {
    auto scores = predict(ckpt.model, data, me, md, eval_batch);
    return auc(data.labels, scores);
}

}  // namespace optembed
