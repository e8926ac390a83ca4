#include "optembed/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "optembed/config.hpp"
#include "optembed/data.hpp"
#include "optembed/dimsearch.hpp"
#include "optembed/pipeline.hpp"
#include "optembed/prune.hpp"

namespace optembed {

namespace fs = std::filesystem;

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct CliArgs {
    std::string command;
    std::string config_path;
    std::vector<std::pair<std::string, std::string>> overrides;
    std::optional<uint64_t> seed;
    std::string out_dir;
};

const char* kUsage =
    "usage: optembed <command> [--config PATH] [--set key=value]... [--seed U64] [--out DIR]\n"
    "\n"
    "commands:\n"
    "  synth           generate a synthetic planted-structure dataset\n"
    "  prepare         encode raw data and split it 8:1:1\n"
    "  train-supernet  train the supernet with simultaneous pruning\n"
    "  search          evolutionary search for per-field dimensions\n"
    "  retrain         retrain from scratch under the found masks\n"
    "                  (--set retrain.mode=baseline for the full-table baseline)\n"
    "  evaluate        score a checkpoint on the validation and test splits\n"
    "  report          print the metrics table and write plot data\n";

CliArgs parse_args(int argc, const char* const* argv) {
    if (argc < 2) throw UsageError("missing command");
    CliArgs args;
    args.command = argv[1];
    if (args.command == "--help" || args.command == "-h") args.command = "help";
    for (int i = 2; i < argc; ++i) {
        const std::string flag = argv[i];
        auto value = [&]() -> std::string {
            if (i + 1 >= argc) throw UsageError(flag + " needs a value");
            return argv[++i];
        };
        if (flag == "--config") {
            args.config_path = value();
        } else if (flag == "--set") {
            const std::string kv = value();
            const size_t eq = kv.find('=');
            if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + kv + "'");
            args.overrides.emplace_back(kv.substr(0, eq), kv.substr(eq + 1));
        } else if (flag == "--seed") {
            try {
                args.seed = std::stoull(value());
            } catch (const std::exception&) {
                throw UsageError("--seed expects an unsigned integer");
            }
        } else if (flag == "--out") {
            args.out_dir = value();
        } else if (flag == "--help" || flag == "-h") {
            args.command = "help";
        } else {
            throw UsageError("unknown flag '" + flag + "'");
        }
    }
    return args;
}

// --- versioned artifacts -------------------------------------------------------

std::string version_suffix(uint32_t v) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), ".v%03u.", v);
    return buf;
}

uint32_t scan_latest_version(const fs::path& dir, const std::string& stem,
                             const std::string& ext) {
    uint32_t latest = 0;
    if (!fs::exists(dir)) return 0;
    for (const auto& entry : fs::directory_iterator(dir)) {
        const std::string name = entry.path().filename().string();
        if (name.size() < stem.size() + ext.size() + 6) continue;
        if (name.compare(0, stem.size(), stem) != 0) continue;
        if (name.compare(stem.size(), 2, ".v") != 0) continue;
        const size_t dot = name.find('.', stem.size() + 2);
        if (dot == std::string::npos || name.substr(dot + 1) != ext) continue;
        try {
            const uint32_t v = static_cast<uint32_t>(
                std::stoul(name.substr(stem.size() + 2, dot - stem.size() - 2)));
            latest = std::max(latest, v);
        } catch (const std::exception&) {
            continue;
        }
    }
    return latest;
}

// Run directories are append-only: a re-run writes the next version instead of
// overwriting.
std::string next_artifact(const fs::path& dir, const std::string& stem, const std::string& ext) {
    const uint32_t v = scan_latest_version(dir, stem, ext) + 1;
    return (dir / (stem + version_suffix(v) + ext)).string();
}

std::string latest_artifact(const fs::path& dir, const std::string& stem, const std::string& ext,
                            const std::string& prerequisite) {
    const uint32_t v = scan_latest_version(dir, stem, ext);
    if (v == 0) throw std::runtime_error(prerequisite);
    return (dir / (stem + version_suffix(v) + ext)).string();
}

bool artifact_exists(const fs::path& dir, const std::string& stem, const std::string& ext) {
    return scan_latest_version(dir, stem, ext) > 0;
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + path);
    out << text;
}

// --- shared phase plumbing -------------------------------------------------------

struct PhaseContext {
    Config config;
    RunConfig rc;
    fs::path run_dir;
};

PhaseContext make_context(const CliArgs& args) {
    PhaseContext ctx;
    ctx.config = args.config_path.empty() ? Config::defaults() : Config::from_file(args.config_path);
    for (const auto& [k, v] : args.overrides) {
        try {
            ctx.config.set(k, v);
        } catch (const std::invalid_argument& e) {
            throw UsageError(e.what());
        }
    }
    if (args.seed) ctx.config.set("seed", std::to_string(*args.seed));
    ctx.rc = RunConfig::from(ctx.config);
    ctx.run_dir = args.out_dir.empty() ? fs::path("runs") / ctx.config.hash_hex()
                                       : fs::path(args.out_dir);
    fs::create_directories(ctx.run_dir);
    return ctx;
}

void log_resolved_config(const PhaseContext& ctx, const std::string& phase) {
    write_text_file(next_artifact(ctx.run_dir, "resolved-" + phase, "cfg"),
                    ctx.config.canonical_text());
    std::printf("[%s] run dir %s, config %s\n", phase.c_str(), ctx.run_dir.string().c_str(),
                ctx.config.hash_hex().c_str());
}

PreparedData load_prepared_or_fail(const PhaseContext& ctx, const std::string& phase) {
    return load_prepared(latest_artifact(ctx.run_dir, "prepared", "oeds",
                                         phase + " requires an encoded dataset; run prepare first"));
}

std::string format_mask(const DimensionMask& md) {
    std::string out;
    for (size_t i = 0; i < md.d.size(); ++i) {
        if (i > 0) out.push_back(',');
        out += std::to_string(md.d[i]);
    }
    return out;
}

DimensionMask parse_mask(const std::string& csv) {
    DimensionMask md;
    std::stringstream ss(csv);
    std::string part;
    while (std::getline(ss, part, ',')) md.d.push_back(static_cast<uint32_t>(std::stoul(part)));
    return md;
}

// --- subcommands -----------------------------------------------------------------

int cmd_synth(const PhaseContext& ctx) {
    log_resolved_config(ctx, "synth");
    RawDataset raw = synth_generate(ctx.rc.synth, phase_rng(ctx.rc.seed, RngStream::synth).next_u64());
    const std::string path = next_artifact(ctx.run_dir, "synth-data", "csv");
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + path);
    out << "label";
    for (const auto& name : raw.field_names) out << "," << name;
    out << "\n";
    for (size_t r = 0; r < raw.n_rows(); ++r) {
        out << static_cast<int>(raw.labels[r]);
        for (size_t f = 0; f < raw.n_fields(); ++f) out << "," << raw.token(r, f);
        out << "\n";
    }
    std::printf("wrote %zu rows x %zu fields (%zu informative) to %s\n", raw.n_rows(),
                raw.n_fields(), ctx.rc.synth.n_informative, path.c_str());
    return 0;
}

int cmd_prepare(const PhaseContext& ctx) {
    log_resolved_config(ctx, "prepare");
    RawDataset raw;
    if (ctx.rc.data_source == "synth") {
        const std::string path =
            latest_artifact(ctx.run_dir, "synth-data", "csv",
                            "prepare requires a synthetic dataset; run synth first");
        raw = load_delimited(path, ',', {}, ctx.rc.max_rows);
    } else {
        if (ctx.rc.data_path.empty()) throw std::runtime_error("data.path is empty");
        if (ctx.rc.field_kinds.empty()) {
            throw std::runtime_error("data.field_kinds must be set for data.source = file");
        }
        raw = load_delimited(ctx.rc.data_path, ctx.rc.delimiter, ctx.rc.field_kinds,
                             ctx.rc.max_rows);
    }
    raw = discretize_numeric_fields(raw, ctx.rc.log_base);

    PreparedData data;
    data.schema = build_schema(raw, ctx.rc.min_count);
    EncodedDataset encoded = encode(raw, data.schema);
    data.splits = split(encoded, phase_rng(ctx.rc.seed, RngStream::split).next_u64());

    const std::string path = next_artifact(ctx.run_dir, "prepared", "oeds");
    save_prepared(data, path);

    std::printf("schema: %zu fields, |f| = %u\n", data.schema.n_fields(), data.schema.total);
    for (const auto& f : data.schema.fields) {
        std::printf("  %-12s cardinality %6u offset %6u\n", f.name.c_str(), f.cardinality,
                    f.offset);
    }
    std::printf("splits: train %zu / val %zu / test %zu -> %s\n", data.splits.train.n_rows(),
                data.splits.val.n_rows(), data.splits.test.n_rows(), path.c_str());
    return 0;
}

int cmd_train_supernet(const PhaseContext& ctx) {
    log_resolved_config(ctx, "train-supernet");
    PreparedData data = load_prepared_or_fail(ctx, "train-supernet");
    std::vector<MetricRecord> metrics;
    Checkpoint ckpt = train_supernet(data.splits.train, data.splits.val, data.schema, ctx.rc,
                                     &metrics);
    ckpt.config_text = ctx.config.canonical_text();
    const std::string path = next_artifact(ctx.run_dir, "supernet", "ckpt");
    save_checkpoint(ckpt, path);
    write_metrics_tsv(next_artifact(ctx.run_dir, "metrics-supernet", "tsv"), metrics);
    std::printf("supernet: best epoch %u, val auc %.6f, kept rows %zu / %u -> %s\n",
                ckpt.best_epoch, ckpt.best_val_auc, ckpt.me_star.kept_count(), data.schema.total,
                path.c_str());
    return 0;
}

int cmd_search(const PhaseContext& ctx) {
    log_resolved_config(ctx, "search");
    PreparedData data = load_prepared_or_fail(ctx, "search");
    Checkpoint supernet = load_checkpoint(
        latest_artifact(ctx.run_dir, "supernet", "ckpt",
                        "search requires a supernet checkpoint; run train-supernet first"));

    SearchParams params{ctx.rc.n_m, ctx.rc.n_c, ctx.rc.search_iterations, ctx.rc.mutation_prob,
                        ctx.rc.topk};
    Rng rng = phase_rng(ctx.rc.seed, RngStream::search);
    const FitnessFn fitness = [&](const DimensionMask& md) {
        return evaluate_candidate(supernet.model, supernet.me_star, md, data.splits.val,
                                  ctx.rc.eval_batch);
    };
    SearchResult result = evolutionary_search(fitness, data.schema.n_fields(), ctx.rc.embed_dim,
                                              params, rng);

    write_search_log(next_artifact(ctx.run_dir, "search-log", "tsv"), result.log);
    std::ostringstream best;
    best << "mask\tfitness\n" << format_mask(result.best_mask) << "\t";
    char fit[64];
    std::snprintf(fit, sizeof(fit), "%.17g", result.best_fitness);
    best << fit << "\n";
    write_text_file(next_artifact(ctx.run_dir, "best-mask", "tsv"), best.str());

    std::vector<MetricRecord> metrics;
    for (size_t i = 0; i < result.best_by_iteration.size(); ++i) {
        MetricRecord rec;
        rec.phase = "search";
        rec.step = i;
        rec.auc = result.best_by_iteration[i];
        rec.logloss = 0.0;
        rec.sparsity = sparsity(supernet.me_star, result.best_mask, data.schema, ctx.rc.embed_dim);
        rec.kept_rows = supernet.me_star.kept_count();
        rec.mean_dim = result.best_mask.mean_dim();
        metrics.push_back(rec);
    }
    write_metrics_tsv(next_artifact(ctx.run_dir, "metrics-search", "tsv"), metrics);

    std::printf("search: best mask [%s], fitness %.6f\n", format_mask(result.best_mask).c_str(),
                result.best_fitness);
    return 0;
}

int cmd_retrain(const PhaseContext& ctx) {
    log_resolved_config(ctx, "retrain");
    PreparedData data = load_prepared_or_fail(ctx, "retrain");

    EmbeddingMask me;
    DimensionMask md;
    std::string stem, phase;
    if (ctx.rc.retrain_mode == "baseline") {
        me = EmbeddingMask::all_ones(data.schema.total);
        md = DimensionMask::full(data.schema.n_fields(), ctx.rc.embed_dim);
        stem = "baseline";
        phase = "baseline";
    } else {
        Checkpoint supernet = load_checkpoint(
            latest_artifact(ctx.run_dir, "supernet", "ckpt",
                            "retrain requires a supernet checkpoint; run train-supernet first"));
        const std::string mask_path = latest_artifact(
            ctx.run_dir, "best-mask", "tsv", "retrain requires a searched mask; run search first");
        std::ifstream in(mask_path);
        std::string header, mask_csv;
        std::getline(in, header);
        in >> mask_csv;
        me = supernet.me_star;
        md = parse_mask(mask_csv);
        stem = "final";
        phase = "retrain";
    }

    std::vector<MetricRecord> metrics;
    Checkpoint ckpt = retrain(data.splits.train, data.splits.val, data.schema, me, md, ctx.rc,
                              phase, &metrics);
    ckpt.config_text = ctx.config.canonical_text();
    const std::string path = next_artifact(ctx.run_dir, stem, "ckpt");
    save_checkpoint(ckpt, path);
    write_metrics_tsv(next_artifact(ctx.run_dir, "metrics-" + phase, "tsv"), metrics);
    std::printf("%s: best epoch %u, val auc %.6f, sparsity %.4f -> %s\n", phase.c_str(),
                ckpt.best_epoch, ckpt.best_val_auc,
                sparsity(me, md, data.schema, ctx.rc.embed_dim), path.c_str());
    return 0;
}

struct EvalRow {
    double val_auc = 0.0, test_auc = 0.0, test_logloss = 0.0, sparsity = 0.0;
    uint64_t kept_rows = 0;
    double mean_dim = 0.0;
};

EvalRow evaluate_one(Checkpoint& ckpt, const PreparedData& data, uint32_t D, size_t eval_batch) {
    EmbeddingMask me;
    DimensionMask md;
    if (ckpt.kind == "supernet") {
        me = ckpt.me_star;
        md = DimensionMask::full(data.schema.n_fields(), D);
    } else {
        me = ckpt.me_star;
        md = ckpt.md_star;
    }
    EvalRow row;
    auto val_scores = predict(ckpt.model, data.splits.val, me, md, eval_batch);
    auto test_scores = predict(ckpt.model, data.splits.test, me, md, eval_batch);
    row.val_auc = auc(data.splits.val.labels, val_scores);
    row.test_auc = auc(data.splits.test.labels, test_scores);
    row.test_logloss = logloss(data.splits.test.labels, test_scores);
    row.sparsity = sparsity(me, md, data.schema, D);
    row.kept_rows = me.kept_count();
    row.mean_dim = md.mean_dim();
    return row;
}

int cmd_evaluate(const PhaseContext& ctx) {
    log_resolved_config(ctx, "evaluate");
    PreparedData data = load_prepared_or_fail(ctx, "evaluate");
    const std::string target = ctx.rc.evaluate_target;
    const std::string stem = target == "final" ? "final" : target;
    Checkpoint ckpt = load_checkpoint(latest_artifact(
        ctx.run_dir, stem, "ckpt",
        "evaluate requires a " + target + " checkpoint; run " +
            (target == "supernet" ? std::string("train-supernet") : std::string("retrain")) +
            " first"));
    EvalRow row = evaluate_one(ckpt, data, ctx.rc.embed_dim, ctx.rc.eval_batch);

    std::vector<MetricRecord> metrics;
    metrics.push_back({"evaluate-" + target, 0, row.test_auc, row.test_logloss, row.sparsity,
                       row.kept_rows, row.mean_dim});
    write_metrics_tsv(next_artifact(ctx.run_dir, "metrics-evaluate-" + target, "tsv"), metrics);
    std::printf("%s: val auc %.6f, test auc %.6f, test logloss %.6f, sparsity %.4f\n",
                target.c_str(), row.val_auc, row.test_auc, row.test_logloss, row.sparsity);
    return 0;
}

int cmd_report(const PhaseContext& ctx) {
    log_resolved_config(ctx, "report");
    if (!artifact_exists(ctx.run_dir, "prepared", "oeds")) {
        throw std::runtime_error("report: run dir has no artifacts; run prepare first");
    }
    PreparedData data = load_prepared_or_fail(ctx, "report");

    std::ostringstream table;
    table << "phase     val_auc   test_auc  logloss   sparsity  kept_rows  mean_dim\n";
    auto add_row = [&](const std::string& name, const std::string& stem) {
        if (!artifact_exists(ctx.run_dir, stem, "ckpt")) {
            table << name;
            for (size_t pad = name.size(); pad < 10; ++pad) table << ' ';
            table << "(absent)\n";
            return;
        }
        Checkpoint ckpt = load_checkpoint(latest_artifact(ctx.run_dir, stem, "ckpt", ""));
        EvalRow row = evaluate_one(ckpt, data, ctx.rc.embed_dim, ctx.rc.eval_batch);
        char line[160];
        std::snprintf(line, sizeof(line), "%-9s %.6f  %.6f  %.6f  %.6f  %-9llu  %.3f\n",
                      name.c_str(), row.val_auc, row.test_auc, row.test_logloss, row.sparsity,
                      static_cast<unsigned long long>(row.kept_rows), row.mean_dim);
        table << line;
    };
    add_row("baseline", "baseline");
    add_row("supernet", "supernet");
    add_row("optembed", "final");
    if (artifact_exists(ctx.run_dir, "best-mask", "tsv")) {
        std::ifstream in(latest_artifact(ctx.run_dir, "best-mask", "tsv", ""));
        std::string header, mask_csv, fitness;
        std::getline(in, header);
        in >> mask_csv >> fitness;
        table << "search    best mask [" << mask_csv << "] fitness " << fitness << "\n";
    } else {
        table << "search    (absent)\n";
    }

    // Norm-frequency scatter from the plainest available table: a baseline
    // model if present, else the supernet, else the retrained model.
    std::string scatter_source;
    for (const char* stem : {"baseline", "supernet", "final"}) {
        if (artifact_exists(ctx.run_dir, stem, "ckpt")) {
            scatter_source = stem;
            break;
        }
    }
    if (!scatter_source.empty()) {
        Checkpoint ckpt = load_checkpoint(latest_artifact(ctx.run_dir, scatter_source, "ckpt", ""));
        auto report = norm_frequency_report(ckpt.model.embedding().E, data.train_frequencies(),
                                            data.schema);
        write_norm_frequency_scatter(report,
                                     next_artifact(ctx.run_dir, "normfreq-scatter", "tsv"),
                                     next_artifact(ctx.run_dir, "normfreq-summary", "tsv"));
        table << "normfreq  scatter from " << scatter_source << " checkpoint\n";
    }

    const std::string text = table.str();
    write_text_file(next_artifact(ctx.run_dir, "report", "txt"), text);
    std::fputs(text.c_str(), stdout);
    return 0;
}

}  // namespace

int cli_run(int argc, const char* const* argv) {
    try {
        const CliArgs args = parse_args(argc, argv);
        if (args.command == "help") {
            std::fputs(kUsage, stdout);
            return 0;
        }
        const PhaseContext ctx = make_context(args);
        if (args.command == "synth") return cmd_synth(ctx);
        if (args.command == "prepare") return cmd_prepare(ctx);
        if (args.command == "train-supernet") return cmd_train_supernet(ctx);
        if (args.command == "search") return cmd_search(ctx);
        if (args.command == "retrain") return cmd_retrain(ctx);
        if (args.command == "evaluate") return cmd_evaluate(ctx);
        if (args.command == "report") return cmd_report(ctx);
        throw UsageError("unknown command '" + args.command + "'");
    } catch (const UsageError& e) {
        std::fprintf(stderr, "error: %s\n\n%s", e.what(), kUsage);
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
}

}  // namespace optembed
