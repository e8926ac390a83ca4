#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "optembed/data.hpp"

namespace optembed {

// Flat dotted-key configuration: "key = value" lines, '#' comments. Every key
// must be known; values are validated when the typed view is built. The
// canonical text (sorted keys, single-space separators) is what gets hashed
// and embedded in checkpoints, so resolution is a pure function of file
// content plus overrides.
class Config {
public:
    static Config defaults();
    static Config from_file(const std::string& path);

    void set(const std::string& key, const std::string& value);
    const std::string& get(const std::string& key) const;

    std::string canonical_text() const;
    uint64_t hash() const;          // FNV-1a over the canonical text
    std::string hash_hex() const;   // first 12 hex digits, used in run dir names

private:
    std::map<std::string, std::string> values_;
};

struct RunConfig {
    // data
    std::string data_source;  // "synth" | "file"
    std::string data_path;
    char delimiter = ',';
    std::vector<FieldKind> field_kinds;
    uint32_t min_count = 2;
    uint64_t max_rows = 0;
    LogBase log_base = LogBase::natural;

    SynthSpec synth;

    // model
    uint32_t embed_dim = 16;
    std::vector<size_t> mlp_dims;
    bool batch_norm = true;
    std::string interaction = "mlp";

    // training
    double lr = 1e-3;
    double l2 = 1e-5;
    uint32_t batch_size = 1024;
    uint32_t max_epochs = 30;
    uint32_t patience = 2;
    uint32_t eval_batch = 4096;

    // pruning
    double lr_t = 1e-4;
    double alpha = 1e-5;
    double t_init = 0.0;

    // dimension search
    uint32_t n_m = 10;
    uint32_t n_c = 10;
    uint32_t search_iterations = 30;
    double mutation_prob = 0.1;
    uint32_t topk = 15;

    std::string retrain_mode = "optembed";   // "optembed" | "baseline"
    std::string evaluate_target = "final";   // "final" | "baseline" | "supernet"

    uint64_t seed = 42;

    static RunConfig from(const Config& cfg);
};

}  // namespace optembed
