#include "optembed/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace optembed {

namespace {

const std::map<std::string, std::string>& default_values() {
    static const std::map<std::string, std::string> defaults = {
        {"data.source", "synth"},
        {"data.path", ""},
        {"data.delimiter", ","},
        {"data.field_kinds", ""},
        {"data.min_count", "2"},
        {"data.max_rows", "0"},
        {"discretize.log_base", "natural"},
        {"synth.fields", "8"},
        {"synth.cardinalities", "100"},
        {"synth.informative", "4"},
        {"synth.rows", "50000"},
        {"synth.noise", "1.0"},
        {"model.embed_dim", "16"},
        {"model.mlp_dims", "64,32,16"},
        {"model.batch_norm", "true"},
        {"model.interaction", "mlp"},
        {"train.lr", "1e-3"},
        {"train.l2", "1e-5"},
        {"train.batch_size", "1024"},
        {"train.max_epochs", "30"},
        {"train.patience", "2"},
        {"train.eval_batch", "4096"},
        {"prune.lr_t", "1e-4"},
        {"prune.alpha", "1e-5"},
        {"prune.t_init", "0"},
        {"search.n_m", "10"},
        {"search.n_c", "10"},
        {"search.iterations", "30"},
        {"search.prob", "0.1"},
        {"search.k", "15"},
        {"retrain.mode", "optembed"},
        {"evaluate.target", "final"},
        {"seed", "42"},
    };
    return defaults;
}

std::string trim(const std::string& s) {
    size_t begin = 0, end = s.size();
    while (begin < end && std::isspace(static_cast<unsigned char>(s[begin]))) ++begin;
    while (end > begin && std::isspace(static_cast<unsigned char>(s[end - 1]))) --end;
    return s.substr(begin, end - begin);
}

std::vector<std::string> split_csv(const std::string& s) {
    std::vector<std::string> parts;
    if (s.empty()) return parts;
    size_t start = 0;
    while (true) {
        const size_t pos = s.find(',', start);
        if (pos == std::string::npos) {
            parts.push_back(trim(s.substr(start)));
            break;
        }
        parts.push_back(trim(s.substr(start, pos - start)));
        start = pos + 1;
    }
    return parts;
}

double parse_double(const std::string& key, const std::string& v) {
    try {
        size_t used = 0;
        const double x = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument("trailing");
        return x;
    } catch (const std::exception&) {
        throw std::invalid_argument("config key '" + key + "': not a number: '" + v + "'");
    }
}

uint64_t parse_u64(const std::string& key, const std::string& v) {
    try {
        size_t used = 0;
        const unsigned long long x = std::stoull(v, &used);
        if (used != v.size()) throw std::invalid_argument("trailing");
        return x;
    } catch (const std::exception&) {
        throw std::invalid_argument("config key '" + key + "': not a non-negative integer: '" +
                                    v + "'");
    }
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw std::invalid_argument("config key '" + key + "': expected true/false, got '" + v + "'");
}

}  // namespace

Config Config::defaults() {
    Config cfg;
    cfg.values_ = default_values();
    return cfg;
}

Config Config::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file " + path);
    Config cfg = defaults();
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const size_t hash_pos = line.find('#');
        if (hash_pos != std::string::npos) line = line.substr(0, hash_pos);
        line = trim(line);
        if (line.empty()) continue;
        const size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                     ": expected 'key = value'");
        }
        cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return cfg;
}

void Config::set(const std::string& key, const std::string& value) {
    if (default_values().find(key) == default_values().end()) {
        throw std::invalid_argument("unknown config key '" + key + "'");
    }
    values_[key] = value;
}

const std::string& Config::get(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw std::invalid_argument("unknown config key '" + key + "'");
    return it->second;
}

std::string Config::canonical_text() const {
    std::ostringstream out;
    for (const auto& [k, v] : values_) out << k << " = " << v << "\n";
    return out.str();
}

uint64_t Config::hash() const {
    const std::string text = canonical_text();
    uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string Config::hash_hex() const {
    static const char* digits = "0123456789abcdef";
    uint64_t h = hash();
    std::string out;
    for (int i = 0; i < 12; ++i) {
        out.push_back(digits[(h >> 60) & 0xf]);
        h <<= 4;
    }
    return out;
}

RunConfig RunConfig::from(const Config& cfg) {
    RunConfig rc;

    rc.data_source = cfg.get("data.source");
    if (rc.data_source != "synth" && rc.data_source != "file") {
        throw std::invalid_argument("data.source must be 'synth' or 'file'");
    }
    rc.data_path = cfg.get("data.path");
    const std::string delim = cfg.get("data.delimiter");
    if (delim == "tab" || delim == "\\t") {
        rc.delimiter = '\t';
    } else if (delim.size() == 1) {
        rc.delimiter = delim[0];
    } else {
        throw std::invalid_argument("data.delimiter must be a single character or 'tab'");
    }
    for (const auto& kind : split_csv(cfg.get("data.field_kinds"))) {
        if (kind == "cat") {
            rc.field_kinds.push_back(FieldKind::categorical);
        } else if (kind == "num") {
            rc.field_kinds.push_back(FieldKind::numeric);
        } else {
            throw std::invalid_argument("data.field_kinds entries must be 'cat' or 'num'");
        }
    }
    rc.min_count = static_cast<uint32_t>(parse_u64("data.min_count", cfg.get("data.min_count")));
    if (rc.min_count < 1) throw std::invalid_argument("data.min_count must be >= 1");
    rc.max_rows = parse_u64("data.max_rows", cfg.get("data.max_rows"));

    const std::string base = cfg.get("discretize.log_base");
    if (base == "natural") {
        rc.log_base = LogBase::natural;
    } else if (base == "log2") {
        rc.log_base = LogBase::log2;
    } else if (base == "log10") {
        rc.log_base = LogBase::log10;
    } else {
        throw std::invalid_argument("discretize.log_base must be natural, log2 or log10");
    }

    rc.synth.n_fields = parse_u64("synth.fields", cfg.get("synth.fields"));
    const auto cards = split_csv(cfg.get("synth.cardinalities"));
    if (cards.size() == 1) {
        const uint32_t c = static_cast<uint32_t>(parse_u64("synth.cardinalities", cards[0]));
        rc.synth.cardinalities.assign(rc.synth.n_fields, c);
    } else {
        for (const auto& c : cards) {
            rc.synth.cardinalities.push_back(
                static_cast<uint32_t>(parse_u64("synth.cardinalities", c)));
        }
    }
    rc.synth.n_informative = parse_u64("synth.informative", cfg.get("synth.informative"));
    rc.synth.n_rows = parse_u64("synth.rows", cfg.get("synth.rows"));
    rc.synth.noise_level = parse_double("synth.noise", cfg.get("synth.noise"));
    if (rc.synth.n_informative > rc.synth.n_fields) {
        throw std::invalid_argument("synth.informative cannot exceed synth.fields");
    }

    rc.embed_dim = static_cast<uint32_t>(parse_u64("model.embed_dim", cfg.get("model.embed_dim")));
    if (rc.embed_dim < 1) throw std::invalid_argument("model.embed_dim must be >= 1");
    for (const auto& w : split_csv(cfg.get("model.mlp_dims"))) {
        const uint64_t width = parse_u64("model.mlp_dims", w);
        if (width < 1) throw std::invalid_argument("model.mlp_dims entries must be >= 1");
        rc.mlp_dims.push_back(width);
    }
    rc.batch_norm = parse_bool("model.batch_norm", cfg.get("model.batch_norm"));
    rc.interaction = cfg.get("model.interaction");

    rc.lr = parse_double("train.lr", cfg.get("train.lr"));
    rc.l2 = parse_double("train.l2", cfg.get("train.l2"));
    if (rc.lr <= 0.0) throw std::invalid_argument("train.lr must be > 0");
    if (rc.l2 < 0.0) throw std::invalid_argument("train.l2 must be >= 0");
    rc.batch_size = static_cast<uint32_t>(parse_u64("train.batch_size", cfg.get("train.batch_size")));
    if (rc.batch_size < 2) throw std::invalid_argument("train.batch_size must be >= 2");
    rc.max_epochs = static_cast<uint32_t>(parse_u64("train.max_epochs", cfg.get("train.max_epochs")));
    if (rc.max_epochs < 1) throw std::invalid_argument("train.max_epochs must be >= 1");
    rc.patience = static_cast<uint32_t>(parse_u64("train.patience", cfg.get("train.patience")));
    if (rc.patience < 1) throw std::invalid_argument("train.patience must be >= 1");
    rc.eval_batch = static_cast<uint32_t>(parse_u64("train.eval_batch", cfg.get("train.eval_batch")));
    if (rc.eval_batch < 1) throw std::invalid_argument("train.eval_batch must be >= 1");

    rc.lr_t = parse_double("prune.lr_t", cfg.get("prune.lr_t"));
    rc.alpha = parse_double("prune.alpha", cfg.get("prune.alpha"));
    rc.t_init = parse_double("prune.t_init", cfg.get("prune.t_init"));
    if (rc.lr_t <= 0.0) throw std::invalid_argument("prune.lr_t must be > 0");
    if (rc.alpha < 0.0) throw std::invalid_argument("prune.alpha must be >= 0");

    rc.n_m = static_cast<uint32_t>(parse_u64("search.n_m", cfg.get("search.n_m")));
    rc.n_c = static_cast<uint32_t>(parse_u64("search.n_c", cfg.get("search.n_c")));
    if (rc.n_m + rc.n_c < 1) throw std::invalid_argument("search population must be non-empty");
    rc.search_iterations =
        static_cast<uint32_t>(parse_u64("search.iterations", cfg.get("search.iterations")));
    rc.mutation_prob = parse_double("search.prob", cfg.get("search.prob"));
    if (rc.mutation_prob < 0.0 || rc.mutation_prob > 1.0) {
        throw std::invalid_argument("search.prob must be in [0, 1]");
    }
    rc.topk = static_cast<uint32_t>(parse_u64("search.k", cfg.get("search.k")));
    if (rc.topk < 1) throw std::invalid_argument("search.k must be >= 1");

    rc.retrain_mode = cfg.get("retrain.mode");
    if (rc.retrain_mode != "optembed" && rc.retrain_mode != "baseline") {
        throw std::invalid_argument("retrain.mode must be 'optembed' or 'baseline'");
    }
    rc.evaluate_target = cfg.get("evaluate.target");
    if (rc.evaluate_target != "final" && rc.evaluate_target != "baseline" &&
        rc.evaluate_target != "supernet") {
        throw std::invalid_argument("evaluate.target must be final, baseline or supernet");
    }

    rc.seed = parse_u64("seed", cfg.get("seed"));
    return rc;
}

}  // namespace optembed
