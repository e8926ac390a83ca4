#include "optembed/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "optembed/io.hpp"

namespace optembed {

std::string discretize_numeric(double x, LogBase base) {
    if (std::isnan(x) || x <= 2.0) return "1";
    double lg = 0.0;
    switch (base) {
        case LogBase::natural: lg = std::log(x); break;
        case LogBase::log2: lg = std::log2(x); break;
        case LogBase::log10: lg = std::log10(x); break;
    }
    return std::to_string(static_cast<long long>(std::floor(lg * lg)));
}

RawDataset discretize_numeric_fields(const RawDataset& raw, LogBase base) {
    RawDataset out = raw;
    for (size_t f = 0; f < raw.n_fields(); ++f) {
        if (raw.field_kinds[f] != FieldKind::numeric) continue;
        for (size_t r = 0; r < raw.n_rows(); ++r) {
            const std::string& tok = raw.token(r, f);
            double x = std::numeric_limits<double>::quiet_NaN();
            if (!tok.empty()) {
                try {
                    size_t used = 0;
                    const double parsed = std::stod(tok, &used);
                    if (used == tok.size() && std::isfinite(parsed)) x = parsed;
                } catch (const std::exception&) {
                    // unparseable -> missing
                }
            }
            out.tokens[r * raw.n_fields() + f] = discretize_numeric(x, base);
        }
        out.field_kinds[f] = FieldKind::categorical;
    }
    return out;
}

size_t FieldSchema::field_of(uint32_t global) const {
    for (size_t i = 0; i < fields.size(); ++i) {
        if (global >= fields[i].offset && global < fields[i].offset + fields[i].cardinality) {
            return i;
        }
    }
    throw std::out_of_range("global index " + std::to_string(global) + " outside schema of " +
                            std::to_string(total));
}

std::string FieldSchema::decode(uint32_t global) const {
    const size_t f = field_of(global);
    const uint32_t local = global - fields[f].offset;
    if (local == 0) return "<OOV>";
    return fields[f].vocab[local - 1];
}

uint32_t FieldSchema::encode_token(size_t field, const std::string& token) const {
    const Field& f = fields[field];
    auto it = f.token_to_local.find(token);
    const uint32_t local = it == f.token_to_local.end() ? 0u : it->second;
    return f.offset + local;
}

FieldSchema build_schema(const RawDataset& raw, uint32_t min_count) {
    if (raw.n_rows() == 0) throw std::invalid_argument("build_schema: empty input");
    FieldSchema schema;
    schema.fields.resize(raw.n_fields());
    uint32_t offset = 0;
    for (size_t f = 0; f < raw.n_fields(); ++f) {
        auto& field = schema.fields[f];
        field.name = raw.field_names[f];
        field.offset = offset;

        std::unordered_map<std::string, uint64_t> freq;
        for (size_t r = 0; r < raw.n_rows(); ++r) ++freq[raw.token(r, f)];

        std::vector<std::pair<std::string, uint64_t>> kept;
        for (const auto& [tok, count] : freq) {
            if (count >= min_count) kept.emplace_back(tok, count);
        }
        std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
            if (a.second != b.second) return a.second > b.second;
            return a.first < b.first;
        });

        field.vocab.reserve(kept.size());
        for (size_t i = 0; i < kept.size(); ++i) {
            field.vocab.push_back(kept[i].first);
            field.token_to_local.emplace(kept[i].first, static_cast<uint32_t>(i + 1));
        }
        field.cardinality = static_cast<uint32_t>(kept.size() + 1);
        offset += field.cardinality;
    }
    schema.total = offset;
    return schema;
}

EncodedDataset encode(const RawDataset& raw, const FieldSchema& schema) {
    if (raw.n_fields() != schema.n_fields()) {
        throw std::invalid_argument("encode: dataset has " + std::to_string(raw.n_fields()) +
                                    " fields, schema has " + std::to_string(schema.n_fields()));
    }
    EncodedDataset out;
    out.n_fields = raw.n_fields();
    out.labels = raw.labels;
    out.indices.reserve(raw.n_rows() * raw.n_fields());
    for (size_t r = 0; r < raw.n_rows(); ++r) {
        for (size_t f = 0; f < raw.n_fields(); ++f) {
            out.indices.push_back(schema.encode_token(f, raw.token(r, f)));
        }
    }
    return out;
}

SplitView split(const EncodedDataset& ds, uint64_t seed) {
    const size_t N = ds.n_rows();
    if (N < 10) throw std::invalid_argument("split: dataset too small to split");
    std::vector<uint32_t> order(N);
    for (size_t i = 0; i < N; ++i) order[i] = static_cast<uint32_t>(i);
    Rng rng(seed);
    for (size_t i = N - 1; i > 0; --i) {
        const size_t j = static_cast<size_t>(rng.uniform_int(0, i));
        std::swap(order[i], order[j]);
    }
    const size_t n_train = static_cast<size_t>(std::floor(0.8 * static_cast<double>(N)));
    const size_t n_val = static_cast<size_t>(std::floor(0.1 * static_cast<double>(N)));

    SplitView out;
    auto fill = [&](EncodedDataset& part, size_t begin, size_t end) {
        part.n_fields = ds.n_fields;
        part.labels.reserve(end - begin);
        part.indices.reserve((end - begin) * ds.n_fields);
        for (size_t i = begin; i < end; ++i) {
            const uint32_t r = order[i];
            part.labels.push_back(ds.labels[r]);
            auto row = ds.row(r);
            part.indices.insert(part.indices.end(), row.begin(), row.end());
        }
    };
    fill(out.train, 0, n_train);
    fill(out.val, n_train, n_train + n_val);
    fill(out.test, n_train + n_val, N);
    return out;
}

namespace {

// Zipf-ish sampler over {0..card-1} by inverse CDF; the table is tiny so the
// linear scan is fine.
struct ZipfSampler {
    std::vector<double> cdf;

    explicit ZipfSampler(uint32_t card, double s = 1.1) {
        cdf.resize(card);
        double total = 0.0;
        for (uint32_t v = 0; v < card; ++v) total += 1.0 / std::pow(static_cast<double>(v + 1), s);
        double acc = 0.0;
        for (uint32_t v = 0; v < card; ++v) {
            acc += 1.0 / std::pow(static_cast<double>(v + 1), s) / total;
            cdf[v] = acc;
        }
        cdf.back() = 1.0;
    }

    uint32_t draw(Rng& rng) const {
        const double u = rng.uniform();
        for (uint32_t v = 0; v < cdf.size(); ++v) {
            if (u < cdf[v]) return v;
        }
        return static_cast<uint32_t>(cdf.size() - 1);
    }
};

}  // namespace

RawDataset synth_generate(const SynthSpec& spec, uint64_t seed) {
    if (spec.n_rows == 0 || spec.n_fields == 0) {
        throw std::invalid_argument("synth_generate: zero rows or fields");
    }
    if (spec.n_informative > spec.n_fields) {
        throw std::invalid_argument("synth_generate: more informative fields than fields");
    }
    if (spec.cardinalities.size() != spec.n_fields) {
        throw std::invalid_argument("synth_generate: need one cardinality per field");
    }

    Rng rng(seed);
    // Hidden per-value weights for informative fields.
    std::vector<std::vector<double>> weights(spec.n_informative);
    for (size_t f = 0; f < spec.n_informative; ++f) {
        weights[f].resize(spec.cardinalities[f]);
        for (double& w : weights[f]) w = rng.gaussian();
    }
    std::vector<ZipfSampler> samplers;
    samplers.reserve(spec.n_fields);
    for (size_t f = 0; f < spec.n_fields; ++f) samplers.emplace_back(spec.cardinalities[f]);

    RawDataset out;
    out.field_names.reserve(spec.n_fields);
    for (size_t f = 0; f < spec.n_fields; ++f) out.field_names.push_back("f" + std::to_string(f));
    out.field_kinds.assign(spec.n_fields, FieldKind::categorical);
    out.labels.reserve(spec.n_rows);
    out.tokens.reserve(spec.n_rows * spec.n_fields);

    for (size_t r = 0; r < spec.n_rows; ++r) {
        double logit = 0.0;
        for (size_t f = 0; f < spec.n_fields; ++f) {
            const uint32_t v = samplers[f].draw(rng);
            out.tokens.push_back("v" + std::to_string(v));
            if (f < spec.n_informative) logit += weights[f][v];
        }
        logit += spec.noise_level * rng.gaussian();
        const double p = 1.0 / (1.0 + std::exp(-logit));
        out.labels.push_back(rng.uniform() < p ? 1 : 0);
    }
    return out;
}

RawDataset load_delimited(const std::string& path, char delimiter,
                          const std::vector<FieldKind>& kinds, size_t max_rows) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);

    auto split_line = [&](const std::string& line) {
        std::vector<std::string> parts;
        size_t start = 0;
        while (true) {
            const size_t pos = line.find(delimiter, start);
            if (pos == std::string::npos) {
                parts.push_back(line.substr(start));
                break;
            }
            parts.push_back(line.substr(start, pos - start));
            start = pos + 1;
        }
        return parts;
    };

    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error(path + ": missing header line");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto header = split_line(line);

    size_t label_col = header.size();
    RawDataset out;
    for (size_t c = 0; c < header.size(); ++c) {
        if (header[c] == "label") {
            if (label_col != header.size()) throw std::runtime_error(path + ": duplicate label column");
            label_col = c;
        } else {
            out.field_names.push_back(header[c]);
        }
    }
    if (label_col == header.size()) throw std::runtime_error(path + ": no column named 'label'");
    if (kinds.empty()) {
        out.field_kinds.assign(out.field_names.size(), FieldKind::categorical);
    } else if (kinds.size() != out.field_names.size()) {
        throw std::runtime_error(path + ": config declares " + std::to_string(kinds.size()) +
                                 " field kinds but file has " +
                                 std::to_string(out.field_names.size()) + " fields");
    } else {
        out.field_kinds = kinds;
    }

    size_t row_number = 1;
    while (std::getline(in, line)) {
        ++row_number;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto parts = split_line(line);
        if (parts.size() != header.size()) {
            throw std::runtime_error(path + ": row " + std::to_string(row_number) + " has " +
                                     std::to_string(parts.size()) + " columns, expected " +
                                     std::to_string(header.size()));
        }
        const std::string& lab = parts[label_col];
        if (lab != "0" && lab != "1") {
            throw std::runtime_error(path + ": row " + std::to_string(row_number) +
                                     " label must be 0 or 1, got '" + lab + "'");
        }
        out.labels.push_back(lab == "1" ? 1 : 0);
        for (size_t c = 0; c < parts.size(); ++c) {
            if (c != label_col) out.tokens.push_back(parts[c]);
        }
        if (max_rows > 0 && out.labels.size() >= max_rows) break;
    }
    return out;
}

std::vector<uint64_t> PreparedData::train_frequencies() const {
    std::vector<uint64_t> freq(schema.total, 0);
    for (uint32_t idx : splits.train.indices) ++freq[idx];
    return freq;
}

namespace {

constexpr char kDataMagic[4] = {'O', 'E', 'D', 'S'};
constexpr uint32_t kDataVersion = 1;

void write_encoded(BinaryWriter& w, const EncodedDataset& ds) {
    w.u64(ds.n_rows());
    w.u64(ds.n_fields);
    for (uint8_t l : ds.labels) w.u8(l);
    for (uint32_t i : ds.indices) w.u32(i);
}

EncodedDataset read_encoded(BinaryReader& r) {
    EncodedDataset ds;
    const uint64_t rows = r.u64();
    ds.n_fields = r.u64();
    ds.labels.resize(rows);
    for (auto& l : ds.labels) l = r.u8();
    ds.indices.resize(rows * ds.n_fields);
    for (auto& i : ds.indices) i = r.u32();
    return ds;
}

}  // namespace

void save_prepared(const PreparedData& data, const std::string& path) {
    BinaryWriter w;
    w.magic(kDataMagic);
    w.u32(kDataVersion);
    w.u32(static_cast<uint32_t>(data.schema.n_fields()));
    for (const auto& f : data.schema.fields) {
        w.str(f.name);
        w.u32(f.cardinality);
        w.u32(f.offset);
        w.u32(static_cast<uint32_t>(f.vocab.size()));
        for (const auto& tok : f.vocab) w.str(tok);
    }
    write_encoded(w, data.splits.train);
    write_encoded(w, data.splits.val);
    write_encoded(w, data.splits.test);
    w.save(path);
}

PreparedData load_prepared(const std::string& path) {
    BinaryReader r = BinaryReader::from_file(path);
    r.expect_magic(kDataMagic, path.c_str());
    const uint32_t version = r.u32();
    if (version != kDataVersion) {
        throw std::runtime_error(path + ": unsupported dataset cache version " +
                                 std::to_string(version));
    }
    PreparedData data;
    const uint32_t n_fields = r.u32();
    data.schema.fields.resize(n_fields);
    uint32_t total = 0;
    for (auto& f : data.schema.fields) {
        f.name = r.str();
        f.cardinality = r.u32();
        f.offset = r.u32();
        const uint32_t vocab_size = r.u32();
        f.vocab.reserve(vocab_size);
        for (uint32_t i = 0; i < vocab_size; ++i) {
            f.vocab.push_back(r.str());
            f.token_to_local.emplace(f.vocab.back(), i + 1);
        }
        total += f.cardinality;
    }
    data.schema.total = total;
    data.splits.train = read_encoded(r);
    data.splits.val = read_encoded(r);
    data.splits.test = read_encoded(r);
    return data;
}

}  // namespace optembed
