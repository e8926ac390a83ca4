#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "optembed/rng.hpp"

namespace optembed {

enum class FieldKind : uint8_t { categorical = 0, numeric = 1 };

// Raw tabular data: one label plus one token per field per row.
struct RawDataset {
    std::vector<std::string> field_names;
    std::vector<FieldKind> field_kinds;
    std::vector<uint8_t> labels;
    std::vector<std::string> tokens;  // row-major, n per row

    size_t n_fields() const { return field_names.size(); }
    size_t n_rows() const { return labels.size(); }
    const std::string& token(size_t row, size_t field) const {
        return tokens[row * n_fields() + field];
    }
};

enum class LogBase : uint8_t { natural = 0, log2 = 1, log10 = 2 };

// Bucket token for a raw numeric value: "1" when x <= 2 or missing (NaN),
// otherwise the decimal rendering of floor(log(x)^2) in the configured base.
std::string discretize_numeric(double x, LogBase base = LogBase::natural);

// Replaces every numeric field's tokens by their bucket tokens; missing or
// unparseable values fold into the "1" bucket. Field kinds become categorical.
RawDataset discretize_numeric_fields(const RawDataset& raw, LogBase base);

struct FieldSchema {
    struct Field {
        std::string name;
        uint32_t cardinality = 0;   // kept tokens + 1 OOV slot
        uint32_t offset = 0;        // global index of this field's OOV slot
        std::vector<std::string> vocab;               // local index 1.. in order
        std::unordered_map<std::string, uint32_t> token_to_local;
    };

    std::vector<Field> fields;
    uint32_t total = 0;  // |f| = sum of cardinalities

    size_t n_fields() const { return fields.size(); }
    // Field owning a global row index (linear scan; schema sizes are small).
    size_t field_of(uint32_t global) const;
    // Token for a global index; local index 0 renders as "<OOV>".
    std::string decode(uint32_t global) const;
    uint32_t encode_token(size_t field, const std::string& token) const;
};

// Vocabulary per field keeps tokens with frequency >= min_count, ordered by
// descending frequency then lexicographic token, local indices starting at 1;
// index 0 is the reserved OOV slot. Deterministic for any row permutation.
FieldSchema build_schema(const RawDataset& raw, uint32_t min_count);

struct EncodedDataset {
    std::vector<uint8_t> labels;
    std::vector<uint32_t> indices;  // row-major, n global indices per row
    size_t n_fields = 0;

    size_t n_rows() const { return labels.size(); }
    std::span<const uint32_t> row(size_t r) const {
        return {indices.data() + r * n_fields, n_fields};
    }
};

EncodedDataset encode(const RawDataset& raw, const FieldSchema& schema);

struct SplitView {
    EncodedDataset train, val, test;
};

// Deterministic shuffle under the seed, then sizes floor(0.8 N), floor(0.1 N),
// remainder. Throws below 10 rows.
SplitView split(const EncodedDataset& ds, uint64_t seed);

struct SynthSpec {
    size_t n_fields = 8;
    std::vector<uint32_t> cardinalities;  // one per field
    size_t n_informative = 4;             // fields 0..n_informative-1 drive the label
    size_t n_rows = 50000;
    double noise_level = 1.0;             // std of extra gaussian logit noise
};

// Planted-structure generator: every value of an informative field carries a
// hidden weight ~ N(0,1); labels are Bernoulli(sigmoid(sum of weights + noise)).
// Values of noise fields are drawn independently of the label. Token draws use
// a Zipf-like distribution so frequencies are long-tailed.
RawDataset synth_generate(const SynthSpec& spec, uint64_t seed);

// Delimiter-separated loader: first line is the header, exactly one column
// must be named "label", remaining columns are fields in header order.
RawDataset load_delimited(const std::string& path, char delimiter,
                          const std::vector<FieldKind>& kinds, size_t max_rows = 0);

// Serialized prepared dataset: schema + encoded splits, magic "OEDS".
struct PreparedData {
    FieldSchema schema;
    SplitView splits;

    // Occurrence count per global row index over the training split.
    std::vector<uint64_t> train_frequencies() const;
};

void save_prepared(const PreparedData& data, const std::string& path);
PreparedData load_prepared(const std::string& path);

}  // namespace optembed
