#pragma once

#include <cstdint>
#include <vector>

#include "optembed/data.hpp"
#include "optembed/rng.hpp"

namespace optembed {

// Per-row keep/prune mask over the embedding table, one bit per feature value.
struct EmbeddingMask {
    std::vector<uint8_t> keep;  // |f| entries in {0,1}

    size_t kept_count() const {
        size_t c = 0;
        for (uint8_t k : keep) c += k;
        return c;
    }

    static EmbeddingMask all_ones(size_t n) {
        EmbeddingMask m;
        m.keep.assign(n, 1);
        return m;
    }
};

// Per-field count of leading embedding columns kept, d_i in [1, D]. Expands to
// a binary column mask whose first d_i entries are ones.
struct DimensionMask {
    std::vector<uint32_t> d;

    size_t n_fields() const { return d.size(); }

    bool operator==(const DimensionMask& o) const { return d == o.d; }

    double mean_dim() const {
        if (d.empty()) return 0.0;
        double s = 0.0;
        for (uint32_t v : d) s += v;
        return s / static_cast<double>(d.size());
    }

    static DimensionMask full(size_t n, uint32_t D) {
        DimensionMask m;
        m.d.assign(n, D);
        return m;
    }
};

// Each d_i drawn independently, uniform on {1, ..., D}.
DimensionMask sample_dim_mask(Rng& rng, size_t n_fields, uint32_t D);

// Single-point crossover: cut point p uniform in {1, ..., n-1}, child takes
// a's entries before p and b's from p on. Requires n >= 2.
DimensionMask crossover(const DimensionMask& a, const DimensionMask& b, Rng& rng);

// Independently per position, with the given probability, replace d_i by a
// fresh uniform draw from {1, ..., D} (the draw may repeat the old value).
DimensionMask mutate(const DimensionMask& c, double prob, Rng& rng, uint32_t D);

void validate_dim_mask(const DimensionMask& m, size_t n_fields, uint32_t D);

}  // namespace optembed
