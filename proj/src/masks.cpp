#include "optembed/masks.hpp"

#include <stdexcept>

namespace optembed {

DimensionMask sample_dim_mask(Rng& rng, size_t n_fields, uint32_t D) {
    if (D < 1) throw std::invalid_argument("sample_dim_mask: D must be >= 1");
    DimensionMask m;
    m.d.reserve(n_fields);
    for (size_t i = 0; i < n_fields; ++i) {
        m.d.push_back(static_cast<uint32_t>(rng.uniform_int(1, D)));
    }
    return m;
}

DimensionMask crossover(const DimensionMask& a, const DimensionMask& b, Rng& rng) {
    const size_t n = a.n_fields();
    if (n != b.n_fields()) throw std::invalid_argument("crossover: mask lengths differ");
    if (n < 2) throw std::invalid_argument("crossover: needs at least 2 fields");
    const size_t p = static_cast<size_t>(rng.uniform_int(1, n - 1));
    DimensionMask child;
    child.d.reserve(n);
    child.d.insert(child.d.end(), a.d.begin(), a.d.begin() + static_cast<ptrdiff_t>(p));
    child.d.insert(child.d.end(), b.d.begin() + static_cast<ptrdiff_t>(p), b.d.end());
    return child;
}

DimensionMask mutate(const DimensionMask& c, double prob, Rng& rng, uint32_t D) {
    DimensionMask out = c;
    for (auto& v : out.d) {
        if (rng.uniform() < prob) v = static_cast<uint32_t>(rng.uniform_int(1, D));
    }
    return out;
}

void validate_dim_mask(const DimensionMask& m, size_t n_fields, uint32_t D) {
    if (m.n_fields() != n_fields) {
        throw std::invalid_argument("dimension mask has " + std::to_string(m.n_fields()) +
                                    " fields, expected " + std::to_string(n_fields));
    }
    for (uint32_t v : m.d) {
        if (v < 1 || v > D) {
            throw std::invalid_argument("dimension mask entry " + std::to_string(v) +
                                        " outside [1, " + std::to_string(D) + "]");
        }
    }
}

}  // namespace optembed
