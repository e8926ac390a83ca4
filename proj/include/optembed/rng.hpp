#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace optembed {

// Deterministic 64-bit PRNG: xoshiro256** seeded through splitmix64.
// Every stochastic operation in the project takes an explicit Rng so that
// runs are reproducible bit-for-bit from a single master seed.

inline uint64_t splitmix64(uint64_t& state) {
    uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

class Rng {
public:
    explicit Rng(uint64_t seed = 0) { reseed(seed); }

    void reseed(uint64_t seed) {
        uint64_t sm = seed;
        for (auto& s : state_) s = splitmix64(sm);
    }

    // Derive an independent stream, e.g. per pipeline phase.
    static Rng stream(uint64_t seed, uint64_t stream_id) {
        uint64_t sm = seed;
        uint64_t mixed = splitmix64(sm) ^ (0xa0761d6478bd642fULL * (stream_id + 1));
        return Rng(mixed);
    }

    uint64_t next_u64() {
        const uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform on [lo, lo+1, ..., hi] inclusive. Modulo bias is < 2^-32 for the
    // spans used here (field counts, dimensions, vocab sizes).
    uint64_t uniform_int(uint64_t lo, uint64_t hi) {
        return lo + next_u64() % (hi - lo + 1);
    }

    // Standard normal via Box-Muller. Consumes two draws per value so the
    // stream position is a pure function of the call count.
    double gaussian() {
        double u1 = uniform();
        double u2 = uniform();
        if (u1 < 1e-300) u1 = 1e-300;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
    }

    std::array<uint64_t, 4> state() const { return state_; }
    void set_state(const std::array<uint64_t, 4>& s) { state_ = s; }

private:
    static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
    std::array<uint64_t, 4> state_{};
};

}  // namespace optembed
