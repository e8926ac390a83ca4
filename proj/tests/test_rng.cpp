#include "doctest.h"
#include "optembed/rng.hpp"

using namespace optembed;

TEST_CASE("rng is deterministic under a seed") {
    Rng a(123), b(123);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("rng streams differ") {
    Rng a = Rng::stream(42, 1);
    Rng b = Rng::stream(42, 2);
    CHECK(a.next_u64() != b.next_u64());
}

TEST_CASE("uniform stays in [0,1)") {
    Rng rng(7);
    for (int i = 0; i < 10000; ++i) {
        const double u = rng.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
    }
}

TEST_CASE("uniform_int covers the inclusive range") {
    Rng rng(9);
    bool seen_lo = false, seen_hi = false;
    for (int i = 0; i < 10000; ++i) {
        const uint64_t v = rng.uniform_int(3, 7);
        CHECK(v >= 3);
        CHECK(v <= 7);
        seen_lo |= v == 3;
        seen_hi |= v == 7;
    }
    CHECK(seen_lo);
    CHECK(seen_hi);
}

TEST_CASE("state round-trip resumes the stream") {
    Rng a(5);
    a.next_u64();
    const auto st = a.state();
    const uint64_t expected = a.next_u64();
    Rng b(0);
    b.set_state(st);
    CHECK(b.next_u64() == expected);
}
