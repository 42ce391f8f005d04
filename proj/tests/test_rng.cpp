#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "imix/rng.hpp"

using namespace imix;

TEST_CASE("same seed and stream give identical sequences") {
    Rng a(42, 3), b(42, 3);
    for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("different streams of one seed are unrelated") {
    Rng a(42, 1), b(42, 2);
    int equal = 0;
    for (int i = 0; i < 1000; ++i)
        if (a.next_u64() == b.next_u64()) ++equal;
    CHECK(equal == 0);
}

TEST_CASE("consuming one stream never shifts another") {
    Rng mask = make_stream(7, RngStream::Mask);
    Rng shuffle1 = make_stream(7, RngStream::Shuffle);
    for (int i = 0; i < 123; ++i) mask.normal();
    Rng shuffle2 = make_stream(7, RngStream::Shuffle);
    for (int i = 0; i < 100; ++i) CHECK(shuffle1.next_u64() == shuffle2.next_u64());
}

TEST_CASE("uniform stays in [0,1) and fills the range") {
    Rng r(1, 0);
    double lo = 1.0, hi = 0.0;
    for (int i = 0; i < 10000; ++i) {
        const double u = r.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        lo = std::min(lo, u);
        hi = std::max(hi, u);
    }
    CHECK(lo < 0.01);
    CHECK(hi > 0.99);
}

TEST_CASE("uniform(lo,hi) respects bounds") {
    Rng r(5, 0);
    for (int i = 0; i < 1000; ++i) {
        const double u = r.uniform(-2.5, 3.5);
        CHECK(u >= -2.5);
        CHECK(u < 3.5);
    }
}

TEST_CASE("below(n) covers all residues") {
    Rng r(9, 0);
    std::set<std::uint64_t> seen;
    for (int i = 0; i < 1000; ++i) {
        const auto v = r.below(7);
        CHECK(v < 7);
        seen.insert(v);
    }
    CHECK(seen.size() == 7);
}

TEST_CASE("normal variates have roughly standard moments") {
    Rng r(13, 0);
    const int n = 100000;
    double s1 = 0.0, s2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double x = r.normal();
        s1 += x;
        s2 += x * x;
    }
    const double mean = s1 / n;
    const double var = s2 / n - mean * mean;
    CHECK(std::abs(mean) < 0.02);
    CHECK(std::abs(var - 1.0) < 0.03);
}

TEST_CASE("normal sequence is deterministic including the cached draw") {
    Rng a(3, 3), b(3, 3);
    for (int i = 0; i < 101; ++i) CHECK(a.normal() == b.normal());
}
