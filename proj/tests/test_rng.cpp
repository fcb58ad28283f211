#include "doctest.h"

#include <cmath>
#include <set>

#include "dnsl/rng.hpp"

using namespace dnsl;

TEST_CASE("philox4x32-10 matches the published test vectors") {
    // Known-answer vectors from the Random123 distribution.
    auto r0 = Philox4x32::generate({0, 0, 0, 0}, {0, 0});
    CHECK(r0[0] == 0x6627e8d5u);
    CHECK(r0[1] == 0xe169c58du);
    CHECK(r0[2] == 0xbc57ac4cu);
    CHECK(r0[3] == 0x9b00dbd8u);

    auto r1 = Philox4x32::generate({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu},
                                   {0xffffffffu, 0xffffffffu});
    CHECK(r1[0] == 0x408f276du);
    CHECK(r1[1] == 0x41c83b0eu);
    CHECK(r1[2] == 0xa20bc7c6u);
    CHECK(r1[3] == 0x6d5451fdu);

    auto r2 = Philox4x32::generate({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u},
                                   {0xa4093822u, 0x299f31d0u});
    CHECK(r2[0] == 0xd16cfe09u);
    CHECK(r2[1] == 0x94fdccebu);
    CHECK(r2[2] == 0x5001e420u);
    CHECK(r2[3] == 0x24126ea1u);
}

TEST_CASE("counter rng is reproducible and stream-separated") {
    CounterRng a(42, 7), b(42, 7), c(42, 8);
    CHECK(a.normal(3, 1) == b.normal(3, 1));
    CHECK(a.uniform(0, 0) == b.uniform(0, 0));
    CHECK(a.normal(3, 1) != c.normal(3, 1));
}

TEST_CASE("normals have the right first two moments") {
    CounterRng rng(123, 0);
    const int n = 200000;
    double s = 0.0, s2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double z = rng.normal(i, 0);
        s += z;
        s2 += z * z;
    }
    const double mean = s / n;
    const double var = s2 / n - mean * mean;
    CHECK(std::abs(mean) < 4.0 / std::sqrt(double(n)));
    CHECK(std::abs(var - 1.0) < 4.0 * std::sqrt(2.0 / n));
}

TEST_CASE("uniforms stay in [0,1)") {
    CounterRng rng(9, 1);
    for (int i = 0; i < 1000; ++i) {
        const double u = rng.uniform(i, 2);
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
    }
}
