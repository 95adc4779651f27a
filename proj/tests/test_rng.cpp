#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "optosync/rng.hpp"

using optosync::Philox4x32;

// Known-answer vectors of the Philox4x32-10 reference implementation.
TEST(Philox, KnownAnswers) {
    using A4 = std::array<std::uint32_t, 4>;
    using A2 = std::array<std::uint32_t, 2>;
    EXPECT_EQ(Philox4x32::raw(A4{0, 0, 0, 0}, A2{0, 0}), (A4{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8}));
    EXPECT_EQ(Philox4x32::raw(A4{0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, A2{0xffffffff, 0xffffffff}),
              (A4{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd}));
    EXPECT_EQ(Philox4x32::raw(A4{0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, A2{0xa4093822, 0x299f31d0}),
              (A4{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1}));
}

TEST(Philox, DeterministicPerStream) {
    Philox4x32 a(42, 7), b(42, 7), c(42, 8), d(43, 7);
    std::vector<std::uint32_t> va, vb, vc, vd;
    for (int i = 0; i < 64; ++i) {
        va.push_back(a());
        vb.push_back(b());
        vc.push_back(c());
        vd.push_back(d());
    }
    EXPECT_EQ(va, vb);
    EXPECT_NE(va, vc);
    EXPECT_NE(va, vd);
}

TEST(Philox, UniformOpenInterval) {
    Philox4x32 g(1, 0);
    double sum = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        double u = g.uniform();
        ASSERT_GT(u, 0.0);
        ASSERT_LT(u, 1.0);
        sum += u;
    }
    // Var of the mean of U(0,1) is 1/(12 n).
    EXPECT_NEAR(sum / n, 0.5, 4.0 * std::sqrt(1.0 / (12.0 * n)));
}

TEST(Philox, NormalMoments) {
    Philox4x32 g(99, 3);
    const int n = 200000;
    double s1 = 0, s2 = 0, s4 = 0;
    for (int i = 0; i < n; ++i) {
        double x = g.normal();
        s1 += x;
        s2 += x * x;
        s4 += x * x * x * x;
    }
    EXPECT_NEAR(s1 / n, 0.0, 4.0 / std::sqrt(n));
    EXPECT_NEAR(s2 / n, 1.0, 4.0 * std::sqrt(2.0 / n));
    EXPECT_NEAR(s4 / n, 3.0, 4.0 * std::sqrt(96.0 / n));
}

TEST(Philox, ComplexNormalQuadratures) {
    Philox4x32 g(5, 5);
    const int n = 100000;
    double rr = 0, ii = 0, ri = 0;
    for (int i = 0; i < n; ++i) {
        auto z = g.complex_normal(0.25);
        rr += z.real() * z.real();
        ii += z.imag() * z.imag();
        ri += z.real() * z.imag();
    }
    double se = 0.25 * std::sqrt(2.0 / n);
    EXPECT_NEAR(rr / n, 0.25, 4 * se);
    EXPECT_NEAR(ii / n, 0.25, 4 * se);
    EXPECT_NEAR(ri / n, 0.0, 4 * 0.25 / std::sqrt(n));
}
