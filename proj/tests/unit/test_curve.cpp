#include <gtest/gtest.h>

#include <random>

#include "flatlab/curve.hpp"
#include "flatlab/perfectness.hpp"

using namespace flatlab;

TEST(Curve, BuiltinsCertify) {
    auto p = parabola();
    EXPECT_NEAR(p.convexity_margin(), 2.0, 1e-12);
    EXPECT_NEAR(p.second_derivative_sup(), 2.0, 1e-12);
    EXPECT_DOUBLE_EQ(flatness_constant(p), 0.5);
    EXPECT_NEAR(flatness_constant(half_parabola()), 1.0 / std::sqrt(2.0), 1e-15);
    EXPECT_DOUBLE_EQ(default_A(0.5), 20.0);
    EXPECT_THROW(p.value(2.5), validation_error);
}

TEST(Curve, RejectsNonConvexAndInconsistent) {
    EXPECT_THROW(CurveSpec("cubic", [](double x) { return x * x * x; }, [](double x) { return 3 * x * x; },
                           [](double x) { return 6 * x; }, 0.0),
                 validation_error);
    // convex but phi' does not match phi
    EXPECT_THROW(CurveSpec("bad", [](double x) { return x * x; }, [](double x) { return 2.1 * x; },
                           [](double) { return 2.0; }, 0.0),
                 validation_error);
    // margin eaten by the declared modulus: phi'' = 0.001 + x^2 sampled, modulus large
    EXPECT_THROW(CurveSpec("flat", [](double x) { return 0.0005 * x * x + x * x * x * x / 12; },
                           [](double x) { return 0.001 * x + x * x * x / 3; },
                           [](double x) { return 0.001 + x * x; }, 10.0),
                 validation_error);
}

TEST(Curve, PiecewisePolynomialTables) {
    // x^2 on [-2, 0], x^2 + x^3 / 6 on [0, 2]: C^2 at 0, phi'' = 2 + x > 0
    PiecewisePolynomial pp{{-2, 0, 2}, {{0, 0, 1}, {0, 0, 1, 1.0 / 6}}};
    auto c = curve_from_polynomial("table", pp);
    EXPECT_NEAR(c.value(1.0), 1.0 + 1.0 / 6, 1e-15);
    EXPECT_NEAR(c.slope(1.0), 2.5, 1e-15);
    EXPECT_GT(c.convexity_margin(), 1.9);
    PiecewisePolynomial kink{{-2, 0, 2}, {{0, 0, 1}, {0, 0, 2}}};
    EXPECT_THROW(curve_from_polynomial("kink", kink), validation_error);
    PiecewisePolynomial short_cover{{-1, 1}, {{0, 0, 1}}};
    EXPECT_THROW(curve_from_polynomial("short", short_cover), validation_error);
}

TEST(Tangent, Examples) {
    auto p = parabola();
    auto f0 = tangent_projection(p, 0.0);
    EXPECT_NEAR(f0.tangent[0], 1.0, 1e-15);
    EXPECT_NEAR(f0.tangent[1], 0.0, 1e-15);
    EXPECT_NEAR(f0.projection().angle(), std::numbers::pi / 2, 1e-15);
    auto f = tangent_projection(p, 0.5);
    EXPECT_NEAR(f.tangent[0], 1 / std::sqrt(2.0), 1e-15);
    EXPECT_NEAR(f.tangent[1], 1 / std::sqrt(2.0), 1e-15);
    EXPECT_NEAR(f.normal[0], -1 / std::sqrt(2.0), 1e-15);
    EXPECT_NEAR(f.normal[1], 1 / std::sqrt(2.0), 1e-15);
    EXPECT_THROW(tangent_projection(p, 1.5), validation_error);
}

TEST(Tangent, SlopesStrictlyIncrease) {
    for (const auto& c : {parabola(), half_parabola()}) {
        double prev = -1e9;
        for (int k = 0; k < 64; ++k) {
            const double s = c.slope(-1.0 + 2.0 * k / 63);
            EXPECT_GT(s, prev);
            prev = s;
        }
    }
}

TEST(Tangent, ProjectionDistanceComparableToSlopeGap) {
    // ||pi_1 - pi_2|| = 2 sin(|atan s1 - atan s2| / 2), which lies between
    // (2/pi) |s1 - s2| / (1 + max s^2) and |s1 - s2|.
    auto p = parabola();
    const double smax = p.max_slope();
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> all(-1.0, 1.0), mid(-0.5, 0.5);
    for (int t = 0; t < 100; ++t) {
        const double a = all(rng), b = all(rng);
        if (std::abs(a - b) < 1e-6) continue;
        const double r = projection_distance(tangent_projection(p, a).projection(), tangent_projection(p, b).projection()) /
                         std::abs(p.slope(a) - p.slope(b));
        EXPECT_GE(r, (2 / std::numbers::pi) / (1 + smax * smax));
        EXPECT_LE(r, 1.0 + 1e-12);
    }
    for (int t = 0; t < 100; ++t) {
        const double a = mid(rng), b = mid(rng);
        if (std::abs(a - b) < 1e-6) continue;
        const double r = projection_distance(tangent_projection(p, a).projection(), tangent_projection(p, b).projection()) /
                         std::abs(p.slope(a) - p.slope(b));
        EXPECT_GE(r, 0.25);
        EXPECT_LE(r, 4.0);
    }
}

TEST(Containment, HoldsForCertifiedC) {
    for (const auto& curve : {parabola(), half_parabola()}) {
        const double c = flatness_constant(curve);
        for (int m = 8; m <= 16; m += 2) {
            auto rep = verify_containment(curve, c, Scale(m, 2));
            EXPECT_TRUE(rep.ok) << curve.name() << " m " << m << " worst " << rep.worst_normal;
            EXPECT_GT(rep.checked, 0u);
        }
    }
}

TEST(Containment, BreaksWhenCIsTooLarge) {
    auto p = parabola();
    const double c = flatness_constant(p);
    auto rep = verify_containment(p, 4 * c > 1 ? 1.0 : 4 * c, Scale(16, 2));
    EXPECT_FALSE(rep.ok);
}

TEST(Cover, SingleNeighbourhoodGivesOneBall) {
    auto nu = lattice_uniform(Scale(12, 1), 0, 3);
    auto s = lift_to_curve(nu, parabola());
    auto cov = curve_cover(s, Scale(4, 2), 4.0, 0.5);
    EXPECT_EQ(cov.balls.size(), 1u);
    EXPECT_EQ(cov.uncovered, 0u);
}

TEST(Cover, LiftedLebesgueCountAndInvariants) {
    const auto p = parabola();
    const double c = flatness_constant(p);
    auto nu = lattice_uniform(Scale(10, 1), -1024, 1024);
    auto s = lift_to_curve(nu, p);
    auto cov = curve_cover(s, Scale(4, 2), 2.0, c);
    const double Delta = 1.0 / 16;
    const double ref = 2.0 / (c * Delta);
    EXPECT_GE(static_cast<double>(cov.balls.size()), ref / 4);
    EXPECT_LE(static_cast<double>(cov.balls.size()), ref * 4);
    // arclength / separation, with the arclength integral of sqrt(1 + 4x^2) on [-1, 1]
    const double L = std::sqrt(5.0) + std::asinh(2.0) / 2;
    EXPECT_NEAR(static_cast<double>(cov.balls.size()) / (L / (c * Delta / 2)), 1.0, 0.25);
    EXPECT_EQ(cov.uncovered, 0u);
    EXPECT_EQ(cov.overlap_violations, 0u);
    EXPECT_LE(cov.max_overlap, cover_overlap_bound);
    EXPECT_GE(cov.min_separation, c * Delta / 2);
    EXPECT_EQ(cov.diameter_violations, 0u);
}

TEST(Cover, Cantor4OnParabola) {
    auto s = lift_to_curve(from_ifs(cantor4_spec(), Scale(10, 1)), parabola());
    PerfectnessQuery q;
    q.D = 16;
    q.window = Window::everything(2);
    ASSERT_LT(scan_perfectness(s, q).best_beta, 1.0);
    for (int mD : {2, 3, 4}) {
        auto cov = curve_cover(s, Scale(mD, 2), 16.0, 0.5);
        EXPECT_EQ(cov.uncovered, 0u);
        EXPECT_LE(cov.max_overlap, cover_overlap_bound);
        EXPECT_GE(cov.min_separation, 0.5 * cov.radius);
        EXPECT_EQ(cov.diameter_violations, 0u) << "Delta 2^-" << mD;
    }
}
