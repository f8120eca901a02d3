#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "levy/local_op.hpp"

using namespace levy;

namespace {

LocalOperator linear(int n, double gamma, const char* f, double c) {
    return LocalOperator(n, LinearProper{gamma, ScalarField::from_expression(f, n), c});
}

}  // namespace

TEST(EvalLocal, ZeroAtBalance) {
    const auto F = linear(1, 1.0, "1", 0.0);
    EXPECT_EQ(eval_local(F, Point{0.3}, 1.0, Point{0.0}, SmallMatrix(1, 1)), 0.0);
}

TEST(EvalLocal, TraceByHand) {
    const auto F = linear(2, 2.0, "0", 1.0);
    for (double r : {-1.5, 0.0, 2.0})
        EXPECT_EQ(eval_local(F, Point{0.1, 0.2}, r, Point{0.0, 0.0}, SmallMatrix::identity(2)), 2.0 * r - 2.0);
}

TEST(EvalLocal, AsymmetricHessianRejected) {
    const auto F = linear(2, 1.0, "0", 1.0);
    SmallMatrix X(2, 2);
    X(0, 1) = 1.0;
    EXPECT_THROW((void)eval_local(F, Point{0.0, 0.0}, 0.0, Point{0.0, 0.0}, X), AsymmetricHessian);
}

TEST(EvalLocal, CustomEchoMatchesLinear) {
    const auto F = linear(2, 1.5, "sin(x0) + x1^2", 0.25);
    const auto f = ScalarField::from_expression("sin(x0) + x1^2", 2);
    const LocalOperator echo(2, CustomLocal{[f](const Point& x, double r, const Point&, const SmallMatrix& X) {
                                                return 1.5 * r - f(x) - 0.25 * X.trace();
                                            },
                                            1.5});
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> u(-5.0, 5.0);
    for (int i = 0; i < 1000; ++i) {
        const Point x{u(rng), u(rng)}, p{u(rng), u(rng)};
        SmallMatrix X(2, 2);
        X(0, 0) = u(rng);
        X(1, 1) = u(rng);
        X(0, 1) = X(1, 0) = u(rng);
        const double r = u(rng);
        EXPECT_EQ(eval_local(F, x, r, p, X) - eval_local(echo, x, r, p, X), 0.0);
    }
}

TEST(EvalLocal, AffineInR) {
    const auto F = linear(1, 0.75, "cos(x0)", 0.5);
    SmallMatrix X(1, 1);
    X(0, 0) = 0.25;
    // Dyadic data keeps every product exact.
    for (double r : {-2.0, 0.5, 4.0})
        for (double d : {0.125, 1.0, 8.0})
            EXPECT_EQ(eval_local(F, Point{0.0}, r + d, Point{0.0}, X) - eval_local(F, Point{0.0}, r, Point{0.0}, X), 0.75 * d);
}

TEST(CheckProper, OwnGammaZeroSlack) {
    const auto rep = check_proper(linear(2, 1.0, "x0", 0.3));
    EXPECT_TRUE(rep.pass);
    EXPECT_NEAR(rep.worst, 0.0, 1e-12);
}

TEST(CheckProper, OverstatedGammaFails) {
    const auto rep = check_proper(linear(1, 1.0, "1", 0.0), 1.5);
    EXPECT_FALSE(rep.pass);
    EXPECT_NEAR(rep.worst, -0.5, 1e-9);
}

TEST(CheckEllipticity, PositiveDiffusionPasses) { EXPECT_TRUE(check_ellipticity(linear(2, 1.0, "0", 1.0)).pass); }

TEST(CheckEllipticity, ReversedTraceFails) {
    const LocalOperator bad(2, CustomLocal{[](const Point&, double r, const Point&, const SmallMatrix& X) {
                                              return r + X.trace();
                                          },
                                          1.0});
    const auto rep = check_ellipticity(bad);
    EXPECT_FALSE(rep.pass);
    EXPECT_LT(rep.worst, 0.0);
}

TEST(CheckEllipticity, ZeroPerturbationCounts) {
    // c = 0 makes every D-comparison an equality.
    const auto rep = check_ellipticity(linear(1, 1.0, "x0", 0.0));
    EXPECT_TRUE(rep.pass);
    EXPECT_GE(rep.worst, 0.0);
}

TEST(CheckStructure, LipschitzSourcePasses) {
    const auto rep = check_structure(linear(1, 1.0, "3*sin(x0)", 0.0), [](double s) { return 3.0 * s; });
    EXPECT_TRUE(rep.pass);
    EXPECT_FALSE(rep.note.empty());
}

TEST(CheckStructure, ConstantSourceZeroModulus) {
    EXPECT_TRUE(check_structure(linear(2, 1.0, "2", 1.0), [](double) { return 0.0; }).pass);
}

TEST(CheckStructure, DiscontinuousSourceFails) {
    const LocalOperator F(1, LinearProper{1.0, ScalarField::from_function(
                                                   [](const Point& x) { return x[0] > 0.0 ? 1.0 : (x[0] < 0.0 ? -1.0 : 0.0); },
                                                   "sign(x0)"),
                                          0.0});
    const auto rep = check_structure(F, [](double s) { return 10.0 * std::sqrt(s); });
    EXPECT_FALSE(rep.pass);
    EXPECT_LT(std::abs(rep.witness[0]), 1e-2);
}

TEST(MonotoneMap, BuiltinsPassCustomDecreasingFails) {
    EXPECT_TRUE(check_monotone_map(NonlocalScalarMap(IdentityMap{})).pass);
    EXPECT_TRUE(check_monotone_map(NonlocalScalarMap(CubicMonotone{0.1})).pass);
    EXPECT_FALSE(check_monotone_map(NonlocalScalarMap(CustomMap{[](double s) { return -s; }})).pass);
}

TEST(MonotoneMap, AntitoneComposition) {
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> u(-20.0, 20.0);
    for (const auto& G : {NonlocalScalarMap(IdentityMap{}), NonlocalScalarMap(CubicMonotone{0.7})}) {
        for (int i = 0; i < 1000; ++i) {
            double a = u(rng), b = u(rng);
            if (a > b) std::swap(a, b);
            EXPECT_GE(G(-a), G(-b));
        }
    }
}

TEST(Lipschitz, IdentityInflated) { EXPECT_NEAR(lipschitz_estimate(NonlocalScalarMap(IdentityMap{}), -3.0, 5.0).value, 1.1, 1e-10); }

TEST(Lipschitz, CubicOnSymmetricInterval) {
    // sup |G'| = 1 + 3 kappa s^2 at s = 2.
    const auto est = lipschitz_estimate(NonlocalScalarMap(CubicMonotone{1.0}), -2.0, 2.0);
    EXPECT_NEAR(est.value, 1.1 * 13.0, 1.1 * 13.0 * 1e-3);
    EXPECT_EQ(*NonlocalScalarMap(CubicMonotone{1.0}).exact_lipschitz(-2.0, 2.0), 13.0);
}

TEST(Lipschitz, DegenerateInterval) {
    const auto est = lipschitz_estimate(NonlocalScalarMap(IdentityMap{}), 1.0, 1.0);
    EXPECT_EQ(est.value, 0.0);
    EXPECT_FALSE(est.warning.empty());
}
