#include <gtest/gtest.h>

#include <cmath>

#include "levy/measure.hpp"
#include "oracles.hpp"

using namespace levy;

namespace {

constexpr double kHuge = 1e60;

// Power-law moments from the oracle integrator, never from closed forms.
double oracle_radial(int M, double alpha, double a, double b, double kappa) {
    const double sphere = M == 1 ? 2.0 : 2.0 * M_PI;
    return sphere * oracle::log_radius_integral(
                        [&](double s) { return std::pow(s, M - 1 + kappa) * std::pow(s, -(M + alpha)); }, a, b);
}

}  // namespace

TEST(Integrability, PowerLawPasses) {
    const auto m = LevyMeasure::power_law(1, 1.5);
    EXPECT_TRUE(check_integrability(m).integrable);
}

TEST(Integrability, SteepDensityFails) {
    // q = |z|^{-3.5} on R^1: ∫_a^1 z^{-1.5} dz = 2(a^{-1/2} - 1) blows up.
    const auto m = LevyMeasure::create_unchecked(1, RadialDensity{[](double s) { return std::pow(s, -3.5); }});
    const auto rep = check_integrability(m);
    EXPECT_FALSE(rep.integrable);
    EXPECT_TRUE(std::isinf(rep.inner_second_moment));
    EXPECT_THROW((void)LevyMeasure::create(1, RadialDensity{[](double s) { return std::pow(s, -3.5); }}),
                 InvalidMeasure);
}

TEST(Integrability, HeavyTailFails) {
    const auto m = LevyMeasure::create_unchecked(1, RadialDensity{[](double s) { return 1.0 / (1.0 + s); }});
    EXPECT_FALSE(check_integrability(m).integrable);
}

TEST(Integrability, CompactBoxDensityPasses) {
    const auto m = LevyMeasure::create(1, RadialDensity{[](double) { return 1.0; }, 1.0});
    const auto rep = check_integrability(m);
    EXPECT_TRUE(rep.integrable);
    EXPECT_NEAR(rep.inner_second_moment, 2.0 / 3.0, 1e-12);
    EXPECT_EQ(rep.outer_mass, 0.0);
}

TEST(Integrability, RejectsOutOfRangeAlpha) {
    EXPECT_THROW((void)LevyMeasure::power_law(1, 2.5), InvalidMeasure);
    EXPECT_THROW((void)LevyMeasure::power_law(1, 0.0), InvalidMeasure);
    EXPECT_THROW((void)LevyMeasure::power_law(3, 1.0), DimensionMismatch);
}

TEST(SmallBall, UnitRadiusAlphaOne) {
    const auto m = LevyMeasure::power_law(1, 1.0);
    EXPECT_NEAR(m.small_ball_second_moment(1.0), 2.0, 1e-14);
    EXPECT_NEAR(m.small_ball_second_moment(1.0), oracle_radial(1, 1.0, 1.0 / kHuge, 1.0, 2.0), 1e-9);
}

TEST(SmallBall, PlanarAlphaHalf) {
    const auto m = LevyMeasure::power_law(2, 0.5);
    // 2-D Cartesian oracle in polar form: angular integral done numerically.
    const double radial = oracle::log_radius_integral([](double s) { return s * s * std::pow(s, -2.5) * s; }, 1e-40, 2.0);
    const double angular = oracle::simpson([](double) { return 1.0; }, 0.0, 2.0 * M_PI);
    EXPECT_NEAR(m.small_ball_second_moment(2.0), radial * angular, 1e-8 * radial * angular);
    EXPECT_NEAR(m.small_ball_second_moment(2.0), 11.847, 1e-3);
}

TEST(SmallBall, ShrinksMonotonicallyToZero) {
    for (const auto& m : {LevyMeasure::power_law(1, 1.2), LevyMeasure::create(1, RadialDensity{[](double s) { return std::exp(-s); }})}) {
        double prev = m.small_ball_second_moment(1.0);
        for (double r = 0.5; r > 1e-6; r *= 0.5) {
            const double v = m.small_ball_second_moment(r);
            EXPECT_LT(v, prev);
            prev = v;
        }
        EXPECT_LT(prev, 1e-3 * m.small_ball_second_moment(1.0));
    }
}

TEST(Tail, UnitTailAlphaOne) {
    const auto m = LevyMeasure::power_law(1, 1.0);
    EXPECT_NEAR(m.tail_mass(1.0), 2.0, 1e-14);
    EXPECT_NEAR(m.tail_mass(1.0), oracle_radial(1, 1.0, 1.0, kHuge, 0.0), 1e-9);
}

TEST(Tail, HalfAlphaMomentIsFinite) {
    for (double a : {0.3, 1.0, 1.7}) {
        const auto m = LevyMeasure::power_law(1, a);
        const double v = m.tail_moment(1.0, a / 2.0);
        EXPECT_TRUE(std::isfinite(v));
        EXPECT_NEAR(v, oracle_radial(1, a, 1.0, kHuge, a / 2.0), 1e-8 * v);
    }
}

TEST(Tail, BoundaryOrderDiverges) {
    const auto m = LevyMeasure::power_law(1, 1.0);
    EXPECT_THROW((void)m.tail_moment(1.0, 1.0), DivergentTail);
    EXPECT_THROW((void)m.tail_moment(1.0, 1.5), DivergentTail);
    const auto d = LevyMeasure::create(1, RadialDensity{[](double s) { return std::pow(s, -2.0); }});
    EXPECT_THROW((void)d.tail_moment(1.0, 1.0), DivergentTail);
    EXPECT_NEAR(d.tail_moment(1.0, 0.5), 2.0 / 0.5, 1e-9);
}

TEST(MeasureProperty, PowerLawMomentsMatchOracle) {
    for (int M : {1, 2}) {
        for (double a : {0.5, 1.0, 1.5}) {
            const auto m = LevyMeasure::power_law(M, a);
            for (double r : {0.01, 0.3, 1.0, 7.0}) {
                const double sb = m.small_ball_second_moment(r);
                EXPECT_NEAR(sb, oracle_radial(M, a, r / kHuge, r, 2.0), 1e-8 * sb);
                const double tm = m.tail_mass(r);
                EXPECT_NEAR(tm, oracle_radial(M, a, r, r * kHuge, 0.0), 1e-8 * tm);
                const double rm = m.radial_moment(r, 3.0 * r, 0.7);
                EXPECT_NEAR(rm, oracle_radial(M, a, r, 3.0 * r, 0.7), 1e-8 * rm);
            }
        }
    }
}

TEST(MeasureProperty, DensityMomentsMatchOracle) {
    // Tempered stable density: q = e^{-s} s^{-(1+a)}.
    const double a = 0.8;
    const auto q = [a](double s) { return std::exp(-s) * std::pow(s, -(1.0 + a)); };
    const auto m = LevyMeasure::create(1, RadialDensity{q});
    const double inner = 2.0 * oracle::log_radius_integral([&](double s) { return s * s * q(s); }, 1e-60, 0.5);
    EXPECT_NEAR(m.small_ball_second_moment(0.5), inner, 1e-8 * inner);
    const double tail = 2.0 * oracle::log_radius_integral(q, 0.5, 200.0);
    EXPECT_NEAR(m.tail_mass(0.5), tail, 1e-8 * tail);
}

TEST(MeasureProperty, MomentsAreAdditive) {
    for (const auto& m : {LevyMeasure::power_law(1, 0.7), LevyMeasure::power_law(2, 1.3)}) {
        for (double r1 : {0.05, 0.4}) {
            const double r2 = 3.3 * r1;
            const double lhs = m.small_ball_second_moment(r1) + m.radial_moment(r1, r2, 2.0);
            EXPECT_NEAR(lhs, m.small_ball_second_moment(r2), 1e-12 * lhs);
            const double tails = m.radial_moment(r1, r2, 0.0) + m.tail_mass(r2);
            EXPECT_NEAR(tails, m.tail_mass(r1), 1e-12 * tails);
        }
    }
}

TEST(MeasureProperty, SmallBallScaling) {
    for (double a : {0.5, 1.0, 1.5}) {
        const auto m = LevyMeasure::power_law(1, a);
        for (double lam : {0.5, 2.0, 10.0}) {
            const double lhs = m.small_ball_second_moment(lam * 0.3);
            const double rhs = std::pow(lam, 2.0 - a) * m.small_ball_second_moment(0.3);
            EXPECT_NEAR(lhs, rhs, 1e-14 * rhs);
        }
    }
}

TEST(MeasureProperty, PowerLawDensityPointwise) {
    const auto m1 = LevyMeasure::power_law(1, 1.3);
    const auto m2 = LevyMeasure::power_law(2, 0.6);
    for (double s : {1e-3, 0.2, 1.0, 5.5, 1e3}) {
        EXPECT_DOUBLE_EQ(m1.density(Point{-s}), std::pow(s, -2.3));
        EXPECT_DOUBLE_EQ(m2.density(Point{s * 0.6, s * 0.8}), std::pow(s, -2.6));
    }
}

TEST(MeasureProperty, TabulatedPowerLawReproducesClosedForm) {
    // Log-log interpolation reproduces an exact power law.
    TabulatedRadialDensity tab;
    for (double s = 0.01; s <= 100.0; s *= 1.7) {
        tab.radii.push_back(s);
        tab.values.push_back(std::pow(s, -2.0));
    }
    tab.tail_exponent = 2.0;
    const auto m = LevyMeasure::create(1, tab);
    const auto ref = LevyMeasure::power_law(1, 1.0);
    EXPECT_NEAR(m.small_ball_second_moment(0.5), ref.small_ball_second_moment(0.5), 1e-9);
    EXPECT_NEAR(m.tail_mass(0.5), ref.tail_mass(0.5), 1e-9);
}

TEST(Quadrature, TotalWeightMatchesTailDifference) {
    const auto m = LevyMeasure::power_law(1, 1.0);
    const auto q = build_quadrature(m, 0.01, 100.0);
    const double expect = m.tail_mass(0.01) - m.tail_mass(100.0);
    EXPECT_NEAR(q.total_weight(), expect, 1e-8 * expect);
    double nodes = 0.0;
    for (const auto& n : q.nodes) nodes += n.weight;
    EXPECT_NEAR(nodes, expect, 1e-8 * expect);
    EXPECT_LE(nodes, m.tail_mass(0.01) * (1.0 + 1e-12));
}

TEST(Quadrature, ShellStructure) {
    for (int M : {1, 2}) {
        const auto m = LevyMeasure::power_law(M, 1.4);
        const auto q = build_quadrature(m, 0.003, 50.0);
        ASSERT_FALSE(q.shells.empty());
        EXPECT_EQ(q.shells.front().r_in, 0.003);
        EXPECT_EQ(q.shells.back().r_out, 50.0);
        bool has_one = false;
        for (std::size_t k = 0; k < q.shells.size(); ++k) {
            const auto& sh = q.shells[k];
            EXPECT_LT(sh.r_in, sh.r_out);
            if (k) {
                EXPECT_EQ(sh.r_in, q.shells[k - 1].r_out);
            }
            has_one = has_one || sh.r_out == 1.0;
            double w = 0.0;
            for (std::size_t j = sh.first; j < sh.first + sh.count; ++j) {
                EXPECT_GE(q.nodes[j].weight, 0.0);
                const double r = q.nodes[j].z.norm();
                EXPECT_GE(r, sh.r_in);
                EXPECT_LE(r, sh.r_out);
                w += q.nodes[j].weight;
            }
            // Closed-form shell mass from the oracle integrator.
            const double mass = oracle_radial(M, 1.4, sh.r_in, sh.r_out, 0.0);
            EXPECT_NEAR(w, mass, 1e-10 * mass);
        }
        EXPECT_TRUE(has_one);
        for (std::size_t j = 0; j < q.nodes.size(); j += 2) {
            const Point s = q.nodes[j].z + q.nodes[j + 1].z;
            EXPECT_LT(s.norm(), 1e-14 * q.nodes[j].z.norm());
        }
        EXPECT_NEAR(q.exact_second_moment_inner, m.small_ball_second_moment(0.003), 0.0);
        EXPECT_NEAR(q.tail_mass_outer, m.tail_mass(50.0), 0.0);
    }
}

TEST(Quadrature, DegenerateRequestIsEmpty) {
    const auto m = LevyMeasure::power_law(1, 1.0);
    const auto q = build_quadrature(m, 0.5, 0.5);
    EXPECT_TRUE(q.nodes.empty());
    EXPECT_TRUE(q.shells.empty());
    EXPECT_NEAR(q.exact_second_moment_inner, 2.0 * 0.5, 1e-15);
}

TEST(Quadrature, RefinementContracts) {
    const auto m = LevyMeasure::power_law(1, 1.0);
    const auto far = [&](int n) {
        QuadratureOptions opt;
        opt.nodes_per_shell = n;
        const auto q = build_quadrature(m, 0.01, 100.0, opt);
        double s = 0.0;
        for (const auto& nd : q.nodes) s += nd.weight * std::exp(-nd.z.norm());
        return s;
    };
    const double q1 = far(1), q2 = far(2), q4 = far(4), q8 = far(8);
    EXPECT_LT(std::abs(q4 - q2), std::abs(q2 - q1));
    EXPECT_LT(std::abs(q8 - q4), std::abs(q4 - q2));
    // Oracle value of the same far-field integral.
    const double ref = 2.0 * oracle::log_radius_integral([](double s) { return std::exp(-s) / (s * s); }, 0.01, 100.0);
    EXPECT_NEAR(q8, ref, 1e-6 * ref);
}

TEST(Quadrature, ShellBudget) {
    const auto m = LevyMeasure::power_law(1, 1.0);
    QuadratureOptions opt;
    opt.growth_ratio = 1.001;
    opt.max_shells = 100;
    EXPECT_THROW((void)build_quadrature(m, 1e-3, 100.0, opt), ShellBudgetExceeded);
}
