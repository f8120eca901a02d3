#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "levy/nonlocal.hpp"
#include "oracles.hpp"

using namespace levy;

namespace {

std::shared_ptr<const Grid> line_grid(double half, int cells, const ScalarField& g) {
    return std::make_shared<const Grid>(Domain(1, Point{-half}, Point{half}, omega::OpenBall{Point{0.0}, 1.0}, g), cells);
}

std::shared_ptr<const Grid> square_grid(double half, int cells, const ScalarField& g) {
    return std::make_shared<const Grid>(
        Domain(2, Point{-half, -half}, Point{half, half}, omega::OpenBall{Point{0.0, 0.0}, 1.0}, g), cells);
}

std::vector<LevyMeasure> measures(int m) {
    std::vector<LevyMeasure> out;
    for (double a : {0.5, 1.0, 1.5}) out.push_back(LevyMeasure::power_law(m, a, a / 2.0));
    out.push_back(LevyMeasure::create(m, RadialDensity{[](double s) { return std::exp(-s) / (s * s); }}, 0.5));
    out.push_back(LevyMeasure::create(m, TabulatedRadialDensity{{0.1, 1.0, 10.0}, {100.0, 1.0, 0.01}, 3.0}, 0.5));
    return out;
}

std::vector<JumpKernel> kernels_for(int n) {
    std::vector<JumpKernel> out;
    out.emplace_back(n, n, kernels::Identity{});
    out.emplace_back(n, n, kernels::RadialScale{});
    out.emplace_back(n, 1, kernels::GradientDirection{0.1});
    out.emplace_back(n, 1, kernels::Axis{n - 1});
    if (n == 2) out.emplace_back(2, 1, kernels::Rotational{});
    return out;
}

QuadratureOptions dense(int nodes) {
    QuadratureOptions o;
    o.nodes_per_shell = nodes;
    return o;
}

SmoothFunction cosine() {
    SmoothFunction u;
    u.value = [](const Point& x) { return std::cos(x[0]); };
    u.gradient = [](const Point& x) { return Point{-std::sin(x[0])}; };
    u.hessian = [](const Point& x) {
        SmallMatrix H(1, 1);
        H(0, 0) = -std::cos(x[0]);
        return H;
    };
    u.sup_norm = 1.0;
    return u;
}

SmoothFunction gaussian(int n) {
    SmoothFunction u;
    u.value = [](const Point& x) { return std::exp(-x.norm2()); };
    u.gradient = [](const Point& x) { return (-2.0 * std::exp(-x.norm2())) * x; };
    u.hessian = [n](const Point& x) {
        SmallMatrix H(n, n);
        const double e = std::exp(-x.norm2());
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) H(i, j) = e * (4.0 * x[i] * x[j] - (i == j ? 2.0 : 0.0));
        return H;
    };
    u.sup_norm = 1.0;
    return u;
}

}  // namespace

TEST(LevyOracle, PiFromIndependentQuadrature) { EXPECT_NEAR(oracle::pi_from_levy_integral(), M_PI, 1e-8); }

TEST(LevySplit, ConstantsVanishAcrossZoo) {
    for (int n : {1, 2}) {
        const auto G = n == 1 ? line_grid(2.0, 64, ScalarField::constant(3.5)) : square_grid(2.0, 32, ScalarField::constant(3.5));
        const auto u = GridField::with_dirichlet(G, ScalarField::constant(3.5));
        for (const auto& k : kernels_for(n)) {
            for (const auto& m : measures(k.dim_m())) {
                const double eps = G->h();
                const auto q = build_quadrature(m, eps, 64.0);
                for (std::size_t idx : G->omega_nodes()) {
                    const auto d = gradient_hessian(u, idx);
                    const auto v = levy_split(u, idx, d, k, m, q, {eps, 0.0, SlackSign::neutral});
                    ASSERT_LE(std::abs(v.value), 1e-12) << k.name() << " " << m.family_name();
                }
            }
        }
    }
}

TEST(LevySplit, CosineEigenfunction) {
    const double pi = oracle::pi_from_levy_integral();
    const auto cosf = ScalarField::from_function([](const Point& x) { return std::cos(x[0]); }, "cos(x0)");
    const auto G = line_grid(2.0, 1 << 12, cosf);
    const auto u = GridField::from_function(G, cosf);
    const JumpKernel k(1, 1, kernels::Identity{});
    const auto m = LevyMeasure::power_law(1, 1.0, 0.5);
    const double h = G->h();
    const auto q = build_quadrature(m, h, 2048.0, dense(1024));
    for (double x : {0.0, 0.5, 1.0}) {
        const std::size_t idx = G->flat_index({static_cast<int>(std::lround((x + 2.0) / h)), 0});
        ASSERT_EQ(G->coord(idx)[0], x);
        const auto v = levy_split(u, idx, gradient_hessian(u, idx), k, m, q, {h, 0.0, SlackSign::neutral});
        EXPECT_NEAR(v.value, -pi * std::cos(x), 1e-3 * pi) << x;
        EXPECT_EQ(v.value, v.near_field + v.far_field);
        EXPECT_NEAR(v.tail_remainder_bound, 2.0 * 2.0 / 2048.0, 1e-15);
    }
}

TEST(LevySplit, QuadratureMismatch) {
    const auto G = line_grid(2.0, 16, ScalarField());
    const GridField u(G);
    const JumpKernel k(1, 1, kernels::Identity{});
    const auto m = LevyMeasure::power_law(1, 1.0);
    const auto q = build_quadrature(m, 0.125, 8.0);
    EXPECT_THROW((void)levy_split(u, 8, gradient_hessian(u, 8), k, m, q, {0.25, 0.0, SlackSign::neutral}),
                 QuadratureMismatch);
}

TEST(LevySplit, MonotoneInField) {
    std::mt19937 rng(17);
    std::uniform_real_distribution<double> val(-1.0, 1.0), bump(0.0, 0.5);
    for (int n : {1, 2}) {
        const auto G = n == 1 ? line_grid(2.0, 32, ScalarField()) : square_grid(2.0, 16, ScalarField());
        for (const auto& k : kernels_for(n)) {
            const auto m = LevyMeasure::power_law(k.dim_m(), 1.0);
            const double eps = G->h();
            const auto q = build_quadrature(m, eps, 16.0);
            for (int trial = 0; trial < 100; ++trial) {
                std::vector<double> a(G->size()), b(G->size());
                for (std::size_t i = 0; i < a.size(); ++i) {
                    a[i] = val(rng);
                    b[i] = a[i] + bump(rng);
                }
                const std::size_t idx = G->omega_nodes()[rng() % G->omega_nodes().size()];
                b[idx] = a[idx];
                const double ext = val(rng);
                const GridField fa(G, a, ScalarField::constant(ext)), fb(G, b, ScalarField::constant(ext + bump(rng)));
                const auto da = gradient_hessian(fa, idx);
                auto db = gradient_hessian(fb, idx);
                // Touching test functions share the gradient.
                if (k.gradient_dependent()) db.p = da.p;
                const TruncationParams t{eps, 0.0, SlackSign::neutral};
                const double ia = levy_split(fa, idx, da, k, m, q, t).value;
                const double ib = levy_split(fb, idx, db, k, m, q, t).value;
                ASSERT_LE(ia, ib + 1e-12) << k.name() << " n=" << n;
            }
        }
    }
}

TEST(LevySplit, CompensatorCancelsOnAffine) {
    const auto f = ScalarField::from_expression("0.7*x0 - 0.2", 1);
    const auto G = line_grid(2.0, 64, f);
    const auto u = GridField::from_function(G, f);
    const JumpKernel k(1, 1, kernels::Identity{});
    for (double a : {0.5, 1.0, 1.5}) {
        const auto m = LevyMeasure::power_law(1, a);
        const auto q = build_quadrature(m, G->h(), 4.0);
        for (std::size_t idx : G->omega_nodes())
            EXPECT_LE(std::abs(levy_split(u, idx, gradient_hessian(u, idx), k, m, q, {G->h(), 0.0, SlackSign::neutral}).value),
                      1e-12);
    }
}

TEST(LevySplit, DeltaSlackSigns) {
    const auto G = line_grid(2.0, 32, ScalarField());
    const auto u = GridField::from_function(G, ScalarField::from_expression("exp(-x0^2)", 1));
    const JumpKernel k(1, 1, kernels::Identity{});
    const auto m = LevyMeasure::power_law(1, 1.0);
    const double eps = G->h();
    const auto q = build_quadrature(m, eps, 16.0);
    const std::size_t idx = 16;
    const auto d = gradient_hessian(u, idx);
    const double v0 = levy_split(u, idx, d, k, m, q, {eps, 0.0, SlackSign::neutral}).value;
    const double vs = levy_split(u, idx, d, k, m, q, {eps, 0.5, SlackSign::sub}).value;
    const double vp = levy_split(u, idx, d, k, m, q, {eps, 0.5, SlackSign::super}).value;
    // m2(eps) = 2 eps for alpha = 1, so the slack is delta * 2 eps.
    EXPECT_NEAR(vs - v0, 0.5 * 2.0 * eps, 1e-14);
    EXPECT_NEAR(v0 - vp, 0.5 * 2.0 * eps, 1e-14);
}

TEST(LevySmooth, ZeroAndCosineAtHalfPi) {
    const JumpKernel k(1, 1, kernels::Identity{});
    const auto m = LevyMeasure::power_law(1, 1.0);
    const auto q = build_quadrature(m, 1.0 / 64, 2048.0, dense(1024));
    SmoothFunction zero;
    zero.value = [](const Point&) { return 0.0; };
    EXPECT_EQ(levy_smooth(zero, Point{0.3}, std::nullopt, k, m, q).value, 0.0);
    EXPECT_NEAR(levy_smooth(cosine(), Point{M_PI / 2}, std::nullopt, k, m, q).value, 0.0, 1e-6);
    const double pi = oracle::pi_from_levy_integral();
    for (double x : {0.0, 0.5, 1.0}) EXPECT_NEAR(levy_smooth(cosine(), Point{x}, std::nullopt, k, m, q).value, -pi * std::cos(x), 1e-3 * pi);
}

TEST(LevySmooth, RadialScaleDegeneratesAtOrigin) {
    for (int n : {1, 2}) {
        const JumpKernel k(n, n, kernels::RadialScale{}, {0.5, 0.5, 0.5, 0.5, 1.0});
        const auto m = LevyMeasure::power_law(n, 1.0);
        const auto q = build_quadrature(m, 0.01, 100.0);
        const auto v = levy_smooth(gaussian(n), n == 1 ? Point{0.0} : Point{0.0, 0.0}, std::nullopt, k, m, q);
        EXPECT_EQ(v.value, 0.0);
    }
}

TEST(LevySmooth, FiniteDifferenceFallback) {
    const JumpKernel k(1, 1, kernels::Identity{});
    const auto m = LevyMeasure::power_law(1, 1.5);
    const auto q = build_quadrature(m, 0.05, 64.0, dense(32));
    SmoothFunction bare;
    bare.value = gaussian(1).value;
    const double a = levy_smooth(gaussian(1), Point{0.4}, std::nullopt, k, m, q).value;
    const double b = levy_smooth(bare, Point{0.4}, std::nullopt, k, m, q).value;
    EXPECT_NEAR(a, b, 1e-6);
}

TEST(LevySmooth, UnboundedDataIsNotIntegrable) {
    const JumpKernel k(1, 1, kernels::Identity{});
    const auto m = LevyMeasure::power_law(1, 0.5);
    const auto q = build_quadrature(m, 0.1, 4096.0);
    SmoothFunction sq;
    sq.value = [](const Point& x) { return x[0] * x[0]; };
    EXPECT_THROW((void)levy_smooth(sq, Point{0.0}, std::nullopt, k, m, q), NonIntegrable);
}

TEST(LevySmooth, TaylorRemainderShrinks) {
    const JumpKernel k(1, 1, kernels::Identity{});
    const auto m = LevyMeasure::power_law(1, 1.0);
    double prev = 1.0;
    for (double eps : {0.1, 0.05, 0.025}) {
        const auto q = build_quadrature(m, eps, 16.0);
        const double b = levy_smooth(gaussian(1), Point{0.5}, std::nullopt, k, m, q).taylor_remainder_bound;
        EXPECT_GT(b, 0.0);
        EXPECT_LT(b, prev);
        prev = b;
    }
}

TEST(Refinement, DeltaTermGivesOrderTwoMinusAlpha) {
    const JumpKernel k(1, 1, kernels::Identity{});
    std::vector<double> eps;
    for (int j = 4; j <= 10; ++j) eps.push_back(std::ldexp(1.0, -j));
    for (double a : {0.5, 1.0, 1.5}) {
        const auto m = LevyMeasure::power_law(1, a);
        RefinementOptions opt;
        opt.z_max = 64.0;
        opt.quadrature = dense(16);
        opt.delta = 0.1;
        opt.sign = SlackSign::sub;
        const auto t = epsilon_refinement_study(gaussian(1), Point{0.3}, k, m, eps, opt);
        EXPECT_NEAR(t.mean_order(), 2.0 - a, 0.3) << a;
    }
}

TEST(Refinement, ConstantFieldAllZero) {
    const auto G = line_grid(2.0, 256, ScalarField::constant(2.0));
    const auto u = GridField::constant(G, 2.0);
    const JumpKernel k(1, 1, kernels::Identity{});
    const auto m = LevyMeasure::power_law(1, 1.0);
    const auto t = epsilon_refinement_study(u, 128, k, m, {0.25, 0.125, 0.0625, 0.03125});
    for (const auto& r : t.rows) EXPECT_EQ(r.value, 0.0);
}

TEST(Refinement, LimitMatchesSmooth) {
    const JumpKernel k(1, 1, kernels::Identity{});
    const auto m = LevyMeasure::power_law(1, 0.5);
    RefinementOptions opt;
    opt.z_max = 2048.0;
    opt.quadrature = dense(1024);
    const auto t = epsilon_refinement_study(cosine(), Point{0.7}, k, m, {1.0 / 8, 1.0 / 16, 1.0 / 32, 1.0 / 64}, opt);
    const auto ref = levy_smooth(cosine(), Point{0.7}, std::nullopt, k, m, build_quadrature(m, 1.0 / 256, 2048.0, dense(1024)));
    EXPECT_NEAR(t.rows.back().value, ref.value, 1e-6);
}

TEST(Refinement, CsvLayout) {
    RefinementTable t;
    t.rows.push_back({0.5, 1.0, 0.25, 0.75, std::numeric_limits<double>::quiet_NaN()});
    t.rows.push_back({0.25, 1.5, 0.5, 1.0, 0.5});
    std::ostringstream os;
    write_refinement_csv(os, t);
    EXPECT_EQ(os.str(), "epsilon,value,near,far,delta_prev\n0.5,1,0.25,0.75,\n0.25,1.5,0.5,1,0.5\n");
}

TEST(Consistency, SplitConvergesToSmoothInH) {
    // Fixed eps isolates the grid error, which is second order in h.
    const auto gf = ScalarField::from_expression("exp(-x0^2)", 1);
    const JumpKernel k(1, 1, kernels::Identity{});
    const auto m = LevyMeasure::power_law(1, 1.0);
    const double eps = 0.125;
    const auto q = build_quadrature(m, eps, 64.0, dense(16));
    const double exact = levy_smooth(gaussian(1), Point{0.5}, std::nullopt, k, m, q).value;
    std::vector<double> errs;
    for (int cells : {64, 128, 256, 512}) {
        const auto G = line_grid(4.0, cells, gf);
        const auto u = GridField::from_function(G, gf);
        const std::size_t idx = G->flat_index({static_cast<int>(std::lround(4.5 / G->h())), 0});
        ASSERT_EQ(G->coord(idx)[0], 0.5);
        errs.push_back(std::abs(levy_split(u, idx, gradient_hessian(u, idx), k, m, q, {eps, 0.0, SlackSign::neutral}).value - exact));
    }
    const double slope = std::log2(errs[1] / errs[3]) / 2.0;
    EXPECT_GE(slope, 1.5);
}
