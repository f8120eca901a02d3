#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "levy/grid.hpp"

using namespace levy;

namespace {

std::shared_ptr<const Grid> ball_grid(int n_dim, int cells, const char* g = "0") {
    const Point lo = n_dim == 1 ? Point{-2.0} : Point{-2.0, -2.0};
    const Point hi = n_dim == 1 ? Point{2.0} : Point{2.0, 2.0};
    const Point c = n_dim == 1 ? Point{0.0} : Point{0.0, 0.0};
    return std::make_shared<const Grid>(
        Domain(n_dim, lo, hi, omega::OpenBall{c, 1.0}, ScalarField::from_expression(g, n_dim)), cells);
}

}  // namespace

TEST(GridLayout, RowMajorAndSymmetric) {
    const auto G = ball_grid(2, 8);
    EXPECT_EQ(G->size(), 81u);
    EXPECT_EQ(G->coord(0)[0], -2.0);
    EXPECT_EQ(G->coord(1)[1], -1.5);  // x1 varies fastest
    EXPECT_EQ(G->coord(9)[0], -1.5);
    for (std::size_t k = 0; k < G->size(); ++k) {
        const auto idx = G->multi_index(k);
        EXPECT_EQ(G->flat_index(idx), k);
        const auto mirror = G->flat_index({8 - idx[0], 8 - idx[1]});
        EXPECT_EQ(G->coord(mirror)[0], -G->coord(k)[0]);
        EXPECT_EQ(G->coord(mirror)[1], -G->coord(k)[1]);
    }
}

TEST(GridDomain, OmegaMustClearBoxWhenBounded) {
    EXPECT_THROW(Domain(1, Point{-1.0}, Point{1.0}, omega::OpenBall{Point{0.0}, 1.5}, ScalarField()), InvalidDomain);
    EXPECT_THROW(Domain(1, Point{1.0}, Point{-1.0}, omega::OpenBall{Point{0.0}, 0.5}, ScalarField()), InvalidDomain);
    EXPECT_NO_THROW(Domain(1, Point{-2.0}, Point{2.0}, omega::OpenBall{Point{0.0}, 1.0}, ScalarField()));
}

TEST(GridDomain, HalfSpaceTruncatesAtBoxEdge) {
    const Grid G(Domain(1, Point{-4.0}, Point{4.0}, omega::HalfSpace{Point{1.0}, 0.0}, ScalarField()), 8);
    EXPECT_FALSE(G.domain().bounded());
    EXPECT_EQ(G.truncated_nodes(), 1u);  // x = -4
    EXPECT_EQ(G.omega_nodes().size(), 3u);  // -3, -2, -1
}

TEST(Differences, AffineIsExact) {
    const auto G = ball_grid(2, 16);
    const auto u = GridField::from_function(G, ScalarField::from_expression("3*x0 - 2*x1 + 1", 2));
    for (std::size_t k : G->omega_nodes()) {
        const auto d = gradient_hessian(u, k);
        EXPECT_NEAR(d.p[0], 3.0, 1e-12);
        EXPECT_NEAR(d.p[1], -2.0, 1e-12);
        EXPECT_NEAR(d.X(0, 0), 0.0, 1e-10);
        EXPECT_NEAR(d.X(1, 1), 0.0, 1e-10);
        EXPECT_NEAR(d.X(0, 1), 0.0, 1e-10);
    }
}

TEST(Differences, QuadraticHessian) {
    const auto G = ball_grid(1, 16);
    const auto u = GridField::from_function(G, ScalarField::from_expression("0.5*x0^2", 1));
    for (std::size_t k : G->omega_nodes()) EXPECT_NEAR(gradient_hessian(u, k).X(0, 0), 1.0, 1e-12);
    const auto G2 = ball_grid(2, 16);
    const auto v = GridField::from_function(G2, ScalarField::from_expression("x0*x1", 2));
    for (std::size_t k : G2->omega_nodes()) {
        const auto d = gradient_hessian(v, k);
        EXPECT_NEAR(d.X(0, 1), 1.0, 1e-12);
        EXPECT_NEAR(d.X(0, 0), 0.0, 1e-12);
    }
}

TEST(Differences, SecondOrderConvergence) {
    double prev = 0.0;
    for (int cells : {16, 32, 64, 128}) {
        const auto G = ball_grid(1, cells);
        const auto u = GridField::from_function(G, ScalarField::from_expression("sin(x0)", 1));
        double err = 0.0;
        for (std::size_t k : G->omega_nodes()) err = std::max(err, std::abs(gradient_hessian(u, k).p[0] - std::cos(G->coord(k)[0])));
        if (prev > 0.0) {
            EXPECT_NEAR(prev / err, 4.0, 0.1);
        }
        prev = err;
    }
}

TEST(Differences, BoxEdgeRejected) {
    const auto G = ball_grid(2, 8);
    const auto u = GridField::constant(G, 1.0);
    EXPECT_THROW((void)gradient_hessian(u, 0), IndexOnBoxEdge);
    EXPECT_THROW((void)gradient_hessian(u, 8), IndexOnBoxEdge);
    EXPECT_NO_THROW((void)gradient_hessian(u, 10));
}

TEST(SampleExtended, NodesOutsideAndMidpoints) {
    const auto G = ball_grid(2, 10, "x0^2 + 7");
    std::vector<double> vals(G->size());
    std::mt19937 rng(1);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (auto& v : vals) v = u(rng);
    const GridField f(G, vals, G->domain().g());
    for (std::size_t k = 0; k < G->size(); ++k) EXPECT_EQ(f.sample_extended(G->coord(k)), vals[k]);
    EXPECT_EQ(f.sample_extended(Point{3.0, 0.0}), 16.0);
    EXPECT_EQ(f.sample_extended(Point{0.0, -2.5}), 7.0);
    const std::size_t k = G->flat_index({3, 4});
    const Point mid = 0.5 * (G->coord(k) + G->coord(k + 1));
    EXPECT_NEAR(f.sample_extended(mid), 0.5 * (vals[k] + vals[k + 1]), 1e-15);
}

TEST(SampleExtended, ReproducesAffineInside) {
    const auto G = ball_grid(2, 7);
    const auto f = GridField::from_function(G, ScalarField::from_expression("2*x0 - x1", 2));
    std::mt19937 rng(2);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (int i = 0; i < 1000; ++i) {
        const Point y{u(rng), u(rng)};
        EXPECT_NEAR(f.sample_extended(y), 2.0 * y[0] - y[1], 1e-13);
    }
}

TEST(SampleExtended, MonotoneAndNonexpansive) {
    const auto G = ball_grid(2, 12);
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> u(-1.0, 1.0), pos(0.0, 1.0), y(-2.2, 2.2);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> a(G->size()), b(G->size());
        double gap = 0.0;
        for (std::size_t k = 0; k < a.size(); ++k) {
            a[k] = u(rng);
            b[k] = a[k] + pos(rng);
            gap = std::max(gap, b[k] - a[k]);
        }
        const GridField fa(G, a, ScalarField()), fb(G, b, ScalarField());
        for (int i = 0; i < 200; ++i) {
            const Point p{y(rng), y(rng)};
            const double va = fa.sample_extended(p), vb = fb.sample_extended(p);
            EXPECT_LE(va, vb);
            EXPECT_LE(vb - va, gap);
        }
    }
}

TEST(GridFieldTest, DirichletAndRefresh) {
    const auto G = ball_grid(1, 8, "x0^2");
    const auto u = GridField::with_dirichlet(G, ScalarField::constant(5.0));
    for (std::size_t k = 0; k < G->size(); ++k) {
        if (G->in_omega(k))
            EXPECT_EQ(u[k], 5.0);
        else
            EXPECT_EQ(u[k], G->coord(k)[0] * G->coord(k)[0]);
    }
    EXPECT_EQ(u.sup_norm(), 5.0);
}

TEST(Csv, HeaderAndRoundTrip) {
    const auto G = ball_grid(2, 4);
    const auto u = GridField::from_function(G, ScalarField::from_expression("x0/3", 2));
    std::ostringstream os;
    write_csv(os, u);
    std::istringstream is(os.str());
    std::string line;
    std::getline(is, line);
    EXPECT_EQ(line, "x0,x1,u");
    std::size_t rows = 0;
    while (std::getline(is, line)) {
        double x0, x1, v;
        ASSERT_EQ(std::sscanf(line.c_str(), "%lf,%lf,%lf", &x0, &x1, &v), 3);
        EXPECT_EQ(v, u[rows]);
        EXPECT_EQ(x0, G->coord(rows)[0]);
        ++rows;
    }
    EXPECT_EQ(rows, G->size());
}
