#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <random>
#include <string>

#include "levy/expr.hpp"

using levy::expr::Expr;

namespace {

double eval(const std::string& text, std::initializer_list<double> x) {
    const std::vector<double> v(x);
    return Expr::parse(text).evaluate(std::span<const double>(v));
}

// Generates random well-formed text from the grammar.
class RandomExpr {
public:
    explicit RandomExpr(unsigned seed) : rng_(seed) {}

    std::string expr(int depth) {
        std::string s = term(depth);
        const int n = pick(3);
        for (int i = 0; i < n; ++i) s += (pick(2) ? " + " : " - ") + term(depth - 1);
        return s;
    }

private:
    std::string term(int depth) {
        std::string s = factor(depth);
        const int n = pick(2);
        for (int i = 0; i < n; ++i) s += (pick(2) ? "*" : "/") + factor(depth - 1);
        return s;
    }
    std::string factor(int depth) {
        std::string s = base(depth);
        if (depth > 0 && pick(4) == 0) s += "^" + base(0);
        return s;
    }
    std::string base(int depth) {
        const int k = depth <= 0 ? pick(4) : pick(8);
        switch (k) {
            case 0: return number();
            case 1: return pick(2) ? "x0" : "x1";
            case 2: return pick(2) ? "pi" : "e";
            case 3: return "-" + base(depth - 1);
            case 4: return "(" + expr(depth - 1) + ")";
            case 5: {
                static const char* f[] = {"sin", "cos", "exp", "abs", "sqrt", "tanh"};
                return std::string(f[pick(6)]) + "(" + expr(depth - 1) + ")";
            }
            case 6: return std::string(pick(2) ? "min" : "max") + "(" + expr(depth - 1) + ", " + expr(depth - 1) + ")";
            default: return number();
        }
    }
    std::string number() {
        std::uniform_real_distribution<double> d(0.0, 10.0);
        char buf[40];
        std::snprintf(buf, sizeof buf, pick(2) ? "%.3f" : "%.17g", d(rng_));
        return buf;
    }
    int pick(int n) { return static_cast<int>(rng_() % static_cast<unsigned>(n)); }

    std::mt19937 rng_;
};

}  // namespace

TEST(ExprParse, PolynomialAtHalf) { EXPECT_DOUBLE_EQ(eval("1 - x0^2", {0.5}), 0.75); }

TEST(ExprParse, CosineOfPi) { EXPECT_DOUBLE_EQ(eval("cos(pi*x0)", {1.0}), -1.0); }

TEST(ExprParse, MinPlusTwoE) {
    // 2e from an independent series sum of 1/k!.
    double e = 0.0, term = 1.0;
    for (int k = 1; k < 25; ++k) {
        e += term;
        term /= k;
    }
    EXPECT_NEAR(eval("min(x0, x1) + 2*e", {1.0, -1.0}), -1.0 + 2.0 * e, 1e-14);
    EXPECT_NEAR(eval("min(x0, x1) + 2*e", {1.0, -1.0}), 4.43656, 1e-5);
}

TEST(ExprParse, Precedence) { EXPECT_EQ(eval("2+3*4^2", {}), 50.0); }

TEST(ExprParse, PowerIsRightAssociative) { EXPECT_EQ(eval("2^3^2", {}), 512.0); }

// Unary minus negates the whole power, so exp(-x0^2) is a Gaussian.
TEST(ExprParse, UnaryMinusAppliesToPower) {
    EXPECT_EQ(eval("-2^2", {}), -4.0);
    EXPECT_EQ(eval("(-2)^2", {}), 4.0);
    EXPECT_EQ(eval("2^-1", {}), 0.5);
}

TEST(ExprParse, SyntaxErrorCarriesPosition) {
    try {
        (void)Expr::parse("1 + * 2");
        FAIL() << "expected SyntaxError";
    } catch (const levy::SyntaxError& err) {
        EXPECT_EQ(err.position(), 4u);
        EXPECT_FALSE(err.expected().empty());
    }
    EXPECT_THROW((void)Expr::parse("(1 + 2"), levy::SyntaxError);
    EXPECT_THROW((void)Expr::parse("1 2"), levy::SyntaxError);
    EXPECT_THROW((void)Expr::parse(""), levy::SyntaxError);
}

TEST(ExprParse, UnknownIdentifierAndArity) {
    EXPECT_THROW((void)Expr::parse("foo(1)"), levy::UnknownIdentifier);
    EXPECT_THROW((void)Expr::parse("y + 1"), levy::UnknownIdentifier);
    EXPECT_THROW((void)Expr::parse("sin(1, 2)"), levy::ArityError);
    EXPECT_THROW((void)Expr::parse("min(1)"), levy::ArityError);
    EXPECT_NO_THROW((void)Expr::parse("max(1, 2, 3)"));
}

TEST(ExprEvaluate, UnboundVariable) {
    const auto e = Expr::parse("x1");
    const std::vector<double> x{0.0};
    EXPECT_THROW((void)e.evaluate(std::span<const double>(x)), levy::UnboundVariable);
    EXPECT_THROW((void)levy::ScalarField::from_expression("x1", 1), levy::UnboundVariable);
}

TEST(ExprEvaluate, DomainErrors) {
    EXPECT_THROW((void)eval("sqrt(-1)", {}), levy::DomainError);
    EXPECT_THROW((void)eval("1/x0", {0.0}), levy::DomainError);
    EXPECT_THROW((void)eval("exp(1000)", {}), levy::DomainError);
}

TEST(ExprEvaluate, GaussianAtOne) { EXPECT_NEAR(eval("exp(-x0^2)", {1.0}), 0.36787944117144233, 1e-15); }

TEST(ExprProperty, PrintParseRoundTrip) {
    RandomExpr gen(20240611u);
    const std::vector<double> x{0.37, -1.25};
    int evaluated = 0;
    for (int i = 0; i < 1000; ++i) {
        const std::string text = gen.expr(3);
        const Expr t = Expr::parse(text);
        const Expr back = Expr::parse(t.print());
        ASSERT_TRUE(structurally_equal(t, back)) << text << " -> " << t.print();
        ASSERT_EQ(back.print(), t.print());
        double a = 0.0, b = 0.0;
        bool threw_a = false, threw_b = false;
        try {
            a = t.evaluate(std::span<const double>(x));
        } catch (const levy::DomainError&) {
            threw_a = true;
        }
        try {
            b = back.evaluate(std::span<const double>(x));
        } catch (const levy::DomainError&) {
            threw_b = true;
        }
        ASSERT_EQ(threw_a, threw_b) << text;
        if (!threw_a) {
            ++evaluated;
            ASSERT_EQ(std::memcmp(&a, &b, sizeof a), 0) << text;
        }
    }
    EXPECT_GT(evaluated, 500);
}

TEST(ScalarFieldTest, ConstantFolding) {
    const auto f = levy::ScalarField::from_expression("2*pi", 2);
    EXPECT_TRUE(f.is_constant());
    EXPECT_EQ(f(levy::Point{1.0, 2.0}), 2.0 * M_PI);
    const auto g = levy::ScalarField::from_expression("x0*x1", 2);
    EXPECT_FALSE(g.is_constant());
    EXPECT_EQ(g(levy::Point{3.0, -2.0}), -6.0);
    EXPECT_EQ(levy::ScalarField()(levy::Point{5.0}), 0.0);
}
