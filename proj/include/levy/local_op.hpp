#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <variant>

#include "levy/errors.hpp"
#include "levy/expr.hpp"
#include "levy/geometry.hpp"
#include "levy/numerics.hpp"

namespace levy {

/// F(x,r,p,X) = gamma r - f(x) - c tr(X).
struct LinearProper {
    double gamma = 1.0;
    ScalarField f;
    double c = 0.0;
};

struct CustomLocal {
    std::function<double(const Point& x, double r, const Point& p, const SmallMatrix& X)> F;
    double gamma = 1.0;
    std::function<double(double)> modulus;  // w with w(0+) = 0
    std::string description;
};

class LocalOperator {
public:
    LocalOperator(int dim_n, LinearProper form) : dim_n_(dim_n), form_(std::move(form)) {
        const auto& lp = std::get<LinearProper>(form_);
        if (!(lp.gamma > 0.0)) throw InvalidProblem("LinearProper needs gamma > 0");
        if (lp.c < 0.0) throw InvalidProblem("LinearProper needs c >= 0");
    }
    LocalOperator(int dim_n, CustomLocal form) : dim_n_(dim_n), form_(std::move(form)) {
        if (!std::get<CustomLocal>(form_).F) throw InvalidProblem("custom F handle is empty");
    }

    [[nodiscard]] int dim_n() const { return dim_n_; }
    [[nodiscard]] double gamma() const {
        return std::visit([](const auto& v) { return v.gamma; }, form_);
    }
    [[nodiscard]] const LinearProper* linear() const { return std::get_if<LinearProper>(&form_); }
    [[nodiscard]] const CustomLocal* custom() const { return std::get_if<CustomLocal>(&form_); }

    /// Evaluation without the symmetry check, for the solver's hot loop.
    [[nodiscard]] double eval_unchecked(const Point& x, double r, const Point& p, const SmallMatrix& X) const {
        if (const auto* lp = linear()) {
            const double t = lp->c == 0.0 ? 0.0 : lp->c * X.trace();
            return lp->gamma * r - lp->f(x) - t;
        }
        return custom()->F(x, r, p, X);
    }

    [[nodiscard]] double eval(const Point& x, double r, const Point& p, const SmallMatrix& X) const {
        if (x.dim != dim_n_ || p.dim != dim_n_ || X.rows != dim_n_ || X.cols != dim_n_) {
            throw DimensionMismatch("eval_local arguments must live in R^" + std::to_string(dim_n_));
        }
        double scale = 0.0;
        for (int i = 0; i < X.rows; ++i)
            for (int j = 0; j < X.cols; ++j) scale = std::max(scale, std::abs(X(i, j)));
        if (!X.is_symmetric(1e-14 * std::max(scale, 1.0))) throw AsymmetricHessian("X must be symmetric");
        return eval_unchecked(x, r, p, X);
    }

private:
    int dim_n_;
    std::variant<LinearProper, CustomLocal> form_;
};

inline double eval_local(const LocalOperator& op, const Point& x, double r, const Point& p, const SmallMatrix& X) {
    return op.eval(x, r, p, X);
}

// ---------------------------------------------------------------------------
// Scalar maps G

struct IdentityMap {};
/// G(s) = s + kappa s^3.
struct CubicMonotone {
    double kappa = 0.0;
};
struct CustomMap {
    std::function<double(double)> G;
    std::string description;
};

class NonlocalScalarMap {
public:
    NonlocalScalarMap() = default;
    NonlocalScalarMap(IdentityMap m) : form_(m) {}
    NonlocalScalarMap(CubicMonotone m) : form_(m) {
        if (m.kappa < 0.0) throw InvalidProblem("CubicMonotone needs kappa >= 0");
    }
    NonlocalScalarMap(CustomMap m) : form_(std::move(m)) {
        if (!std::get<CustomMap>(form_).G) throw InvalidProblem("custom G handle is empty");
    }

    double operator()(double s) const {
        switch (form_.index()) {
            case 0: return s;
            case 1: return s + std::get<CubicMonotone>(form_).kappa * s * s * s;
            default: return std::get<CustomMap>(form_).G(s);
        }
    }

    [[nodiscard]] bool is_identity() const { return form_.index() == 0; }
    [[nodiscard]] const std::variant<IdentityMap, CubicMonotone, CustomMap>& form() const { return form_; }

    [[nodiscard]] std::string name() const {
        switch (form_.index()) {
            case 0: return "identity";
            case 1: return "cubic";
            default: return "custom";
        }
    }

    /// Exact sup |G'| on [a, b] for built-in maps.
    [[nodiscard]] std::optional<double> exact_lipschitz(double a, double b) const {
        switch (form_.index()) {
            case 0: return 1.0;
            case 1: {
                const double s = std::max(std::abs(a), std::abs(b));
                return 1.0 + 3.0 * std::get<CubicMonotone>(form_).kappa * s * s;
            }
            default: return std::nullopt;
        }
    }

private:
    std::variant<IdentityMap, CubicMonotone, CustomMap> form_;
};

struct LipschitzEstimate {
    double value = 0.0;
    std::string warning;
};

/// sup |G'| on [a, b] from divided differences on a uniform grid, times 1.1.
inline LipschitzEstimate lipschitz_estimate(const NonlocalScalarMap& G, double a, double b, int points = 10001) {
    if (b < a) std::swap(a, b);
    if (a == b) return {0.0, "degenerate interval"};
    double worst = 0.0;
    double prev = G(a);
    const double h = (b - a) / (points - 1);
    for (int i = 1; i < points; ++i) {
        const double s = i + 1 == points ? b : a + i * h;
        const double cur = G(s);
        worst = std::max(worst, std::abs(cur - prev) / h);
        prev = cur;
    }
    return {1.1 * worst, ""};
}

// ---------------------------------------------------------------------------
// Sampled validators

struct CheckReport {
    std::string condition;
    bool pass = true;
    double worst = 0.0;  // minimal slack (negative means violated)
    Point witness;
    long samples = 0;
    long violations = 0;
    std::string note;
};

struct OperatorSampling {
    double x_radius = 2.0;
    double r_radius = 10.0;
    double p_radius = 10.0;
    double X_radius = 10.0;
    std::uint64_t seed = 12345;
};

namespace detail {

inline Point random_point(numerics::StreamRng& rng, int dim, double radius) {
    Point q(dim);
    for (int i = 0; i < dim; ++i) q[i] = radius * (2.0 * rng.uniform() - 1.0);
    return q;
}

inline SmallMatrix random_symmetric(numerics::StreamRng& rng, int n, double radius) {
    SmallMatrix X(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) X(i, j) = X(j, i) = radius * (2.0 * rng.uniform() - 1.0);
    return X;
}

inline SmallMatrix random_psd(numerics::StreamRng& rng, int n, double radius) {
    SmallMatrix B = random_symmetric(rng, n, radius), D(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k) D(i, j) += B(i, k) * B(j, k);
    return D;
}

inline void record(CheckReport& rep, double slack, const Point& x, double tol) {
    ++rep.samples;
    if (slack < -tol) ++rep.violations;
    if (rep.samples == 1 || slack < rep.worst) {
        rep.worst = slack;
        rep.witness = x;
    }
}

}  // namespace detail

/// gamma_decl (r - s) <= F(x,r,p,X) - F(x,s,p,X) for r >= s. Worst slack is
/// min over samples of (F(r) - F(s)) / (r - s) - gamma_decl.
inline CheckReport check_proper(const LocalOperator& op, double declared_gamma, long budget = 1000,
                                const OperatorSampling& s = {}) {
    CheckReport rep;
    rep.condition = "proper";
    numerics::StreamRng rng(s.seed, 1);
    const int n = op.dim_n();
    for (long i = 0; i < budget; ++i) {
        const Point x = detail::random_point(rng, n, s.x_radius);
        const Point p = detail::random_point(rng, n, s.p_radius);
        const SmallMatrix X = detail::random_symmetric(rng, n, s.X_radius);
        double r = s.r_radius * (2.0 * rng.uniform() - 1.0), q = s.r_radius * (2.0 * rng.uniform() - 1.0);
        if (r < q) std::swap(r, q);
        if (r == q) continue;
        const double slope = (op.eval(x, r, p, X) - op.eval(x, q, p, X)) / (r - q);
        detail::record(rep, slope - declared_gamma, x, 1e-9 * std::max(1.0, declared_gamma));
    }
    rep.pass = rep.violations == 0;
    return rep;
}

inline CheckReport check_proper(const LocalOperator& op, long budget = 1000, const OperatorSampling& s = {}) {
    return check_proper(op, op.gamma(), budget, s);
}

/// Degenerate ellipticity F(X + D) <= F(X) for PSD D, and monotonicity in r.
inline CheckReport check_ellipticity(const LocalOperator& op, long budget = 1000, const OperatorSampling& s = {}) {
    CheckReport rep;
    rep.condition = "F";
    numerics::StreamRng rng(s.seed, 2);
    const int n = op.dim_n();
    for (long i = 0; i < budget; ++i) {
        const Point x = detail::random_point(rng, n, s.x_radius);
        const Point p = detail::random_point(rng, n, s.p_radius);
        const SmallMatrix X = detail::random_symmetric(rng, n, s.X_radius);
        const SmallMatrix D = i % 10 == 0 ? SmallMatrix(n, n) : detail::random_psd(rng, n, 1.0);
        double r = s.r_radius * (2.0 * rng.uniform() - 1.0), q = s.r_radius * (2.0 * rng.uniform() - 1.0);
        if (r > q) std::swap(r, q);
        const double base = op.eval(x, r, p, X);
        const double tol = 1e-12 * std::max(1.0, std::abs(base));
        detail::record(rep, base - op.eval(x, r, p, X + D), x, tol);
        detail::record(rep, op.eval(x, q, p, X) - base, x, tol);
    }
    rep.pass = rep.violations == 0;
    return rep;
}

/// F(y,r,a(x-y),O) - F(x,r,a(x-y),O) <= w(a|x-y|^2 + |x-y|) on the X = Y = O
/// slice. Half the pairs are clustered near the origin at small separation.
inline CheckReport check_structure(const LocalOperator& op, const std::function<double(double)>& w,
                                   long budget = 2000, const OperatorSampling& s = {}) {
    CheckReport rep;
    rep.condition = "structure";
    rep.note = "only the admissible pair X = Y = O is sampled";
    numerics::StreamRng rng(s.seed, 3);
    const int n = op.dim_n();
    const SmallMatrix O(n, n);
    for (long i = 0; i < budget; ++i) {
        Point x = detail::random_point(rng, n, s.x_radius);
        if (i % 2 == 1) x *= std::pow(10.0, -8.0 * rng.uniform()) / s.x_radius;
        Point dir = detail::random_point(rng, n, 1.0);
        if (dir.norm() == 0.0) continue;
        dir *= 1.0 / dir.norm();
        const double d = i % 2 == 1 ? 2.0 * x.norm() * rng.uniform() + 1e-300 : std::pow(10.0, -8.0 * rng.uniform());
        const Point y = x - d * dir;
        const double a = std::pow(10.0, 4.0 * rng.uniform() - 2.0);
        const Point pa = a * (x - y);
        const double r = s.r_radius * (2.0 * rng.uniform() - 1.0);
        const double dist = (x - y).norm();
        const double lhs = op.eval(y, r, pa, O) - op.eval(x, r, pa, O);
        const double rhs = w(a * dist * dist + dist);
        detail::record(rep, rhs - lhs, x, 1e-12 * std::max(1.0, std::abs(lhs)));
    }
    rep.pass = rep.violations == 0;
    return rep;
}

/// s < t implies G(s) < G(t) + tol on sampled pairs from [-L, L].
inline CheckReport check_monotone_map(const NonlocalScalarMap& G, long budget = 1000, double L = 10.0,
                                      double tol = 1e-12, std::uint64_t seed = 12345) {
    CheckReport rep;
    rep.condition = "G";
    numerics::StreamRng rng(seed, 4);
    for (long i = 0; i < budget; ++i) {
        double a = L * (2.0 * rng.uniform() - 1.0), b = L * (2.0 * rng.uniform() - 1.0);
        if (i % 2 == 1) b = a + 1e-6 * L * rng.uniform_open0();
        if (a > b) std::swap(a, b);
        if (a == b) continue;
        ++rep.samples;
        const double slack = G(b) + tol - G(a);
        if (!(slack > 0.0)) ++rep.violations;
        if (rep.samples == 1 || slack < rep.worst) {
            rep.worst = slack;
            rep.witness = Point{a};
        }
    }
    rep.pass = rep.violations == 0;
    return rep;
}

}  // namespace levy
