#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <variant>

#include "levy/errors.hpp"
#include "levy/geometry.hpp"
#include "levy/numerics.hpp"

namespace levy {

namespace kernels {

/// beta = z, M = N.
struct Identity {};
/// beta = (|x|/2) z, M = N.
struct RadialScale {};
/// beta = (x2, -x1) z, M = 1, N = 2.
struct Rotational {};
/// beta = p z / (|p| + eps0), M = 1.
struct GradientDirection {
    double eps0 = 0.1;
};
/// beta = e_i z, M = 1.
struct Axis {
    int axis = 0;
};
/// User-supplied map. `linear` declares beta(x,p,z) = A(x,p) z, which lets
/// the near field use the Jacobian at z = 0 without error.
struct Custom {
    std::function<Point(const Point& x, const Point& p, const Point& z)> beta;
    bool gradient_dependent = true;
    bool linear = false;
    std::string description;
};

}  // namespace kernels

using KernelVariant = std::variant<kernels::Identity, kernels::RadialScale, kernels::Rotational,
                                   kernels::GradientDirection, kernels::Axis, kernels::Custom>;

/// Declared constants of the growth, Lipschitz and nondegeneracy conditions.
struct KernelConstants {
    double B0 = 1.0;
    double B1 = 1.0;
    double B2 = 1.0;
    double B3 = 1.0;
    double R = 1.0;
};

class JumpKernel {
public:
    JumpKernel(int dim_n, int dim_m, KernelVariant variant, KernelConstants constants = {},
               std::function<double(const Point&)> b1 = {})
        : dim_n_(dim_n), dim_m_(dim_m), variant_(std::move(variant)), k_(constants), b1_(std::move(b1)) {
        if (dim_n_ < 1 || dim_n_ > kMaxDim || dim_m_ < 1 || dim_m_ > dim_n_) {
            throw DimensionMismatch("kernel needs 1 <= M <= N <= 2, got N=" + std::to_string(dim_n_) +
                                    " M=" + std::to_string(dim_m_));
        }
        const auto need = [&](bool ok, const char* what) {
            if (!ok) throw DimensionMismatch(std::string(name()) + ": " + what);
        };
        std::visit(
            [&](const auto& v) {
                using T = std::decay_t<decltype(v)>;
                if constexpr (std::is_same_v<T, kernels::Identity> || std::is_same_v<T, kernels::RadialScale>) {
                    need(dim_m_ == dim_n_, "requires M = N");
                } else if constexpr (std::is_same_v<T, kernels::Rotational>) {
                    need(dim_n_ == 2 && dim_m_ == 1, "requires N = 2, M = 1");
                } else if constexpr (std::is_same_v<T, kernels::GradientDirection>) {
                    need(dim_m_ == 1, "requires M = 1");
                    if (!(v.eps0 > 0.0)) throw InvalidProblem("GradientDirection needs eps0 > 0");
                } else if constexpr (std::is_same_v<T, kernels::Axis>) {
                    need(dim_m_ == 1 && v.axis >= 0 && v.axis < dim_n_, "requires M = 1 and 0 <= axis < N");
                } else {
                    if (!v.beta) throw InvalidProblem("custom kernel handle is empty");
                }
            },
            variant_);
        if (k_.R < 1.0 || k_.B0 < 0.0 || k_.B1 < 0.0 || k_.B2 < 0.0 || k_.B3 < 0.0) {
            throw InvalidProblem("kernel constants need B_i >= 0 and R >= 1");
        }
    }

    [[nodiscard]] int dim_n() const { return dim_n_; }
    [[nodiscard]] int dim_m() const { return dim_m_; }
    [[nodiscard]] const KernelVariant& variant() const { return variant_; }
    [[nodiscard]] const KernelConstants& constants() const { return k_; }

    [[nodiscard]] const char* name() const {
        static constexpr const char* names[] = {"Identity", "RadialScale", "Rotational",
                                                "GradientDirection", "Axis", "Custom"};
        return names[variant_.index()];
    }

    [[nodiscard]] bool gradient_dependent() const {
        if (const auto* c = std::get_if<kernels::Custom>(&variant_)) return c->gradient_dependent;
        return std::holds_alternative<kernels::GradientDirection>(variant_);
    }

    /// True when beta(x,p,z) = A(x,p) z exactly.
    [[nodiscard]] bool is_linear() const {
        if (const auto* c = std::get_if<kernels::Custom>(&variant_)) return c->linear;
        return true;
    }

    /// A(x,p) with beta = A z for built-ins; the z-Jacobian at 0 for custom maps.
    [[nodiscard]] SmallMatrix linear_map(const Point& x, const Point& p) const {
        SmallMatrix A(dim_n_, dim_m_);
        switch (variant_.index()) {
            case 0: A = SmallMatrix::identity(dim_n_); break;
            case 1: A = (0.5 * x.norm()) * SmallMatrix::identity(dim_n_); break;
            case 2:
                A(0, 0) = x[1];
                A(1, 0) = -x[0];
                break;
            case 3: {
                const double s = 1.0 / (p.norm() + std::get<kernels::GradientDirection>(variant_).eps0);
                for (int i = 0; i < dim_n_; ++i) A(i, 0) = p[i] * s;
                break;
            }
            case 4: A(std::get<kernels::Axis>(variant_).axis, 0) = 1.0; break;
            default: {
                const auto& beta = std::get<kernels::Custom>(variant_).beta;
                constexpr double h = 1e-6;
                for (int j = 0; j < dim_m_; ++j) {
                    Point zp(dim_m_), zm(dim_m_);
                    zp[j] = h;
                    zm[j] = -h;
                    const Point d = beta(x, p, zp) - beta(x, p, zm);
                    for (int i = 0; i < dim_n_; ++i) A(i, j) = d[i] / (2.0 * h);
                }
            }
        }
        return A;
    }

    [[nodiscard]] Point evaluate(const Point& x, const Point& p, const Point& z) const {
        if (x.dim != dim_n_ || p.dim != dim_n_ || z.dim != dim_m_) {
            throw DimensionMismatch(std::string(name()) + " evaluate: expected x,p in R^" + std::to_string(dim_n_) +
                                    " and z in R^" + std::to_string(dim_m_));
        }
        if (const auto* c = std::get_if<kernels::Custom>(&variant_)) {
            Point out = c->beta(x, p, z);
            if (out.dim != dim_n_) throw DimensionMismatch("custom kernel returned wrong dimension");
            return out;
        }
        return linear_map(x, p).apply(z);
    }

    /// Growth envelope b1(x) with |beta(x,p,z)| <= b1(x)|z|.
    [[nodiscard]] double b1(const Point& x) const {
        if (b1_) return b1_(x);
        switch (variant_.index()) {
            case 1: return 0.5 * x.norm();
            case 2: return x.norm();
            case 5: return x.norm() < 1.0 ? k_.B0 : std::max(k_.B0, k_.B1 * x.norm());
            default: return 1.0;
        }
    }

private:
    int dim_n_;
    int dim_m_;
    KernelVariant variant_;
    KernelConstants k_;
    std::function<double(const Point&)> b1_;
};

// ---------------------------------------------------------------------------
// Sampling validators

struct ConditionReport {
    std::string condition;
    bool pass = true;
    double worst_ratio = 0.0;
    Point witness_x;
    Point witness_p;
    Point witness_z;
    long samples = 0;
    long violations = 0;
};

struct SampleBox {
    double p_radius = 10.0;
    double z_max = 10.0;
};

namespace detail {

inline constexpr double kRelSlack = 1e-12;

/// Quasi-random point with |x| in [r0, r1] (uniform in radius and angle).
inline Point radial_point(int dim, double r0, double r1, double u_r, double u_a) {
    const double r = r0 + (r1 - r0) * u_r;
    if (dim == 1) return Point{u_a < 0.5 ? -r : r};
    const double th = 2.0 * M_PI * u_a;
    return Point{r * std::cos(th), r * std::sin(th)};
}

inline Point box_point(int dim, double radius, const double* u) {
    Point q(dim);
    for (int i = 0; i < dim; ++i) q[i] = radius * (2.0 * u[i] - 1.0);
    return q;
}

/// Splits the budget between |x| < 1 and R <= |x| <= 10R, plus the
/// unconstrained middle annulus when R > 1.
template <class Fn>
void sample_states(const JumpKernel& k, long budget, int extra_dims, Fn&& fn) {
    const double R = k.constants().R;
    double u[16];
    for (long i = 0; i < budget; ++i) {
        numerics::halton(static_cast<std::uint64_t>(i + 1), std::span<double>(u, 2 + extra_dims));
        const int region = static_cast<int>(i % 2);
        const Point x = region == 0 ? radial_point(k.dim_n(), 0.0, 1.0, u[0], u[1])
                                    : radial_point(k.dim_n(), R, 10.0 * R, u[0], u[1]);
        fn(x, region, u + 2);
    }
}

}  // namespace detail

/// |beta(x,p,z)| <= b1(x)|z| with b1 <= B0 on |x| < 1 and b1 <= B1|x| on |x| >= R.
/// The ratio tested is |beta| / (bound(x)|z|) where bound is the declared
/// branch constant, so both the kernel and its declared constants are checked.
inline ConditionReport verify_growth(const JumpKernel& k, long budget = 10000, const SampleBox& box = {}) {
    ConditionReport rep;
    rep.condition = "beta";
    const auto& c = k.constants();
    detail::sample_states(k, budget, k.dim_n() + k.dim_m(), [&](const Point& x, int region, const double* u) {
        const Point p = detail::box_point(k.dim_n(), box.p_radius, u);
        const Point z = detail::box_point(k.dim_m(), box.z_max, u + k.dim_n());
        const double zn = z.norm();
        if (zn == 0.0) return;
        ++rep.samples;
        const double bound = region == 0 ? c.B0 : c.B1 * x.norm();
        const double b1 = k.b1(x);
        const double beta = k.evaluate(x, p, z).norm();
        const double ratio = bound > 0.0 ? beta / (bound * zn) : (beta > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
        const double tol = 1.0 + detail::kRelSlack;
        if (ratio > tol || beta > b1 * zn * tol || b1 > bound * tol) ++rep.violations;
        if (ratio > rep.worst_ratio || rep.samples == 1) {
            rep.worst_ratio = ratio;
            rep.witness_x = x;
            rep.witness_p = p;
            rep.witness_z = z;
        }
    });
    rep.pass = rep.violations == 0;
    return rep;
}

/// |beta(x,p,z) - beta(x',p,z)| <= B2 |x - x'| |z|.
inline ConditionReport verify_lipschitz(const JumpKernel& k, long budget = 10000, const SampleBox& box = {}) {
    ConditionReport rep;
    rep.condition = "betacont";
    const double B2 = k.constants().B2;
    const double R = k.constants().R;
    detail::sample_states(k, budget, 2 + k.dim_n() + k.dim_m(), [&](const Point& x, int, const double* u) {
        // Partner point: nearby half the time so local slopes are probed.
        const double scale = (u[0] < 0.5 ? 0.01 : 1.0) * 10.0 * R;
        Point x2 = x + detail::box_point(k.dim_n(), scale, u + 1);
        const Point p = detail::box_point(k.dim_n(), box.p_radius, u + 1 + k.dim_n());
        const Point z = detail::box_point(k.dim_m(), box.z_max, u + 1 + 2 * k.dim_n());
        const double dx = (x - x2).norm(), zn = z.norm();
        if (dx == 0.0 || zn == 0.0) return;
        ++rep.samples;
        const double diff = (k.evaluate(x, p, z) - k.evaluate(x2, p, z)).norm();
        const double bound = B2 * dx * zn;
        const double ratio = bound > 0.0 ? diff / bound : (diff > 1e-14 * zn ? std::numeric_limits<double>::infinity() : 0.0);
        if (ratio > 1.0 + 1e-9) ++rep.violations;
        if (ratio > rep.worst_ratio || rep.samples == 1) {
            rep.worst_ratio = ratio;
            rep.witness_x = x;
            rep.witness_p = p;
            rep.witness_z = z;
        }
    });
    rep.pass = rep.violations == 0;
    return rep;
}

/// |x + beta(x,z)| >= B3 |x| for |x| >= R, |z| <= 1. Worst ratio is the
/// minimum of |x + beta| / (B3|x|).
inline ConditionReport verify_nondegeneracy(const JumpKernel& k, long budget = 10000) {
    if (k.gradient_dependent()) {
        throw GradientDependentKernel(std::string(k.name()) + " depends on p; the condition is stated for beta(x,z)");
    }
    ConditionReport rep;
    rep.condition = "unbounded2";
    rep.worst_ratio = std::numeric_limits<double>::infinity();
    const double B3 = k.constants().B3;
    const double R = k.constants().R;
    const Point p0 = Point::zero(k.dim_n());
    double u[8];
    for (long i = 0; i < budget; ++i) {
        numerics::halton(static_cast<std::uint64_t>(i + 1), std::span<double>(u, 2 + k.dim_m() + 1));
        // Half the samples sit on |x| = R where the ratio is typically smallest.
        const Point x = detail::radial_point(k.dim_n(), R, i % 2 == 0 ? R : 10.0 * R, u[0], u[1]);
        Point z = detail::box_point(k.dim_m(), 1.0, u + 2);
        if (z.norm() > 1.0) z *= 1.0 / z.norm();
        if (i % 4 == 1) z *= 1.0 / std::max(z.norm(), 1e-300);  // boundary |z| = 1
        ++rep.samples;
        const double lhs = (x + k.evaluate(x, p0, z)).norm();
        const double ratio = B3 > 0.0 ? lhs / (B3 * x.norm()) : std::numeric_limits<double>::infinity();
        if (ratio < 1.0 - detail::kRelSlack) ++rep.violations;
        if (ratio < rep.worst_ratio) {
            rep.worst_ratio = ratio;
            rep.witness_x = x;
            rep.witness_p = p0;
            rep.witness_z = z;
        }
    }
    rep.pass = rep.violations == 0;
    return rep;
}

/// max |<beta(x,p,z), x>| / (|beta||x|) over quasi-random samples.
inline double orthogonality_residual(const JumpKernel& k, long budget = 10000, const SampleBox& box = {}) {
    double worst = 0.0;
    double u[8];
    for (long i = 0; i < budget; ++i) {
        numerics::halton(static_cast<std::uint64_t>(i + 1), std::span<double>(u, 2 * k.dim_n() + k.dim_m()));
        const Point x = detail::box_point(k.dim_n(), 10.0 * k.constants().R, u);
        const Point p = detail::box_point(k.dim_n(), box.p_radius, u + k.dim_n());
        const Point z = detail::box_point(k.dim_m(), box.z_max, u + 2 * k.dim_n());
        const Point b = k.evaluate(x, p, z);
        const double scale = b.norm() * x.norm();
        if (scale > 0.0) worst = std::max(worst, std::abs(dot(b, x)) / scale);
    }
    return worst;
}

}  // namespace levy
