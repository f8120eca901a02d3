#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "levy/errors.hpp"
#include "levy/geometry.hpp"
#include "levy/grid.hpp"
#include "levy/kernel.hpp"
#include "levy/measure.hpp"

namespace levy {

enum class SlackSign { sub, super, neutral };

inline double sign_value(SlackSign s) { return s == SlackSign::sub ? 1.0 : (s == SlackSign::super ? -1.0 : 0.0); }

struct TruncationParams {
    double epsilon = 0.0;
    double delta = 0.0;
    SlackSign sign = SlackSign::neutral;
};

struct OperatorValue {
    double value = 0.0;
    double near_field = 0.0;
    double far_field = 0.0;
    double tail_remainder_bound = 0.0;
    double l1_estimate = 0.0;
    /// Bound on the Taylor error of the near field (smooth form only).
    double taylor_remainder_bound = 0.0;
};

/// ∫_{|z|<eps} <X A z, A z> dq / 2 for an isotropic measure, plus the
/// signed delta term ∫_{|z|<eps} delta |A z|^2 dq.
inline double near_field_linear(const SmallMatrix& A, const SmallMatrix& X, double inner_m2, int dim_m,
                                double signed_delta) {
    const double scale = inner_m2 / dim_m;
    double v = 0.5 * contract_trace(A, X) * scale;
    if (signed_delta != 0.0) v += signed_delta * A.frobenius2() * scale;
    return v;
}

/// True when column c of A has more than one nonzero entry.
inline bool mixes_axes(const SmallMatrix& A, int c) {
    int nonzero = 0;
    for (int i = 0; i < A.rows; ++i) nonzero += A(i, c) != 0.0 ? 1 : 0;
    return nonzero > 1;
}

/// Step of the directional second difference: the smallest grid spacing.
inline double directional_step(const Grid& G) {
    double inv = 0.0;
    for (int i = 0; i < G.dim_n(); ++i) inv = std::max(inv, G.inv_h(i));
    return 1.0 / inv;
}

/// Near field on grid data. Columns of A along a grid axis contract with X.
/// Any other column a uses |a|^2 (u(x + t a/|a|) - 2 u(x) + u(x - t a/|a|)) / t^2
/// read through `sample`, since the central mixed stencil has negative
/// corner weights.
template <class Sample>
inline double near_field_grid(const SmallMatrix& A, const SmallMatrix& X, double inner_m2, int dim_m,
                              double signed_delta, const Point& x, double u0, double t, Sample&& sample) {
    bool mixed = false;
    for (int c = 0; c < A.cols; ++c) mixed = mixed || mixes_axes(A, c);
    if (!mixed) return near_field_linear(A, X, inner_m2, dim_m, signed_delta);
    const double scale = inner_m2 / dim_m;
    double s = 0.0;
    for (int c = 0; c < A.cols; ++c) {
        Point a(A.rows);
        for (int i = 0; i < A.rows; ++i) a[i] = A(i, c);
        if (!mixes_axes(A, c)) {
            for (int i = 0; i < A.rows; ++i) s += a[i] * a[i] * X(i, i);
            continue;
        }
        const Point d = (t / a.norm()) * a;
        s += a.norm2() * (sample(x + d) - 2.0 * u0 + sample(x - d)) / (t * t);
    }
    double v = 0.5 * s * scale;
    if (signed_delta != 0.0) v += signed_delta * A.frobenius2() * scale;
    return v;
}

namespace detail {

inline void check_split_inputs(const Grid& G, const JumpKernel& k, const LevyMeasure& m, const AnnularQuadrature& q,
                               const TruncationParams& t) {
    if (q.epsilon != t.epsilon) {
        throw QuadratureMismatch("quadrature epsilon " + format_double(q.epsilon) + " differs from truncation epsilon " +
                                 format_double(t.epsilon));
    }
    if (q.dim_m != m.dim_m() || k.dim_m() != m.dim_m()) throw DimensionMismatch("kernel, measure and quadrature disagree on M");
    if (k.dim_n() != G.dim_n()) throw DimensionMismatch("kernel and grid disagree on N");
    if (!(t.delta >= 0.0)) throw InvalidProblem("delta must be >= 0");
}

/// Far-field sum over the annular nodes; `sample` reads u at a landing point.
template <class Sample>
inline void far_field_sum(const AnnularQuadrature& q, const JumpKernel& k, const SmallMatrix& A, bool linear,
                          const Point& x, const Point& p, double u0, Sample&& sample, double& far, double& l1) {
    far = 0.0;
    l1 = 0.0;
    for (const Shell& sh : q.shells) {
        const bool compensate = sh.r_out <= 1.0;
        double shell_sum = 0.0, shell_abs = 0.0;
        for (std::size_t j = sh.first; j < sh.first + sh.count; ++j) {
            const QuadNode& nd = q.nodes[j];
            const Point beta = linear ? A.apply(nd.z) : k.evaluate(x, p, nd.z);
            double h = sample(x + beta) - u0;
            if (compensate) h -= dot(p, beta);
            shell_sum += nd.weight * h;
            shell_abs += nd.weight * std::abs(h);
        }
        far += shell_sum;
        l1 += shell_abs;
    }
}

}  // namespace detail

/// Split form on grid data: exact-moment near field from the discrete
/// jet, quadrature far field reading the extended field.
inline OperatorValue levy_split(const GridField& field, std::size_t index, const Differentials& diffs,
                                const JumpKernel& kernel, const LevyMeasure& measure, const AnnularQuadrature& quad,
                                const TruncationParams& trunc) {
    const Grid& G = field.grid();
    detail::check_split_inputs(G, kernel, measure, quad, trunc);
    const Point& x = G.coord(index);
    const Point& p = diffs.p;
    const double u0 = field[index];
    const SmallMatrix A = kernel.linear_map(x, p);

    OperatorValue out;
    const auto sample = [&](const Point& y) { return field.sample_extended(y); };
    out.near_field = near_field_grid(A, diffs.X, quad.exact_second_moment_inner, quad.dim_m,
                                     sign_value(trunc.sign) * trunc.delta, x, u0, directional_step(G), sample);
    detail::far_field_sum(quad, kernel, A, kernel.is_linear(), x, p, u0, sample, out.far_field, out.l1_estimate);
    out.value = out.near_field + out.far_field;
    out.l1_estimate += std::abs(out.near_field);
    out.tail_remainder_bound = 2.0 * field.sup_norm() * quad.tail_mass_outer;
    if (!std::isfinite(out.value)) {
        throw NonFiniteSample("operator value at node " + std::to_string(index) + " is not finite");
    }
    return out;
}

/// Function handle for the full form. Missing derivatives fall back to
/// central differences.
struct SmoothFunction {
    std::function<double(const Point&)> value;
    std::function<Point(const Point&)> gradient;
    std::function<SmallMatrix(const Point&)> hessian;
    /// sup |u|; NaN means "use the largest sampled value".
    double sup_norm = std::numeric_limits<double>::quiet_NaN();

    static SmoothFunction from_field(const ScalarField& f) {
        SmoothFunction s;
        s.value = [f](const Point& x) { return f(x); };
        return s;
    }

    [[nodiscard]] Point grad(const Point& x) const {
        if (gradient) return gradient(x);
        constexpr double h = 1e-5;
        Point g(x.dim);
        for (int i = 0; i < x.dim; ++i) {
            Point a = x, b = x;
            a[i] += h;
            b[i] -= h;
            g[i] = (value(a) - value(b)) / (2.0 * h);
        }
        return g;
    }

    [[nodiscard]] SmallMatrix hess(const Point& x) const {
        if (hessian) return hessian(x);
        constexpr double h = 1e-4;
        const int d = x.dim;
        SmallMatrix H(d, d);
        const double c = value(x);
        for (int i = 0; i < d; ++i) {
            Point a = x, b = x;
            a[i] += h;
            b[i] -= h;
            H(i, i) = (value(a) - 2.0 * c + value(b)) / (h * h);
            for (int j = i + 1; j < d; ++j) {
                Point pp = x, pm = x, mp = x, mm = x;
                pp[i] += h, pp[j] += h;
                pm[i] += h, pm[j] -= h;
                mp[i] -= h, mp[j] += h;
                mm[i] -= h, mm[j] -= h;
                H(i, j) = H(j, i) = (value(pp) - value(pm) - value(mp) + value(mm)) / (4.0 * h * h);
            }
        }
        return H;
    }
};

/// Full form for a smooth handle: Taylor near field with the Hessian at x,
/// quadrature far field reading u directly.
inline OperatorValue levy_smooth(const SmoothFunction& u, const Point& x, const std::optional<Point>& p_override,
                                 const JumpKernel& kernel, const LevyMeasure& measure, const AnnularQuadrature& quad) {
    if (x.dim != kernel.dim_n()) throw DimensionMismatch("x does not match kernel dimension N");
    if (quad.dim_m != measure.dim_m() || kernel.dim_m() != measure.dim_m()) {
        throw DimensionMismatch("kernel, measure and quadrature disagree on M");
    }
    const Point p = p_override ? *p_override : u.grad(x);
    const SmallMatrix H = u.hess(x);
    const SmallMatrix A = kernel.linear_map(x, p);
    const double u0 = u.value(x);

    OperatorValue out;
    out.near_field = near_field_linear(A, H, quad.exact_second_moment_inner, quad.dim_m, 0.0);

    double sampled_sup = std::abs(u0);
    std::vector<double> shell_l1;
    shell_l1.reserve(quad.shells.size());
    const bool linear = kernel.is_linear();
    for (const Shell& sh : quad.shells) {
        const bool compensate = sh.r_out <= 1.0;
        double s = 0.0, a = 0.0;
        for (std::size_t j = sh.first; j < sh.first + sh.count; ++j) {
            const QuadNode& nd = quad.nodes[j];
            const Point beta = linear ? A.apply(nd.z) : kernel.evaluate(x, p, nd.z);
            const double v = u.value(x + beta);
            sampled_sup = std::max(sampled_sup, std::abs(v));
            double h = v - u0;
            if (compensate) h -= dot(p, beta);
            s += nd.weight * h;
            a += nd.weight * std::abs(h);
        }
        out.far_field += s;
        shell_l1.push_back(a);
        out.l1_estimate += a;
    }
    if (!std::isfinite(out.far_field) || !std::isfinite(out.near_field)) throw NonFiniteSample("non-finite integrand");

    // Outer shells must stop contributing once the tail is reached.
    const std::size_t n = shell_l1.size();
    if (n >= 3 && out.l1_estimate > 0.0) {
        const double last = shell_l1[n - 1];
        if (last > 1e-3 * out.l1_estimate && shell_l1[n - 2] <= last && shell_l1[n - 3] <= shell_l1[n - 2]) {
            throw NonIntegrable("outer shell contributions grow; |h| is not dq-integrable");
        }
    }

    out.value = out.near_field + out.far_field;
    out.l1_estimate += std::abs(out.near_field);
    const double sup = std::isnan(u.sup_norm) ? sampled_sup : u.sup_norm;
    out.tail_remainder_bound = 2.0 * sup * quad.tail_mass_outer;

    // |z|^3 <= eps |z|^2 on the inner ball; third derivatives by differencing H.
    if (quad.epsilon > 0.0) {
        const double a_norm = std::sqrt(A.frobenius2());
        const double r = std::max(a_norm * quad.epsilon, 1e-6);
        double d3 = 0.0;
        for (int i = 0; i < x.dim; ++i) {
            Point xp = x, xm = x;
            xp[i] += r;
            xm[i] -= r;
            const SmallMatrix Hp = u.hess(xp), Hm = u.hess(xm);
            for (int a = 0; a < x.dim; ++a)
                for (int b = 0; b < x.dim; ++b) d3 = std::max(d3, std::abs(Hp(a, b) - Hm(a, b)) / (2.0 * r));
        }
        const double c3 = d3 * x.dim * x.dim * x.dim;
        out.taylor_remainder_bound = c3 / 6.0 * a_norm * a_norm * a_norm * quad.epsilon * quad.exact_second_moment_inner;
    }
    return out;
}

// ---------------------------------------------------------------------------
// epsilon refinement

struct RefinementRow {
    double epsilon = 0.0;
    double value = 0.0;
    double near = 0.0;
    double far = 0.0;
    double delta_prev = std::numeric_limits<double>::quiet_NaN();
};

struct RefinementTable {
    std::vector<RefinementRow> rows;
    /// log(D_k / D_{k+1}) / log(eps_k / eps_{k+1}) for successive differences D.
    std::vector<double> orders;

    [[nodiscard]] double mean_order() const {
        double s = 0.0;
        int n = 0;
        for (double o : orders)
            if (std::isfinite(o)) s += o, ++n;
        return n ? s / n : std::numeric_limits<double>::quiet_NaN();
    }
};

struct RefinementOptions {
    double z_max = 1024.0;
    QuadratureOptions quadrature{};
    double delta = 0.0;
    SlackSign sign = SlackSign::neutral;
};

namespace detail {

inline void finish_table(RefinementTable& t) {
    for (std::size_t k = 1; k < t.rows.size(); ++k) t.rows[k].delta_prev = std::abs(t.rows[k].value - t.rows[k - 1].value);
    for (std::size_t k = 2; k < t.rows.size(); ++k) {
        const double d0 = t.rows[k - 1].delta_prev, d1 = t.rows[k].delta_prev;
        const double ratio = t.rows[k - 2].epsilon / t.rows[k - 1].epsilon;
        t.orders.push_back(d0 > 0.0 && d1 > 0.0 ? std::log(d0 / d1) / std::log(ratio)
                                                : std::numeric_limits<double>::quiet_NaN());
    }
}

}  // namespace detail

/// Smooth-handle study; the delta slack (if any) is added to the near field.
inline RefinementTable epsilon_refinement_study(const SmoothFunction& u, const Point& x, const JumpKernel& kernel,
                                                const LevyMeasure& measure, const std::vector<double>& eps_sequence,
                                                const RefinementOptions& opt = {}) {
    RefinementTable t;
    const Point p = u.grad(x);
    const double slack_trace = kernel.linear_map(x, p).frobenius2() / measure.dim_m();
    for (double eps : eps_sequence) {
        const auto q = build_quadrature(measure, eps, opt.z_max, opt.quadrature);
        const auto v = levy_smooth(u, x, p, kernel, measure, q);
        RefinementRow r;
        r.epsilon = eps;
        r.near = v.near_field + sign_value(opt.sign) * opt.delta * slack_trace * q.exact_second_moment_inner;
        r.far = v.far_field;
        r.value = r.near + r.far;
        t.rows.push_back(r);
    }
    detail::finish_table(t);
    return t;
}

/// Grid-data study at one node using the split form.
inline RefinementTable epsilon_refinement_study(const GridField& field, std::size_t index, const JumpKernel& kernel,
                                                const LevyMeasure& measure, const std::vector<double>& eps_sequence,
                                                const RefinementOptions& opt = {}) {
    RefinementTable t;
    const auto diffs = gradient_hessian(field, index);
    for (double eps : eps_sequence) {
        const auto q = build_quadrature(measure, eps, opt.z_max, opt.quadrature);
        const auto v = levy_split(field, index, diffs, kernel, measure, q, {eps, opt.delta, opt.sign});
        t.rows.push_back({eps, v.value, v.near_field, v.far_field, std::numeric_limits<double>::quiet_NaN()});
    }
    detail::finish_table(t);
    return t;
}

inline void write_refinement_csv(std::ostream& os, const RefinementTable& t) {
    os << "epsilon,value,near,far,delta_prev\n";
    for (const auto& r : t.rows) {
        os << format_double(r.epsilon) << ',' << format_double(r.value) << ',' << format_double(r.near) << ','
           << format_double(r.far) << ',' << (std::isnan(r.delta_prev) ? std::string() : format_double(r.delta_prev))
           << '\n';
    }
}

}  // namespace levy
