#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "levy/errors.hpp"
#include "levy/grid.hpp"
#include "levy/nonlocal.hpp"
#include "levy/solver.hpp"

namespace levy {

enum class Verdict { subsolution, supersolution, solution, neither };

inline const char* verdict_name(Verdict v) {
    switch (v) {
        case Verdict::subsolution: return "subsolution";
        case Verdict::supersolution: return "supersolution";
        case Verdict::solution: return "solution";
        default: return "neither";
    }
}

struct Classification {
    Verdict verdict = Verdict::neither;
    /// max R over Omega with the +delta slack (subsolution side).
    double worst_sub_residual = 0.0;
    /// min R over Omega with the -delta slack (supersolution side).
    double worst_super_residual = 0.0;
    /// The one-sided residual that decided the verdict (the larger violation if neither).
    double worst_interior_residual = 0.0;
    /// u <= g (sub side) and u >= g (super side) on complement nodes.
    bool exterior_below_g = true;
    bool exterior_above_g = true;
    bool exterior_ordering_ok = true;
    double delta = 0.0;

    [[nodiscard]] bool is_sub() const { return verdict == Verdict::subsolution || verdict == Verdict::solution; }
    [[nodiscard]] bool is_super() const { return verdict == Verdict::supersolution || verdict == Verdict::solution; }
};

/// One-sided residual tests of the split form with slack ±delta.
inline Classification classify(const ProblemSpec& spec, const DiscreteOperator& op, const GridField& u, double tol,
                               double delta = 0.0, int threads = 1) {
    const Grid& G = *spec.grid;
    Classification c;
    c.delta = delta;
    const auto Rs = residual(spec, op, u, {delta, SlackSign::sub, threads, false});
    const auto Rp = residual(spec, op, u, {delta, SlackSign::super, threads, false});
    c.worst_sub_residual = -std::numeric_limits<double>::infinity();
    c.worst_super_residual = std::numeric_limits<double>::infinity();
    for (std::size_t k : G.omega_nodes()) {
        c.worst_sub_residual = std::max(c.worst_sub_residual, Rs[k]);
        c.worst_super_residual = std::min(c.worst_super_residual, Rp[k]);
    }
    if (G.omega_nodes().empty()) c.worst_sub_residual = c.worst_super_residual = 0.0;
    const bool sub = c.worst_sub_residual <= tol, super = c.worst_super_residual >= -tol;
    c.verdict = sub && super ? Verdict::solution : sub ? Verdict::subsolution : super ? Verdict::supersolution : Verdict::neither;
    if (c.verdict == Verdict::subsolution) {
        c.worst_interior_residual = c.worst_sub_residual;
    } else if (c.verdict == Verdict::supersolution) {
        c.worst_interior_residual = c.worst_super_residual;
    } else {
        c.worst_interior_residual = std::max(c.worst_sub_residual, -c.worst_super_residual);
    }
    for (std::size_t k = 0; k < G.size(); ++k) {
        if (G.in_omega(k)) continue;
        const double g = spec.g()(G.coord(k));
        if (u[k] > g + tol) c.exterior_below_g = false;
        if (u[k] < g - tol) c.exterior_above_g = false;
    }
    c.exterior_ordering_ok = (!c.is_sub() || c.exterior_below_g) && (!c.is_super() || c.exterior_above_g);
    return c;
}

inline Classification classify(const ProblemSpec& spec, const GridField& u, double tol, double delta = 0.0) {
    return classify(spec, DiscreteOperator(spec), u, tol, delta);
}

struct ComparisonReport {
    bool pass = true;
    double max_violation = 0.0;  // max (u - v) over Omega nodes, clipped at 0
    Point witness;
    double witness_time = 0.0;
    long checked = 0;
};

/// u sub, v super, u <= v off Omega  =>  u <= v on Omega.
inline ComparisonReport comparison_check(const ProblemSpec& spec, const DiscreteOperator& op, const GridField& u,
                                         const GridField& v, double tol, double delta = 0.0) {
    const Grid& G = *spec.grid;
    const auto cu = classify(spec, op, u, tol, delta);
    if (!cu.is_sub()) {
        throw HypothesisNotMet("subsolution", "u has interior residual " + format_double(cu.worst_sub_residual) + " > tol");
    }
    const auto cv = classify(spec, op, v, tol, delta);
    if (!cv.is_super()) {
        throw HypothesisNotMet("supersolution",
                               "v has interior residual " + format_double(cv.worst_super_residual) + " < -tol");
    }
    for (std::size_t k = 0; k < G.size(); ++k) {
        if (!G.in_omega(k) && u[k] > v[k] + tol) {
            throw HypothesisNotMet("exterior ordering", "u > v at complement node " + std::to_string(k));
        }
    }
    ComparisonReport rep;
    rep.witness = Point(G.dim_n());
    for (std::size_t k : G.omega_nodes()) {
        ++rep.checked;
        const double d = u[k] - v[k];
        if (d > rep.max_violation) {
            rep.max_violation = d;
            rep.witness = G.coord(k);
        }
    }
    rep.pass = rep.max_violation <= tol;
    return rep;
}

inline ComparisonReport comparison_check(const ProblemSpec& spec, const GridField& u, const GridField& v, double tol,
                                         double delta = 0.0) {
    return comparison_check(spec, DiscreteOperator(spec), u, v, tol, delta);
}

struct Trajectory {
    std::vector<double> times;
    std::vector<GridField> fields;
};

/// Parabolic version: residuals (u^{n+1} - u^n)/dt + F + G(-I[u^n]) between
/// consecutive snapshots, then initial, exterior and interior ordering.
inline ComparisonReport evolution_comparison_check(const ProblemSpec& spec, const Trajectory& u, const Trajectory& v,
                                                   double tol) {
    const Grid& G = *spec.grid;
    if (u.fields.empty() || u.times != v.times || u.fields.size() != v.fields.size() ||
        u.times.size() != u.fields.size()) {
        throw InvalidProblem("trajectories must share a nonempty list of checkpoint times");
    }
    const DiscreteOperator op(spec);
    const auto worst = [&](const Trajectory& w, double sign) {
        double worst = -std::numeric_limits<double>::infinity();
        for (std::size_t n = 0; n + 1 < w.fields.size(); ++n) {
            const double dt = w.times[n + 1] - w.times[n];
            const auto R = residual(spec, op, w.fields[n], {0.0, SlackSign::neutral, 1, false});
            for (std::size_t k : G.omega_nodes()) {
                const double a = (w.fields[n + 1][k] - w.fields[n][k]) / dt;
                worst = std::max(worst, sign * (a + R[k]));
            }
        }
        return worst;
    };
    if (const double r = worst(u, 1.0); r > tol) {
        throw HypothesisNotMet("subsolution", "u has parabolic residual " + format_double(r) + " > tol");
    }
    if (const double r = worst(v, -1.0); r > tol) {
        throw HypothesisNotMet("supersolution", "v has parabolic residual " + format_double(-r) + " < -tol");
    }
    for (std::size_t k : G.omega_nodes()) {
        if (u.fields[0][k] > v.fields[0][k] + tol) {
            throw HypothesisNotMet("initial ordering", "u(0) > v(0) at node " + std::to_string(k));
        }
    }
    for (std::size_t n = 0; n < u.fields.size(); ++n)
        for (std::size_t k = 0; k < G.size(); ++k)
            if (!G.in_omega(k) && u.fields[n][k] > v.fields[n][k] + tol) {
                throw HypothesisNotMet("exterior ordering", "u > v off Omega at t = " + format_double(u.times[n]));
            }
    ComparisonReport rep;
    rep.witness = Point(G.dim_n());
    for (std::size_t n = 0; n < u.fields.size(); ++n) {
        for (std::size_t k : G.omega_nodes()) {
            ++rep.checked;
            const double d = u.fields[n][k] - v.fields[n][k];
            if (d > rep.max_violation) {
                rep.max_violation = d;
                rep.witness = G.coord(k);
                rep.witness_time = u.times[n];
            }
        }
    }
    rep.pass = rep.max_violation <= tol;
    return rep;
}

// ---------------------------------------------------------------------------
// Weight function

/// w(s) = r^mu q(s/r) on [0, r] with q(t) = a t^2 + b3 t^3 + b4 t^4 + b5 t^5,
/// and w(s) = s^mu beyond r.
struct WeightFunction {
    double r = 1.0;
    double mu = 1.0;
    double a = 0.0, b3 = 0.0, b4 = 0.0, b5 = 0.0;

    [[nodiscard]] double value(double s) const {
        if (s >= r) return std::pow(s, mu);
        const double t = s / r;
        return std::pow(r, mu) * t * t * (a + t * (b3 + t * (b4 + t * b5)));
    }
    [[nodiscard]] double d1(double s) const {
        if (s >= r) return mu * std::pow(s, mu - 1.0);
        const double t = s / r;
        return std::pow(r, mu - 1.0) * t * (2.0 * a + t * (3.0 * b3 + t * (4.0 * b4 + t * 5.0 * b5)));
    }
    [[nodiscard]] double d2(double s) const {
        if (s >= r) return mu * (mu - 1.0) * std::pow(s, mu - 2.0);
        const double t = s / r;
        return std::pow(r, mu - 2.0) * (2.0 * a + t * (6.0 * b3 + t * (12.0 * b4 + t * 20.0 * b5)));
    }
};

namespace detail {

/// Solves for b3, b4, b5 given a so that q(1) = 1, q'(1) = mu, q''(1) = mu(mu-1).
inline WeightFunction quintic(double r, double mu, double a) {
    // b3 + b4 + b5 = 1 - a; 3b3 + 4b4 + 5b5 = mu - 2a; 6b3 + 12b4 + 20b5 = mu(mu-1) - 2a.
    const double r1 = 1.0 - a, r2 = mu - 2.0 * a, r3 = mu * (mu - 1.0) - 2.0 * a;
    const double b5 = (r3 - 6.0 * r1 - 6.0 * (r2 - 3.0 * r1)) / 2.0;
    const double b4 = (r2 - 3.0 * r1) - 2.0 * b5;
    const double b3 = r1 - b4 - b5;
    return {r, mu, a, b3, b4, b5};
}

inline bool weight_ok(const WeightFunction& w) {
    constexpr int n = 4000;
    for (int i = 0; i <= n; ++i) {
        const double s = w.r * i / n;
        if (w.value(s) < 0.0 || w.d1(s) < 0.0) return false;
    }
    return true;
}

}  // namespace detail

/// C^2 weight with w = s^mu beyond r and w, w' >= 0. The inner curvature a
/// is the smallest nonnegative value that keeps the polynomial monotone.
inline WeightFunction build_weight(double r, double mu) {
    if (!(r > 0.0)) throw InvalidProblem("weight radius must be positive");
    if (!(mu > 0.0 && mu < 2.0)) throw InvalidProblem("weight exponent must lie in (0, 2)");
    auto w = detail::quintic(r, mu, 0.0);
    if (detail::weight_ok(w)) return w;
    double lo = 0.0, hi = 1.0;
    while (!detail::weight_ok(detail::quintic(r, mu, hi))) {
        lo = hi;
        hi *= 2.0;
        if (hi > 1e6) throw InvalidProblem("no monotone quintic weight found");
    }
    for (int i = 0; i < 60; ++i) {
        const double mid = 0.5 * (lo + hi);
        (detail::weight_ok(detail::quintic(r, mu, mid)) ? hi : lo) = mid;
    }
    return detail::quintic(r, mu, hi);
}

// ---------------------------------------------------------------------------
// Split form versus smooth form

struct EquivalenceCase {
    std::string name;
    SmoothFunction u;
    Point x;
};

struct EquivalenceRow {
    std::string name;
    double eps = 0.0;
    double delta = 0.0;
    double residual_A = 0.0;
    double residual_C = 0.0;
    double gap = 0.0;
};

struct EquivalenceOptions {
    std::vector<double> eps;
    std::vector<double> deltas{0.0};
    double z_max = 1024.0;
    QuadratureOptions quadrature{};
    /// Epsilon of the reference full-form evaluation; 0 means min(eps)/16.
    double eps_reference = 0.0;
};

struct EquivalenceTable {
    std::vector<EquivalenceRow> rows;

    /// Empirical order of gap(eps) for one case at fixed delta.
    [[nodiscard]] double order(const std::string& name, double delta) const {
        std::vector<std::pair<double, double>> pts;
        for (const auto& r : rows)
            if (r.name == name && r.delta == delta && r.gap > 0.0) pts.emplace_back(std::log(r.eps), std::log(r.gap));
        if (pts.size() < 2) return std::numeric_limits<double>::quiet_NaN();
        // Least-squares slope.
        double mx = 0.0, my = 0.0;
        for (const auto& [a, b] : pts) mx += a, my += b;
        mx /= pts.size(), my /= pts.size();
        double sxy = 0.0, sxx = 0.0;
        for (const auto& [a, b] : pts) sxy += (a - mx) * (b - my), sxx += (a - mx) * (a - mx);
        return sxy / sxx;
    }
};

/// Subsolution-side residual F + G(-I_{eps,delta}) against F + G(-I) for
/// each smooth case.
inline EquivalenceTable definition_equivalence_study(const std::vector<EquivalenceCase>& cases,
                                                     const LocalOperator& F, const NonlocalScalarMap& Gmap,
                                                     const JumpKernel& kernel, const LevyMeasure& measure,
                                                     const EquivalenceOptions& opt) {
    EquivalenceTable t;
    if (opt.eps.empty()) return t;
    double eps_ref = opt.eps_reference;
    if (!(eps_ref > 0.0)) {
        eps_ref = opt.eps.front();
        for (double e : opt.eps) eps_ref = std::min(eps_ref, e);
        eps_ref /= 16.0;
    }
    const auto ref_quad = build_quadrature(measure, eps_ref, opt.z_max, opt.quadrature);
    std::vector<AnnularQuadrature> quads;
    for (double e : opt.eps) quads.push_back(build_quadrature(measure, e, opt.z_max, opt.quadrature));
    for (const auto& c : cases) {
        const Point p = c.u.grad(c.x);
        const SmallMatrix X = c.u.hess(c.x);
        const double u0 = c.u.value(c.x);
        const double local = F.eval_unchecked(c.x, u0, p, X);
        const double rc = local + Gmap(-levy_smooth(c.u, c.x, p, kernel, measure, ref_quad).value);
        const double slack = kernel.linear_map(c.x, p).frobenius2() / measure.dim_m();
        for (std::size_t i = 0; i < opt.eps.size(); ++i) {
            const double I0 = levy_smooth(c.u, c.x, p, kernel, measure, quads[i]).value;
            for (double d : opt.deltas) {
                const double I = I0 + d * slack * quads[i].exact_second_moment_inner;
                const double ra = local + Gmap(-I);
                t.rows.push_back({c.name, opt.eps[i], d, ra, rc, std::abs(ra - rc)});
            }
        }
    }
    return t;
}

inline void write_equivalence_csv(std::ostream& os, const EquivalenceTable& t) {
    os << "case,eps,delta,residual_A,residual_C,gap\n";
    for (const auto& r : t.rows) {
        os << r.name << ',' << format_double(r.eps) << ',' << format_double(r.delta) << ',' << format_double(r.residual_A)
           << ',' << format_double(r.residual_C) << ',' << format_double(r.gap) << '\n';
    }
}

// ---------------------------------------------------------------------------
// Truncated-box stand-in for unbounded Omega

struct BoxGrowthRow {
    double box_half_width = 0.0;
    bool pass = false;
    double max_violation = 0.0;
    double weighted_violation = 0.0;  // max (u - v)_+ / (1 + w(|x|))
    std::string hypothesis_failure;
};

/// Solves on growing boxes, perturbs the solution upward by `bump`, and runs
/// the comparison check on each box. Stable verdicts across rows are the
/// desk-scale evidence for the unbounded comparison principle.
inline std::vector<BoxGrowthRow> unbounded_comparison_study(const std::function<ProblemSpec(double)>& build,
                                                            const std::vector<double>& half_widths, double bump,
                                                            const WeightFunction& w, const SolverConfig& cfg = {}) {
    std::vector<BoxGrowthRow> rows;
    for (double L : half_widths) {
        const ProblemSpec spec = build(L);
        const DiscreteOperator op(spec);
        const auto u = solve_stationary(spec, cfg).first;
        GridField v(u);
        for (auto& x : v.values()) x += bump;
        const ScalarField g = spec.g();
        v.set_exterior(ScalarField::from_function([g, bump](const Point& y) { return g(y) + bump; }, "g + bump"));
        BoxGrowthRow row;
        row.box_half_width = L;
        try {
            const auto rep = comparison_check(spec, op, u, v, 10.0 * cfg.tol);
            row.pass = rep.pass;
            row.max_violation = rep.max_violation;
            double wv = 0.0;
            for (std::size_t k : spec.grid->omega_nodes())
                wv = std::max(wv, std::max(u[k] - v[k], 0.0) / (1.0 + w.value(spec.grid->coord(k).norm())));
            row.weighted_violation = wv;
        } catch (const HypothesisNotMet& e) {
            row.hypothesis_failure = e.hypothesis();
        }
        rows.push_back(row);
    }
    return rows;
}

}  // namespace levy
