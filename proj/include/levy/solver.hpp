#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "levy/errors.hpp"
#include "levy/grid.hpp"
#include "levy/kernel.hpp"
#include "levy/local_op.hpp"
#include "levy/measure.hpp"
#include "levy/nonlocal.hpp"
#include "levy/parallel.hpp"

namespace levy {

/// One (G_i, beta_i, dq_i) triple with its quadrature.
struct NonlocalTerm {
    NonlocalScalarMap G;
    JumpKernel kernel;
    LevyMeasure measure;
    AnnularQuadrature quad;
};

struct ProblemSpec {
    std::shared_ptr<const Grid> grid;
    LocalOperator local;
    std::vector<NonlocalTerm> terms;
    std::optional<ScalarField> u0;
    double horizon = 0.0;

    [[nodiscard]] const Domain& domain() const { return grid->domain(); }
    [[nodiscard]] const ScalarField& g() const { return grid->domain().g(); }

    /// Dimension checks plus the growth and integrability gates.
    void validate(bool check_conditions = true) const {
        if (!grid) throw InvalidProblem("problem has no grid");
        if (terms.empty()) throw InvalidProblem("problem needs at least one nonlocal term");
        const int n = grid->dim_n();
        if (local.dim_n() != n) throw DimensionMismatch("local operator dimension differs from the domain");
        for (std::size_t i = 0; i < terms.size(); ++i) {
            const auto& t = terms[i];
            const std::string tag = "term " + std::to_string(i) + ": ";
            if (t.kernel.dim_n() != n) throw DimensionMismatch(tag + "kernel N differs from the domain");
            if (t.kernel.dim_m() != t.measure.dim_m() || t.quad.dim_m != t.measure.dim_m()) {
                throw DimensionMismatch(tag + "kernel, measure and quadrature disagree on M");
            }
            if (check_conditions) {
                if (!verify_growth(t.kernel).pass) throw InvalidProblem(tag + "kernel fails the growth condition");
                if (!check_integrability(t.measure).integrable) throw InvalidProblem(tag + "measure is not integrable");
            }
        }
        if (u0 && horizon < 0.0) throw InvalidProblem("horizon must be positive");
    }
};

struct PerronBounds {
    double m = 0.0;
    double M = 0.0;
};

struct SolverReport {
    double residual_sup = 0.0;
    long iterations = 0;
    double dt = 0.0;
    double wall_ms = 0.0;
    PerronBounds bounds;
    long violations = 0;
    bool converged = false;
    std::size_t truncated_nodes = 0;
};

class MaxIterExceeded : public Error {
public:
    MaxIterExceeded(GridField best, SolverReport report)
        : Error(ErrorCategory::numeric, "MaxIterExceeded: residual " + format_double(report.residual_sup) + " after " +
                                            std::to_string(report.iterations) + " iterations"),
          best_(std::move(best)),
          report_(report) {}

    [[nodiscard]] const GridField& best() const { return best_; }
    [[nodiscard]] const SolverReport& report() const { return report_; }

private:
    GridField best_;
    SolverReport report_;
};

// ---------------------------------------------------------------------------
// Discrete operator

/// The split-form operator on every Omega node, one term at a time. For
/// kernels that ignore the gradient the whole operator is linear in the
/// nodal values, so it is assembled once as a sparse row per node:
/// I_k[u] = sum_c a_c u_c + E_k, with E_k the far-field landings outside the box.
class DiscreteOperator {
public:
    explicit DiscreteOperator(const ProblemSpec& spec) : grid_(spec.grid), terms_(&spec.terms) {
        const Grid& G = *grid_;
        const auto& nodes = G.omega_nodes();
        rows_.resize(spec.terms.size());
        for (std::size_t t = 0; t < spec.terms.size(); ++t) {
            const auto& term = spec.terms[t];
            auto& rows = rows_[t];
            rows.resize(nodes.size());
            const bool assembled = !term.kernel.gradient_dependent();
            for (std::size_t j = 0; j < nodes.size(); ++j) {
                if (assembled) {
                    assemble(term, nodes[j], rows[j]);
                } else {
                    rows[j].lambda = dynamic_lambda(term, G.coord(nodes[j]));
                }
            }
        }
    }

    [[nodiscard]] std::size_t term_count() const { return rows_.size(); }

    /// Largest center coefficient of term t over the Omega nodes.
    [[nodiscard]] double lambda(std::size_t t) const {
        double l = 0.0;
        for (const auto& r : rows_[t]) l = std::max(l, r.lambda);
        return l;
    }

    /// Off-center coefficients below -tol (a non-monotone stencil).
    [[nodiscard]] long negative_coefficients(double tol = 1e-12) const {
        long n = 0;
        for (const auto& rows : rows_)
            for (const auto& r : rows)
                for (std::size_t i = 0; i < r.idx.size(); ++i)
                    if (r.idx[i] != r.center && r.coef[i] < -tol * std::max(1.0, r.lambda)) ++n;
        return n;
    }

    /// I at the j-th Omega node. `exterior_is_g` lets assembled rows use the
    /// cached far landings; otherwise they read u's own exterior.
    [[nodiscard]] double apply(std::size_t t, std::size_t j, const GridField& u, const Differentials& d,
                               double signed_delta, bool exterior_is_g) const {
        const auto& row = rows_[t][j];
        const auto& term = (*terms_)[t];
        if (!row.assembled) {
            const std::size_t k = grid_->omega_nodes()[j];
            const Point& x = grid_->coord(k);
            const SmallMatrix A = term.kernel.linear_map(x, d.p);
            double far = 0.0, l1 = 0.0;
            detail::far_field_sum(
                term.quad, term.kernel, A, term.kernel.is_linear(), x, d.p, u[k],
                [&](const Point& y) { return u.sample_extended(y); }, far, l1);
            return near_field_grid(A, d.X, term.quad.exact_second_moment_inner, term.quad.dim_m, signed_delta, x, u[k],
                                   directional_step(*grid_), [&](const Point& y) { return u.sample_extended(y); }) +
                   far;
        }
        double s = 0.0;
        for (std::size_t i = 0; i < row.idx.size(); ++i) s += row.coef[i] * u[row.idx[i]];
        if (exterior_is_g) {
            s += row.exterior;
        } else {
            for (const auto& [w, y] : row.outside) s += w * u.exterior()(y);
        }
        return s + signed_delta * row.slack;
    }

private:
    struct Row {
        bool assembled = false;
        std::size_t center = 0;
        std::vector<std::size_t> idx;
        std::vector<double> coef;
        double exterior = 0.0;                         // sum of w g(y) over landings outside the box
        std::vector<std::pair<double, Point>> outside;  // those landings
        double slack = 0.0;                            // ∫_{|z|<eps} |A z|^2 dq
        double lambda = 0.0;                           // -(center coefficient)
    };

    void assemble(const NonlocalTerm& term, std::size_t k, Row& row) const {
        const Grid& G = *grid_;
        const int n = G.dim_n();
        const Point& x = G.coord(k);
        const Point p0(n);
        const SmallMatrix A = term.kernel.linear_map(x, p0);
        const bool linear = term.kernel.is_linear();
        const auto& q = term.quad;
        const ScalarField& g = G.domain().g();
        std::map<std::size_t, double> acc;
        acc[k] = 0.0;
        Point S(n);  // sum of w beta over compensated nodes
        std::array<std::size_t, 4> idx{};
        std::array<double, 4> wt{};
        const auto land = [&](const Point& y, double w) {
            const int c = G.stencil(y, idx, wt);
            if (c < 0) {
                row.exterior += w * g(y);
                row.outside.emplace_back(w, y);
            } else {
                for (int a = 0; a < c; ++a) acc[idx[a]] += w * wt[a];
            }
        };
        for (const Shell& sh : q.shells) {
            const bool compensate = sh.r_out <= 1.0;
            for (std::size_t i = sh.first; i < sh.first + sh.count; ++i) {
                const QuadNode& nd = q.nodes[i];
                const Point beta = linear ? A.apply(nd.z) : term.kernel.evaluate(x, p0, nd.z);
                acc[k] -= nd.weight;
                if (compensate) S = S + nd.weight * beta;
                land(x + beta, nd.weight);
            }
        }
        // -<p, S> with central differences.
        for (int i = 0; i < n; ++i) {
            const std::size_t s = G.stride(i);
            const double c = S[i] * 0.5 * G.inv_h(i);
            acc[k + s] -= c;
            acc[k - s] += c;
        }
        // Near field 1/2 m2/M sum_c <X a_c, a_c>, matching near_field_grid.
        const double scale = 0.5 * q.exact_second_moment_inner / q.dim_m;
        const double t = directional_step(G);
        for (int c = 0; c < A.cols; ++c) {
            if (!mixes_axes(A, c)) {
                for (int i = 0; i < n; ++i) {
                    const double kii = A(i, c) * A(i, c) * (scale * G.inv_h(i) * G.inv_h(i));
                    if (kii == 0.0) continue;
                    const std::size_t s = G.stride(i);
                    acc[k + s] += kii;
                    acc[k - s] += kii;
                    acc[k] -= 2.0 * kii;
                }
                continue;
            }
            Point a(n);
            for (int i = 0; i < n; ++i) a[i] = A(i, c);
            const double w = scale * a.norm2() / (t * t);
            const Point d = (t / a.norm()) * a;
            acc[k] -= 2.0 * w;
            land(x + d, w);
            land(x - d, w);
        }
        row.assembled = true;
        row.center = k;
        for (const auto& [i, a] : acc) {
            if (a == 0.0 && i != k) continue;
            row.idx.push_back(i);
            row.coef.push_back(a);
        }
        row.slack = A.frobenius2() * q.exact_second_moment_inner / q.dim_m;
        row.lambda = -acc[k];
    }

    /// Bound on the center coefficient when beta depends on the gradient.
    [[nodiscard]] double dynamic_lambda(const NonlocalTerm& term, const Point& x) const {
        const Grid& G = *grid_;
        double inv_h2 = 0.0;
        for (int i = 0; i < G.dim_n(); ++i) inv_h2 = std::max(inv_h2, G.inv_h(i) * G.inv_h(i));
        const double b = term.kernel.b1(x);
        return term.quad.total_weight() + term.quad.exact_second_moment_inner * b * b * inv_h2;
    }

    std::shared_ptr<const Grid> grid_;
    const std::vector<NonlocalTerm>* terms_;
    std::vector<std::vector<Row>> rows_;
};

// ---------------------------------------------------------------------------
// Perron bounds

namespace detail {

inline double local_at_constant(const ProblemSpec& spec, const Point& x, double r) {
    const int n = spec.grid->dim_n();
    return spec.local.eval_unchecked(x, r, Point(n), SmallMatrix(n, n));
}

inline double max_g0(const ProblemSpec& spec) {
    double v = -std::numeric_limits<double>::infinity();
    for (const auto& t : spec.terms) v = std::max(v, t.G(0.0));
    return v;
}

}  // namespace detail

inline PerronBounds perron_bounds(const ProblemSpec& spec, double cap = 1e12) {
    const Grid& G = *spec.grid;
    double sup_data = -std::numeric_limits<double>::infinity(), inf_data = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < G.size(); ++k) {
        if (G.in_omega(k)) {
            if (spec.u0) {
                const double v = (*spec.u0)(G.coord(k));
                sup_data = std::max(sup_data, v);
                inf_data = std::min(inf_data, v);
            }
        } else {
            const double v = spec.g()(G.coord(k));
            sup_data = std::max(sup_data, v);
            inf_data = std::min(inf_data, v);
        }
    }
    const double g0 = detail::max_g0(spec);
    PerronBounds b{inf_data, sup_data};
    if (const auto* lp = spec.local.linear()) {
        // gamma M - f(x) + G(0) >= 0 and the mirror inequality, in closed form.
        for (std::size_t k : G.omega_nodes()) {
            const double r = (lp->f(G.coord(k)) - g0) / lp->gamma;
            b.M = std::max(b.M, r);
            b.m = std::min(b.m, r);
        }
        return b;
    }
    // Monotone in r by properness: bracket then bisect.
    const auto ok_upper = [&](double M) {
        for (std::size_t k : G.omega_nodes())
            if (detail::local_at_constant(spec, G.coord(k), M) + g0 < 0.0) return false;
        return true;
    };
    const auto ok_lower = [&](double m) {
        for (std::size_t k : G.omega_nodes())
            if (detail::local_at_constant(spec, G.coord(k), m) + g0 > 0.0) return false;
        return true;
    };
    const auto search = [&](double start, double dir, const auto& ok) {
        if (ok(start)) return start;
        double step = 1.0, lo = start, hi = start + dir;
        while (!ok(hi)) {
            lo = hi;
            step *= 2.0;
            hi = start + dir * step;
            if (std::abs(hi) > cap) throw UnboundedSearch("no Perron bound below " + format_double(cap));
        }
        for (int i = 0; i < 200 && std::abs(hi - lo) > 1e-12 * std::max(1.0, std::abs(hi)); ++i) {
            const double mid = 0.5 * (lo + hi);
            (ok(mid) ? hi : lo) = mid;
        }
        return hi + dir * 1e-9;
    };
    b.M = search(sup_data, 1.0, ok_upper);
    b.m = search(inf_data, -1.0, ok_lower);
    return b;
}

// ---------------------------------------------------------------------------
// Residual and time step

struct ResidualOptions {
    double delta = 0.0;
    SlackSign sign = SlackSign::neutral;
    int threads = 1;
    /// Set when the field's exterior is the Dirichlet data g.
    bool exterior_is_g = true;
};

/// R_k = F(x_k, u_k, p_k, X_k) + max_i G_i(-I_i) on Omega nodes, 0 elsewhere.
inline std::vector<double> residual(const ProblemSpec& spec, const DiscreteOperator& op, const GridField& u,
                                    const ResidualOptions& opt = {}) {
    const Grid& G = *spec.grid;
    const auto& nodes = G.omega_nodes();
    std::vector<double> R(G.size(), 0.0);
    const double signed_delta = sign_value(opt.sign) * opt.delta;
    parallel_for(nodes.size(), opt.threads, [&](std::size_t j) {
        const std::size_t k = nodes[j];
        const Differentials d = gradient_hessian(u, k);
        double nl = -std::numeric_limits<double>::infinity();
        for (std::size_t t = 0; t < spec.terms.size(); ++t) {
            const double I = op.apply(t, j, u, d, signed_delta, opt.exterior_is_g);
            nl = std::max(nl, spec.terms[t].G(-I));
        }
        R[k] = spec.local.eval_unchecked(G.coord(k), u[k], d.p, d.X) + nl;
    });
    for (std::size_t k : nodes)
        if (!std::isfinite(R[k])) throw NonFiniteSample("residual at node " + std::to_string(k) + " is not finite");
    return R;
}

inline std::vector<double> residual(const ProblemSpec& spec, const GridField& u, const ResidualOptions& opt = {}) {
    return residual(spec, DiscreteOperator(spec), u, opt);
}

/// dt = 0.9 / (gamma + 2 N c / h^2 + G' lambda).
inline double cfl_timestep(double gamma, double c, int dim_n, double h, double g_prime, double lambda) {
    return 0.9 / (gamma + 2.0 * dim_n * c / (h * h) + g_prime * lambda);
}

/// Time step for which the explicit update is monotone on [m, M]-valued fields.
inline double cfl_bound(const ProblemSpec& spec, const DiscreteOperator& op, const PerronBounds& range) {
    const Grid& G = *spec.grid;
    const int n = G.dim_n();
    const double width = std::max(range.M - range.m, 0.0);

    // Local part: r-slope and diagonal diffusion coefficient.
    double r_slope = 0.0, diffusion = 0.0;
    if (const auto* lp = spec.local.linear()) {
        r_slope = lp->gamma;
        for (int i = 0; i < n; ++i) diffusion += 2.0 * lp->c * G.inv_h(i) * G.inv_h(i);
    } else {
        const double lo = range.m, hi = width > 0.0 ? range.M : range.m + 1.0;
        for (std::size_t k : G.omega_nodes()) {
            const Point& x = G.coord(k);
            const Point p0(n);
            const SmallMatrix O(n, n);
            r_slope = std::max(r_slope, (spec.local.eval_unchecked(x, hi, p0, O) - spec.local.eval_unchecked(x, lo, p0, O)) /
                                            (hi - lo));
            double dk = 0.0;
            for (int i = 0; i < n; ++i) {
                SmallMatrix E(n, n);
                E(i, i) = 1.0;
                const double ci = spec.local.eval_unchecked(x, lo, p0, O) - spec.local.eval_unchecked(x, lo, p0, E);
                dk += 2.0 * std::max(ci, 0.0) * G.inv_h(i) * G.inv_h(i);
            }
            diffusion = std::max(diffusion, dk);
        }
    }

    double nonlocal = 0.0;
    for (std::size_t t = 0; t < spec.terms.size(); ++t) {
        const double lam = op.lambda(t);
        const double reach = lam * width * (1.0 + 1e-6) + 1e-9;
        const auto exact = spec.terms[t].G.exact_lipschitz(-reach, reach);
        const double gp = exact ? *exact : lipschitz_estimate(spec.terms[t].G, -reach, reach).value;
        nonlocal = std::max(nonlocal, gp * lam);
    }
    return 0.9 / (r_slope + diffusion + nonlocal);
}

inline double cfl_bound(const ProblemSpec& spec, const PerronBounds& range) {
    return cfl_bound(spec, DiscreteOperator(spec), range);
}

// ---------------------------------------------------------------------------
// Time stepping

/// u - dt R on Omega nodes; complement nodes are reset to g.
inline GridField step_explicit(const ProblemSpec& spec, const DiscreteOperator& op, const GridField& u, double dt,
                               double dt_bound, int threads = 1) {
    if (dt > dt_bound * (1.0 + 1e-12)) {
        throw CflViolation("dt " + format_double(dt) + " exceeds the monotone bound " + format_double(dt_bound));
    }
    const auto R = residual(spec, op, u, {0.0, SlackSign::neutral, threads, true});
    GridField out(u);
    for (std::size_t k : spec.grid->omega_nodes()) out[k] = u[k] - dt * R[k];
    out.refresh_exterior();
    return out;
}

inline GridField step_explicit(const ProblemSpec& spec, const GridField& u, double dt, int threads = 1) {
    const DiscreteOperator op(spec);
    return step_explicit(spec, op, u, dt, cfl_bound(spec, op, perron_bounds(spec)), threads);
}

struct SolverConfig {
    double tol = 1e-6;
    long max_iter = 200000;
    int threads = 1;
    /// Overrides the CFL step (must not exceed it).
    std::optional<double> dt;
};

namespace detail {

inline double sup_on(const std::vector<double>& v, const std::vector<std::size_t>& nodes) {
    double s = 0.0;
    for (std::size_t k : nodes) s = std::max(s, std::abs(v[k]));
    return s;
}

inline long count_outside(const GridField& u, const std::vector<std::size_t>& nodes, const PerronBounds& b, double tol) {
    long n = 0;
    for (std::size_t k : nodes)
        if (u[k] < b.m - tol || u[k] > b.M + tol) ++n;
    return n;
}

}  // namespace detail

/// Pseudo-time marching to the steady state. `init` (optional) replaces the
/// default start, the projection of the u0-or-g extension onto [m, M].
inline std::pair<GridField, SolverReport> solve_stationary(const ProblemSpec& spec, const SolverConfig& cfg = {},
                                                           const GridField* init = nullptr) {
    const auto start = std::chrono::steady_clock::now();
    const Grid& G = *spec.grid;
    const auto& nodes = G.omega_nodes();
    const DiscreteOperator op(spec);
    SolverReport rep;
    rep.bounds = perron_bounds(spec);
    rep.truncated_nodes = G.truncated_nodes();
    const double bound = cfl_bound(spec, op, rep.bounds);
    rep.dt = cfg.dt ? *cfg.dt : bound;
    if (rep.dt > bound * (1.0 + 1e-12)) throw CflViolation("configured dt exceeds the monotone bound");

    GridField u = init ? *init : GridField(spec.grid);
    if (!init) {
        const ScalarField& ext = spec.u0 ? *spec.u0 : spec.g();
        for (std::size_t k : nodes) u[k] = std::clamp(ext(G.coord(k)), rep.bounds.m, rep.bounds.M);
    }
    u.refresh_exterior();

    const ResidualOptions ropt{0.0, SlackSign::neutral, cfg.threads, true};
    for (long it = 0;; ++it) {
        const auto R = residual(spec, op, u, ropt);
        rep.residual_sup = detail::sup_on(R, nodes);
        rep.iterations = it;
        if (rep.residual_sup <= cfg.tol) {
            rep.converged = true;
            break;
        }
        if (it >= cfg.max_iter) {
            rep.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
            throw MaxIterExceeded(u, rep);
        }
        for (std::size_t k : nodes) u[k] -= rep.dt * R[k];
        rep.violations += detail::count_outside(u, nodes, rep.bounds, cfg.tol);
    }
    rep.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    return {std::move(u), rep};
}

struct EvolutionConfig {
    /// Final time; 0 means ProblemSpec::horizon.
    double T = 0.0;
    std::vector<double> checkpoints;
    int threads = 1;
    std::optional<double> dt;
};

struct EvolutionResult {
    GridField final_field;
    std::vector<double> times;
    std::vector<GridField> snapshots;
    SolverReport report;
};

/// Explicit Euler for u_t + F + G(-I) = 0 from u0 with u = g off Omega.
inline EvolutionResult solve_evolution(const ProblemSpec& spec, const EvolutionConfig& cfg = {},
                                       const GridField* init = nullptr) {
    const auto start = std::chrono::steady_clock::now();
    const Grid& G = *spec.grid;
    const auto& nodes = G.omega_nodes();
    const double T = cfg.T > 0.0 ? cfg.T : spec.horizon;
    if (!(T > 0.0)) throw InvalidProblem("evolution needs a positive horizon");
    if (!init && !spec.u0) throw InvalidProblem("evolution needs an initial condition u0");
    const DiscreteOperator op(spec);

    SolverReport rep;
    rep.bounds = perron_bounds(spec);
    rep.truncated_nodes = G.truncated_nodes();
    GridField u = init ? *init : GridField::with_dirichlet(spec.grid, *spec.u0);
    u.refresh_exterior();
    // The reachable range must cover the actual start.
    PerronBounds range = rep.bounds;
    for (std::size_t k : nodes) range.m = std::min(range.m, u[k]), range.M = std::max(range.M, u[k]);
    const double bound = cfl_bound(spec, op, range);
    double dt = cfg.dt ? *cfg.dt : bound;
    if (dt > bound * (1.0 + 1e-12)) throw CflViolation("configured dt exceeds the monotone bound");
    const long steps = static_cast<long>(std::ceil(T / dt - 1e-9));
    dt = T / static_cast<double>(steps);
    rep.dt = dt;

    std::vector<double> marks = cfg.checkpoints;
    std::sort(marks.begin(), marks.end());
    std::vector<long> mark_steps;
    for (double c : marks) mark_steps.push_back(std::clamp(std::lround(c / dt), 0L, steps));

    EvolutionResult out{u, {}, {}, {}};
    std::size_t next = 0;
    const auto snap = [&](long s) {
        while (next < mark_steps.size() && mark_steps[next] == s) {
            out.times.push_back(static_cast<double>(s) * dt);
            out.snapshots.push_back(u);
            ++next;
        }
    };
    snap(0);
    const ResidualOptions ropt{0.0, SlackSign::neutral, cfg.threads, true};
    std::vector<double> R;
    for (long s = 1; s <= steps; ++s) {
        R = residual(spec, op, u, ropt);
        for (std::size_t k : nodes) u[k] -= dt * R[k];
        rep.violations += detail::count_outside(u, nodes, range, 1e-9);
        snap(s);
    }
    rep.iterations = steps;
    rep.residual_sup = detail::sup_on(residual(spec, op, u, ropt), nodes);
    rep.converged = true;
    rep.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    out.final_field = std::move(u);
    out.report = rep;
    return out;
}

}  // namespace levy
