#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <vector>

#include "levy/errors.hpp"
#include "levy/measure.hpp"
#include "levy/numerics.hpp"
#include "levy/parallel.hpp"
#include "levy/solver.hpp"

namespace levy {

struct PathConfig {
    double eps_cut = 1e-3;
    double dt_drift = 1e-3;
    long n_paths = 10000;
    std::uint64_t seed = 0;
    /// Defaults to 50 / gamma.
    std::optional<double> t_max;
    std::vector<Point> probes;
    int threads = 1;
};

struct McEstimate {
    Point x;
    double mean = 0.0;
    double std_error = 0.0;
    long n_paths = 0;
    double capped_fraction = 0.0;
    double bias_bound = 0.0;
};

/// Draws z from dq restricted to |z| >= eps_cut, normalized by its mass.
class JumpSampler {
public:
    JumpSampler(const LevyMeasure& m, double eps_cut) : dim_m_(m.dim_m()), eps_(eps_cut) {
        if (!(eps_cut > 0.0)) throw InvalidProblem("eps_cut must be positive");
        lambda_ = m.tail_mass(eps_cut);
        if (!(lambda_ > 0.0) || !std::isfinite(lambda_)) throw InvalidMeasure("jump rate must be positive and finite");
        if (const auto a = m.alpha0()) {
            alpha_ = *a;
            return;
        }
        if (eps_cut >= 1.0) throw InvalidProblem("eps_cut must lie in (0, 1) for tabulated or density measures");
        // Radial law on fine geometric shells with a power-law fit inside each one.
        const double top = std::isfinite(m.support_radius()) ? m.support_radius() : 1e8;
        QuadratureOptions opt;
        opt.nodes_per_shell = 1;
        opt.angles_per_shell = 2;
        opt.growth_ratio = std::exp2(0.125);
        const auto q = build_quadrature(m, eps_cut, std::max(top, 1.0), opt);
        double acc = 0.0;
        for (const auto& sh : q.shells) {
            if (!(sh.mass > 0.0)) continue;
            acc += sh.mass;
            shells_.push_back({sh.r_in, sh.r_out, acc, fit_exponent(m, sh.r_in, sh.r_out)});
        }
        if (q.tail_mass_outer > 0.0) {
            const double r = q.z_max;
            acc += q.tail_mass_outer;
            shells_.push_back({r, std::numeric_limits<double>::infinity(), acc,
                               std::max(fit_exponent(m, r / 2.0, r), 1e-3)});
        }
        for (auto& s : shells_) s.cum /= acc;
    }

    [[nodiscard]] double lambda() const { return lambda_; }
    [[nodiscard]] double eps_cut() const { return eps_; }

    [[nodiscard]] double radius(numerics::StreamRng& rng) const {
        const double u = rng.uniform_open0();
        if (shells_.empty()) return eps_ * std::pow(u, -1.0 / alpha_);
        auto it = std::lower_bound(shells_.begin(), shells_.end(), 1.0 - u,
                                   [](const RadialShell& s, double v) { return s.cum < v; });
        if (it == shells_.end()) --it;
        return power_in(it->a, it->b, it->exponent, rng.uniform_open0());
    }

    [[nodiscard]] Point draw(numerics::StreamRng& rng) const {
        const double r = radius(rng);
        Point z(dim_m_);
        if (dim_m_ == 1) {
            z[0] = rng.uniform() < 0.5 ? -r : r;
        } else {
            const double th = 2.0 * std::numbers::pi * rng.uniform();
            z[0] = r * std::cos(th);
            z[1] = r * std::sin(th);
        }
        return z;
    }

private:
    struct RadialShell {
        double a, b, cum, exponent;  // radial law ~ s^{-1-exponent} on [a, b)
    };

    static double fit_exponent(const LevyMeasure& m, double a, double b) {
        const double qa = std::pow(a, m.dim_m() - 1) * m.radial_density(a);
        const double qb = std::pow(b, m.dim_m() - 1) * m.radial_density(b);
        if (!(qa > 0.0) || !(qb > 0.0)) return 0.0;
        return -std::log(qb / qa) / std::log(b / a) - 1.0;
    }

    /// Inverse CDF of s^{-1-k} restricted to [a, b); uniform in log s when k = 0.
    static double power_in(double a, double b, double k, double u) {
        if (!std::isfinite(b)) return a * std::pow(u, -1.0 / k);
        if (std::abs(k) < 1e-9) return a * std::pow(b / a, 1.0 - u);
        const double fa = std::pow(a, -k), fb = std::pow(b, -k);
        return std::pow(fb + u * (fa - fb), -1.0 / k);
    }

    int dim_m_;
    double eps_;
    double lambda_ = 0.0;
    double alpha_ = 1.0;
    std::vector<RadialShell> shells_;
};

inline Point sample_jump(const LevyMeasure& m, double eps_cut, numerics::StreamRng& rng) {
    return JumpSampler(m, eps_cut).draw(rng);
}

namespace detail {

struct LinearData {
    double gamma;
    const ScalarField* f;
    const NonlocalTerm* term;
};

inline LinearData require_linear(const ProblemSpec& spec) {
    const auto* lin = spec.local.linear();
    if (!lin) throw UnsupportedConfiguration("simulation needs a linear local operator gamma r - f");
    if (lin->c != 0.0) throw UnsupportedConfiguration("simulation does not model the second-order term c > 0");
    if (spec.terms.size() != 1) throw UnsupportedConfiguration("simulation needs exactly one nonlocal term");
    const auto& t = spec.terms.front();
    if (!t.G.is_identity()) throw UnsupportedConfiguration("simulation needs G = Identity");
    if (t.kernel.gradient_dependent()) throw UnsupportedConfiguration("simulation needs a gradient-independent kernel");
    if (!(lin->gamma > 0.0)) throw UnsupportedConfiguration("simulation needs gamma > 0");
    return {lin->gamma, &lin->f, &t};
}

/// e^{-gamma t0} - e^{-gamma t1}, divided by gamma.
inline double discount_integral(double gamma, double t0, double t1) {
    return std::exp(-gamma * t0) * -std::expm1(-gamma * (t1 - t0)) / gamma;
}

}  // namespace detail

/// Discounted exit-time estimate of u at each probe for gamma u - I[u] = f
/// in Omega, u = g off Omega. Small jumps below eps_cut are dropped.
inline std::vector<McEstimate> simulate_value(const ProblemSpec& spec, const PathConfig& cfg) {
    const auto lin = detail::require_linear(spec);
    if (!(cfg.eps_cut > 0.0 && cfg.eps_cut < 1.0)) throw InvalidProblem("eps_cut must lie in (0, 1)");
    if (cfg.n_paths < 2) throw InvalidProblem("need at least two paths");
    if (!(cfg.dt_drift > 0.0)) throw InvalidProblem("dt_drift must be positive");
    const double gamma = lin.gamma;
    const double t_max = cfg.t_max.value_or(50.0 / gamma);
    if (!(t_max > 0.0)) throw InvalidProblem("t_max must be positive");
    const auto& kernel = lin.term->kernel;
    const auto& measure = lin.term->measure;
    const JumpSampler sampler(measure, cfg.eps_cut);
    const Domain& dom = spec.domain();
    const ScalarField& f = *lin.f;
    const ScalarField& g = dom.g();
    const int n = dom.dim_n();
    const Point p0(n);

    // Compensator drift -∫_{eps_cut<=|z|<=1} beta dq; zero for linear kernels
    // since the measure is symmetric.
    std::optional<AnnularQuadrature> drift_quad;
    if (!kernel.is_linear()) drift_quad = build_quadrature(measure, cfg.eps_cut, 1.0);
    const auto drift = [&](const Point& x) {
        Point b(n);
        for (const auto& node : drift_quad->nodes) {
            const Point beta = kernel.evaluate(x, p0, node.z);
            for (int i = 0; i < n; ++i) b[i] -= node.weight * beta[i];
        }
        return b;
    };

    const double bound = [&] {
        const auto pb = perron_bounds(spec);
        return std::max(std::abs(pb.m), std::abs(pb.M));
    }();

    std::vector<McEstimate> out;
    for (std::size_t probe = 0; probe < cfg.probes.size(); ++probe) {
        const Point x0 = cfg.probes[probe];
        if (x0.dim != n) throw DimensionMismatch("probe dimension differs from the domain");
        std::vector<double> value(cfg.n_paths), capped(cfg.n_paths, 0.0), g_cap(cfg.n_paths, 0.0);
        parallel_for(static_cast<std::size_t>(cfg.n_paths), cfg.threads, [&](std::size_t path) {
            numerics::StreamRng rng(cfg.seed, (static_cast<std::uint64_t>(probe) << 40) + path);
            Point x = x0;
            double t = 0.0, acc = 0.0;
            while (true) {
                if (!dom.in_omega(x)) {
                    acc += std::exp(-gamma * t) * g(x);
                    break;
                }
                const double hold = rng.exponential(sampler.lambda());
                const double t_jump = std::min(t + hold, t_max);
                bool left = false;
                if (!drift_quad) {
                    acc += f(x) * detail::discount_integral(gamma, t, t_jump);
                    t = t_jump;
                } else {
                    while (t < t_jump) {
                        const double s = std::min(cfg.dt_drift, t_jump - t);
                        acc += f(x) * detail::discount_integral(gamma, t, t + s);
                        const Point b = drift(x);
                        for (int i = 0; i < n; ++i) x[i] += s * b[i];
                        t += s;
                        if (!dom.in_omega(x)) {
                            left = true;
                            break;
                        }
                    }
                }
                if (left) continue;
                if (t >= t_max) {
                    const double gx = g(x);
                    acc += std::exp(-gamma * t) * gx;
                    capped[path] = 1.0;
                    g_cap[path] = std::abs(gx);
                    break;
                }
                const Point beta = kernel.evaluate(x, p0, sampler.draw(rng));
                for (int i = 0; i < n; ++i) x[i] += beta[i];
            }
            value[path] = acc;
        });

        const double N = static_cast<double>(cfg.n_paths);
        McEstimate e;
        e.x = x0;
        e.n_paths = cfg.n_paths;
        e.mean = numerics::pairwise_sum(value) / N;
        std::vector<double> sq(cfg.n_paths);
        for (long i = 0; i < cfg.n_paths; ++i) sq[i] = (value[i] - e.mean) * (value[i] - e.mean);
        e.std_error = std::sqrt(numerics::pairwise_sum(sq) / (N - 1.0)) / std::sqrt(N);
        e.capped_fraction = numerics::pairwise_sum(capped) / N;
        if (e.capped_fraction > 0.0) {
            const double gmax = *std::max_element(g_cap.begin(), g_cap.end());
            e.bias_bound = e.capped_fraction * std::exp(-gamma * t_max) * (gmax + bound);
        }
        out.push_back(e);
    }
    return out;
}

}  // namespace levy
