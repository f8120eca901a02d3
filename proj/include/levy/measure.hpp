#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "levy/errors.hpp"
#include "levy/geometry.hpp"
#include "levy/numerics.hpp"

namespace levy {

/// q(z) = |z|^{-(M + alpha0)}.
struct PowerLaw {
    double alpha0 = 1.0;
};

/// Radial density tabulated at increasing radii, log-log interpolated between
/// samples, extended by power laws: the slope of the first two samples below
/// the table and s^{-tail_exponent} beyond it.
struct TabulatedRadialDensity {
    std::vector<double> radii;
    std::vector<double> values;
    double tail_exponent = 2.0;
};

/// Arbitrary radial density q(|z|), zero for |z| > support_radius. With a
/// finite support radius this is the compactly supported family.
struct RadialDensity {
    std::function<double(double)> q;
    double support_radius = std::numeric_limits<double>::infinity();
    std::string description;
};

using MeasureFamily = std::variant<PowerLaw, TabulatedRadialDensity, RadialDensity>;

struct IntegrabilityReport {
    bool integrable = false;
    double inner_second_moment = 0.0;  // ∫_{|z|<1} |z|^2 dq, +inf when divergent
    double outer_mass = 0.0;           // ∫_{|z|>=1} dq, +inf when divergent
    std::string detail;
};

namespace detail {

/// Outcome of summing dyadic radial shells toward 0 or toward infinity.
struct SeriesResult {
    enum class Status { converged, divergent } status = Status::converged;
    double value = 0.0;
};

/// Sums shell contributions c_0, c_1, ... until the geometric remainder is
/// negligible, or reports divergence when contributions stop shrinking.
/// The shell callback receives the running sum so it can use an absolute
/// tolerance relative to it.
inline SeriesResult sum_shell_series(const std::function<double(int, double)>& shell, double stop_radius_shells = -1) {
    constexpr int kBudget = 1000;
    constexpr double kTol = 1e-13;
    double sum = 0.0;
    double prev = 0.0, prev_ratio = 0.0;
    int growing = 0, zeros = 0;
    for (int k = 0; k < kBudget; ++k) {
        if (stop_radius_shells >= 0 && k >= stop_radius_shells) return {SeriesResult::Status::converged, sum};
        const double c = shell(k, sum);
        if (!std::isfinite(c)) return {SeriesResult::Status::divergent, std::numeric_limits<double>::infinity()};
        sum += c;
        if (c == 0.0) {
            if (++zeros >= 4) return {SeriesResult::Status::converged, sum};
            prev = 0.0;
            continue;
        }
        zeros = 0;
        if (prev > 0.0) {
            const double ratio = c / prev;
            growing = ratio >= 1.0 - 1e-9 ? growing + 1 : 0;
            if (growing >= 6) return {SeriesResult::Status::divergent, std::numeric_limits<double>::infinity()};
            if (k >= 4 && ratio < 1.0 && std::abs(ratio - prev_ratio) <= 1e-3 * ratio) {
                const double remainder = c * ratio / (1.0 - ratio);
                if (remainder <= kTol * std::abs(sum)) return {SeriesResult::Status::converged, sum + remainder};
            }
            prev_ratio = ratio;
        }
        prev = c;
    }
    throw NonConvergentQuadrature("dyadic shell series did not settle within " + std::to_string(kBudget) + " shells");
}

}  // namespace detail

/// A radially symmetric Lévy measure dq(z) = q(|z|) dz on R^M, M in {1, 2}.
/// Instances built through `create` are guaranteed to satisfy
/// ∫_{|z|<1}|z|^2 dq + ∫_{|z|>=1} dq < ∞.
class LevyMeasure {
public:
    static LevyMeasure create(int dim_m, MeasureFamily family, std::optional<double> mu = std::nullopt);

    /// Skips the integrability gate; only for feeding `check_integrability`.
    static LevyMeasure create_unchecked(int dim_m, MeasureFamily family, std::optional<double> mu = std::nullopt) {
        return LevyMeasure(dim_m, std::move(family), mu);
    }

    static LevyMeasure power_law(int dim_m, double alpha0, std::optional<double> mu = std::nullopt) {
        return create(dim_m, PowerLaw{alpha0}, mu);
    }

    [[nodiscard]] int dim_m() const { return dim_m_; }
    [[nodiscard]] const MeasureFamily& family() const { return family_; }
    [[nodiscard]] std::optional<double> mu() const { return mu_; }
    [[nodiscard]] bool is_power_law() const { return std::holds_alternative<PowerLaw>(family_); }
    [[nodiscard]] std::optional<double> alpha0() const {
        if (const auto* pl = std::get_if<PowerLaw>(&family_)) return pl->alpha0;
        return std::nullopt;
    }
    [[nodiscard]] double sphere() const { return unit_sphere_measure(dim_m_); }

    /// q as a function of the radius |z| > 0.
    [[nodiscard]] double radial_density(double s) const {
        return std::visit([&](const auto& f) { return radial_density_of(f, s); }, family_);
    }

    [[nodiscard]] double density(const Point& z) const {
        if (z.dim != dim_m_) throw DimensionMismatch("density point dimension");
        return radial_density(z.norm());
    }

    /// ∫_{a <= |z| < b} |z|^kappa dq(z) for 0 < a <= b < ∞.
    [[nodiscard]] double radial_moment(double a, double b, double kappa) const {
        if (!(a > 0.0) || b < a) throw InvalidMeasure("radial_moment needs 0 < a <= b");
        if (a == b) return 0.0;
        if (const auto* pl = std::get_if<PowerLaw>(&family_)) {
            const double e = kappa - pl->alpha0;
            if (e == 0.0) return sphere() * std::log(b / a);
            return sphere() * (std::pow(b, e) - std::pow(a, e)) / e;
        }
        return numeric_moment(a, b, kappa);
    }

    /// ∫_{|z|<r} |z|^2 dq(z).
    [[nodiscard]] double small_ball_second_moment(double r) const {
        if (!(r > 0.0)) throw InvalidMeasure("small_ball_second_moment needs r > 0");
        if (const auto* pl = std::get_if<PowerLaw>(&family_)) {
            return sphere() * std::pow(r, 2.0 - pl->alpha0) / (2.0 - pl->alpha0);
        }
        const auto res = detail::sum_shell_series(
            [&](int k, double sum) {
                return numeric_moment(r * std::ldexp(1.0, -k - 1), r * std::ldexp(1.0, -k), 2.0, 1e-16 * sum);
            });
        if (res.status == detail::SeriesResult::Status::divergent) {
            throw NonConvergentQuadrature("inner second moment diverges");
        }
        return res.value;
    }

    /// ∫_{|z|>=r} |z|^kappa dq(z); throws DivergentTail when infinite.
    [[nodiscard]] double tail_moment(double r, double kappa) const {
        if (!(r > 0.0) || kappa < 0.0) throw InvalidMeasure("tail_moment needs r > 0 and kappa >= 0");
        if (const auto* pl = std::get_if<PowerLaw>(&family_)) {
            if (kappa >= pl->alpha0) {
                throw DivergentTail("kappa = " + std::to_string(kappa) + " >= alpha0 = " + std::to_string(pl->alpha0));
            }
            return sphere() * std::pow(r, kappa - pl->alpha0) / (pl->alpha0 - kappa);
        }
        const double support = support_radius();
        if (r >= support) return 0.0;
        int shells = -1;
        if (std::isfinite(support)) shells = static_cast<int>(std::ceil(std::log2(support / r))) + 1;
        const auto res = detail::sum_shell_series(
            [&](int k, double sum) {
                const double a = r * std::ldexp(1.0, k);
                return a >= support ? 0.0 : numeric_moment(a, std::min(2.0 * a, support), kappa, 1e-16 * sum);
            },
            shells);
        if (res.status == detail::SeriesResult::Status::divergent) {
            throw DivergentTail("tail moment of order " + std::to_string(kappa) + " diverges");
        }
        return res.value;
    }

    [[nodiscard]] double tail_mass(double r) const { return tail_moment(r, 0.0); }

    [[nodiscard]] double support_radius() const {
        if (const auto* rd = std::get_if<RadialDensity>(&family_)) return rd->support_radius;
        return std::numeric_limits<double>::infinity();
    }

    [[nodiscard]] std::string family_name() const {
        switch (family_.index()) {
            case 0: return "power_law";
            case 1: return "tabulated";
            default: return std::isfinite(support_radius()) ? "compact" : "density";
        }
    }

private:
    LevyMeasure(int dim_m, MeasureFamily family, std::optional<double> mu)
        : dim_m_(dim_m), family_(std::move(family)), mu_(mu) {
        if (dim_m_ < 1 || dim_m_ > kMaxDim) throw DimensionMismatch("measure dimension M must be 1 or 2");
        if (mu_ && (*mu_ < 0.0 || *mu_ >= 2.0)) throw InvalidMeasure("mu must lie in [0, 2)");
        if (const auto* pl = std::get_if<PowerLaw>(&family_)) {
            if (!(pl->alpha0 > 0.0 && pl->alpha0 < 2.0)) throw InvalidMeasure("alpha0 must lie in (0, 2)");
        }
        if (const auto* tab = std::get_if<TabulatedRadialDensity>(&family_)) {
            if (tab->radii.size() < 2 || tab->radii.size() != tab->values.size()) {
                throw InvalidMeasure("tabulated density needs >= 2 matching samples");
            }
            for (std::size_t i = 0; i < tab->radii.size(); ++i) {
                if (!(tab->radii[i] > 0.0) || !(tab->values[i] > 0.0) || (i && tab->radii[i] <= tab->radii[i - 1])) {
                    throw InvalidMeasure("tabulated radii must increase and samples must be positive");
                }
            }
        }
        if (const auto* rd = std::get_if<RadialDensity>(&family_)) {
            if (!rd->q) throw InvalidMeasure("density handle is empty");
            if (!(rd->support_radius > 0.0)) throw InvalidMeasure("support radius must be positive");
        }
    }

    double radial_density_of(const PowerLaw& pl, double s) const { return std::pow(s, -(dim_m_ + pl.alpha0)); }

    static double radial_density_of(const TabulatedRadialDensity& t, double s) {
        const auto& r = t.radii;
        const auto& v = t.values;
        if (s >= r.back()) return v.back() * std::pow(s / r.back(), -t.tail_exponent);
        if (s <= r.front()) {
            const double slope = std::log(v[1] / v[0]) / std::log(r[1] / r[0]);
            return v[0] * std::pow(s / r[0], slope);
        }
        const auto it = std::upper_bound(r.begin(), r.end(), s);
        const std::size_t i = static_cast<std::size_t>(it - r.begin()) - 1;
        const double slope = std::log(v[i + 1] / v[i]) / std::log(r[i + 1] / r[i]);
        return v[i] * std::pow(s / r[i], slope);
    }

    static double radial_density_of(const RadialDensity& d, double s) {
        return s > d.support_radius ? 0.0 : d.q(s);
    }

    double numeric_moment(double a, double b, double kappa, double abs_tol = 0.0) const {
        const double support = support_radius();
        if (a >= support) return 0.0;
        b = std::min(b, support);
        const int power = dim_m_ - 1;
        // Integrate in log-radius so power-law behaviour becomes smooth exponential.
        auto f = [&](double t) {
            const double s = std::exp(t);
            return std::pow(s, power + kappa + 1.0) * radial_density(s);
        };
        const double scale = abs_tol / sphere();
        const auto res = numerics::integrate(f, std::log(a), std::log(b), scale, 1e-12);
        if (!res.converged) {
            throw NonConvergentQuadrature("radial moment on [" + std::to_string(a) + ", " + std::to_string(b) + "]");
        }
        return sphere() * res.value;
    }

    int dim_m_;
    MeasureFamily family_;
    std::optional<double> mu_;
};

/// Checks ∫_{|z|<1}|z|^2 dq + ∫_{|z|>=1} dq < ∞. Closed form for power laws,
/// dyadic-shell refinement with divergence detection otherwise.
inline IntegrabilityReport check_integrability(const LevyMeasure& m) {
    IntegrabilityReport rep;
    if (const auto a0 = m.alpha0()) {
        rep.integrable = *a0 > 0.0 && *a0 < 2.0;
        rep.inner_second_moment = m.sphere() / (2.0 - *a0);
        rep.outer_mass = m.sphere() / *a0;
        rep.detail = "power law, closed form";
        return rep;
    }
    const auto inner = detail::sum_shell_series(
        [&](int k, double) { return m.radial_moment(std::ldexp(1.0, -k - 1), std::ldexp(1.0, -k), 2.0); });
    double outer = 0.0;
    bool outer_ok = true;
    try {
        outer = m.tail_mass(1.0);
    } catch (const DivergentTail&) {
        outer_ok = false;
        outer = std::numeric_limits<double>::infinity();
    }
    const bool inner_ok = inner.status == detail::SeriesResult::Status::converged;
    rep.inner_second_moment = inner.value;
    rep.outer_mass = outer;
    rep.integrable = inner_ok && outer_ok;
    rep.detail = rep.integrable ? "finite" : (!inner_ok ? "second moment diverges at the origin" : "mass diverges at infinity");
    return rep;
}

inline LevyMeasure LevyMeasure::create(int dim_m, MeasureFamily family, std::optional<double> mu) {
    LevyMeasure m(dim_m, std::move(family), mu);
    const IntegrabilityReport rep = check_integrability(m);
    if (!rep.integrable) throw InvalidMeasure("measure violates the integrability condition: " + rep.detail);
    return m;
}

// ---------------------------------------------------------------------------
// Annular quadrature

struct QuadratureOptions {
    int nodes_per_shell = 8;    // radial nodes per shell
    int angles_per_shell = 16;  // directions per radial node when M = 2 (even)
    double growth_ratio = 2.0;
    int max_shells = 10000;
};

struct QuadNode {
    Point z;
    double weight = 0.0;
};

struct Shell {
    double r_in = 0.0;
    double r_out = 0.0;
    double mass = 0.0;
    std::size_t first = 0;  // index of first node
    std::size_t count = 0;
};

/// Positive-weight discretization of dq on epsilon <= |z| < z_max.
/// Radius 1 is always a shell boundary, and nodes come in (z, -z) pairs.
struct AnnularQuadrature {
    int dim_m = 1;
    double epsilon = 0.0;
    double z_max = 0.0;
    std::vector<Shell> shells;
    std::vector<QuadNode> nodes;
    double exact_second_moment_inner = 0.0;  // ∫_{|z|<epsilon} |z|^2 dq
    double tail_mass_outer = 0.0;            // ∫_{|z|>=z_max} dq

    [[nodiscard]] double total_weight() const {
        double s = 0.0;
        for (const auto& sh : shells) s += sh.mass;
        return s;
    }
};

inline AnnularQuadrature build_quadrature(const LevyMeasure& m, double epsilon, double z_max,
                                          const QuadratureOptions& opt = {}) {
    if (!(epsilon > 0.0) || epsilon > z_max) throw InvalidMeasure("quadrature needs 0 < epsilon <= z_max");
    if (epsilon != z_max && !(epsilon < 1.0 && z_max >= 1.0)) {
        throw InvalidMeasure("quadrature needs epsilon < 1 <= z_max");
    }
    if (!(opt.growth_ratio > 1.0)) throw InvalidMeasure("growth_ratio must exceed 1");
    if (opt.nodes_per_shell < 1) throw InvalidMeasure("nodes_per_shell must be positive");
    if (m.dim_m() == 2 && (opt.angles_per_shell < 2 || opt.angles_per_shell % 2 != 0)) {
        throw InvalidMeasure("angles_per_shell must be even and >= 2");
    }

    AnnularQuadrature q;
    q.dim_m = m.dim_m();
    q.epsilon = epsilon;
    q.z_max = z_max;
    q.exact_second_moment_inner = m.small_ball_second_moment(epsilon);
    q.tail_mass_outer = m.tail_mass(z_max);

    std::vector<double> radii{epsilon};
    while (radii.back() < z_max) {
        const double r = radii.back();
        double next = r * opt.growth_ratio;
        if (r < 1.0 && next > 1.0) next = 1.0;
        if (next > z_max) next = z_max;
        radii.push_back(next);
        if (static_cast<int>(radii.size()) - 1 > opt.max_shells) {
            throw ShellBudgetExceeded(std::to_string(opt.max_shells) + " shells between " + std::to_string(epsilon) +
                                      " and " + std::to_string(z_max));
        }
    }

    const auto [gl_x, gl_w] = numerics::gauss_legendre(opt.nodes_per_shell);
    const int power = m.dim_m() - 1;
    const int n_dir = m.dim_m() == 1 ? 2 : opt.angles_per_shell;
    for (std::size_t k = 0; k + 1 < radii.size(); ++k) {
        Shell sh;
        sh.r_in = radii[k];
        sh.r_out = radii[k + 1];
        sh.mass = m.radial_moment(sh.r_in, sh.r_out, 0.0);
        sh.first = q.nodes.size();
        if (sh.mass > 0.0) {
            const double c = 0.5 * (sh.r_in + sh.r_out), hw = 0.5 * (sh.r_out - sh.r_in);
            std::vector<double> s(opt.nodes_per_shell), raw(opt.nodes_per_shell);
            double raw_sum = 0.0;
            for (int j = 0; j < opt.nodes_per_shell; ++j) {
                s[j] = c + hw * gl_x[j];
                raw[j] = gl_w[j] * std::pow(s[j], power) * m.radial_density(s[j]);
                raw_sum += raw[j];
            }
            for (int j = 0; j < opt.nodes_per_shell; ++j) {
                // Normalize to the exact shell mass; per-direction weight.
                const double w = raw_sum > 0.0 ? sh.mass * raw[j] / raw_sum / n_dir : 0.0;
                if (w == 0.0) continue;
                if (m.dim_m() == 1) {
                    q.nodes.push_back({Point{s[j]}, w});
                    q.nodes.push_back({Point{-s[j]}, w});
                } else {
                    for (int a = 0; a < n_dir / 2; ++a) {
                        const double th = (a + 0.5) * 2.0 * M_PI / n_dir;
                        const Point z{s[j] * std::cos(th), s[j] * std::sin(th)};
                        q.nodes.push_back({z, w});
                        q.nodes.push_back({-1.0 * z, w});
                    }
                }
            }
        }
        sh.count = q.nodes.size() - sh.first;
        q.shells.push_back(sh);
    }
    return q;
}

}  // namespace levy
