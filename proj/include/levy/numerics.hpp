#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <utility>
#include <vector>

namespace levy::numerics {

/// Gauss-Legendre nodes and weights on [-1, 1] (Newton on the three-term
/// recurrence). Nodes are returned in increasing order.
inline std::pair<std::vector<double>, std::vector<double>> gauss_legendre(int n) {
    std::vector<double> x(n), w(n);
    const int half = (n + 1) / 2;
    for (int i = 0; i < half; ++i) {
        double z = std::cos(M_PI * (i + 0.75) / (n + 0.5));
        double pp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p1 = 1.0, p2 = 0.0;
            for (int j = 1; j <= n; ++j) {
                const double p3 = p2;
                p2 = p1;
                p1 = ((2.0 * j - 1.0) * z * p2 - (j - 1.0) * p3) / j;
            }
            pp = n * (z * p1 - p2) / (z * z - 1.0);
            const double dz = p1 / pp;
            z -= dz;
            if (std::abs(dz) < 1e-16) break;
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = w[n - 1 - i] = 2.0 / ((1.0 - z * z) * pp * pp);
    }
    if (n % 2 == 1) x[n / 2] = 0.0;
    return {std::move(x), std::move(w)};
}

struct IntegralResult {
    double value = 0.0;
    double error = 0.0;
    bool converged = true;
};

namespace detail {

// Kronrod 15-point extension of the 7-point Gauss rule.
inline constexpr double kXgk[8] = {0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
                                   0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
                                   0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
                                   0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr double kWgk[8] = {0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
                                   0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
                                   0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
                                   0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr double kWg[4] = {0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
                                  0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

inline std::pair<double, double> gk15(const std::function<double(double)>& f, double a, double b) {
    const double c = 0.5 * (a + b), hw = 0.5 * (b - a);
    const double fc = f(c);
    double kron = fc * kWgk[7];
    double gauss = fc * kWg[3];
    for (int j = 0; j < 7; ++j) {
        const double dx = hw * kXgk[j];
        const double f1 = f(c - dx), f2 = f(c + dx);
        kron += kWgk[j] * (f1 + f2);
        if (j % 2 == 1) gauss += kWg[j / 2] * (f1 + f2);
    }
    return {kron * hw, std::abs((kron - gauss) * hw)};
}

inline IntegralResult adapt(const std::function<double(double)>& f, double a, double b, double tol,
                            int depth, int& budget) {
    auto [val, err] = gk15(f, a, b);
    --budget;
    if (err <= tol || depth <= 0 || budget <= 0 || !std::isfinite(val)) {
        return {val, err, err <= tol && std::isfinite(val)};
    }
    const double m = 0.5 * (a + b);
    const IntegralResult left = adapt(f, a, m, 0.5 * tol, depth - 1, budget);
    const IntegralResult right = adapt(f, m, b, 0.5 * tol, depth - 1, budget);
    return {left.value + right.value, left.error + right.error, left.converged && right.converged};
}

}  // namespace detail

/// Adaptive Gauss-Kronrod (7/15) on a finite interval.
inline IntegralResult integrate(const std::function<double(double)>& f, double a, double b,
                                double abs_tol = 1e-13, double rel_tol = 1e-12, int max_depth = 40) {
    if (a == b) return {};
    const auto [coarse, coarse_err] = detail::gk15(f, a, b);
    const double tol = std::max(abs_tol, rel_tol * std::abs(coarse));
    int budget = 20000;
    (void)coarse_err;
    return detail::adapt(f, a, b, tol, max_depth, budget);
}

/// Pairwise (cascade) summation. The split points depend only on the length,
/// so the result is a fixed function of the input order.
inline double pairwise_sum(std::span<const double> v) {
    if (v.size() <= 8) {
        double s = 0.0;
        for (double x : v) s += x;
        return s;
    }
    const std::size_t half = v.size() / 2;
    return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

/// Van der Corput radical inverse of `index` in `base`.
inline double radical_inverse(std::uint64_t index, std::uint32_t base) {
    const double inv = 1.0 / base;
    double f = inv, r = 0.0;
    while (index > 0) {
        r += f * static_cast<double>(index % base);
        index /= base;
        f *= inv;
    }
    return r;
}

/// Halton point `index` (1-based recommended) in [0,1)^dim, dim <= 16.
inline void halton(std::uint64_t index, std::span<double> out) {
    static constexpr std::uint32_t primes[16] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53};
    for (std::size_t d = 0; d < out.size(); ++d) out[d] = radical_inverse(index, primes[d]);
}

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Counter-based stream: draw k of stream (seed, stream_id) is a pure
/// function of the three integers, so results do not depend on which thread
/// consumes which stream.
class StreamRng {
public:
    StreamRng(std::uint64_t seed, std::uint64_t stream_id)
        : key_(splitmix64(splitmix64(seed) ^ (stream_id * 0xD1B54A32D192ED03ULL + 0x8CB92BA72F3D8DD7ULL))) {}

    std::uint64_t next_u64() { return splitmix64(key_ + 0x9E3779B97F4A7C15ULL * (++counter_)); }

    /// Uniform in (0, 1]; never returns zero.
    double uniform_open0() { return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53; }

    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double exponential(double rate) { return -std::log(uniform_open0()) / rate; }

    [[nodiscard]] std::uint64_t draws() const { return counter_; }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

}  // namespace levy::numerics
