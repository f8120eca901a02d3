#pragma once

#include <cmath>
#include <cstdio>
#include <limits>
#include <memory>
#include <ostream>
#include <string>
#include <variant>
#include <vector>

#include "levy/errors.hpp"
#include "levy/expr.hpp"
#include "levy/geometry.hpp"

namespace levy {

namespace omega {

struct OpenBox {
    Point lo;
    Point hi;
};
struct OpenBall {
    Point center;
    double radius = 1.0;
};
/// {x : <normal, x> < offset}. Unbounded.
struct HalfSpace {
    Point normal;
    double offset = 0.0;
};

}  // namespace omega

using OmegaShape = std::variant<omega::OpenBox, omega::OpenBall, omega::HalfSpace>;

inline bool contains(const OmegaShape& shape, const Point& x) {
    switch (shape.index()) {
        case 0: {
            const auto& b = std::get<omega::OpenBox>(shape);
            for (int i = 0; i < x.dim; ++i)
                if (!(x[i] > b.lo[i] && x[i] < b.hi[i])) return false;
            return true;
        }
        case 1: {
            const auto& b = std::get<omega::OpenBall>(shape);
            return (x - b.center).norm2() < b.radius * b.radius;
        }
        default: {
            const auto& h = std::get<omega::HalfSpace>(shape);
            return dot(h.normal, x) < h.offset;
        }
    }
}

/// Bounding box of the computational grid, Omega inside it, and the
/// Dirichlet data g that lives on all of the complement of Omega.
class Domain {
public:
    Domain(int dim_n, Point box_lo, Point box_hi, OmegaShape shape, ScalarField g)
        : dim_n_(dim_n), lo_(box_lo), hi_(box_hi), shape_(std::move(shape)), g_(std::move(g)) {
        if (dim_n_ < 1 || dim_n_ > kMaxDim) throw InvalidDomain("dimension must be 1 or 2");
        if (lo_.dim != dim_n_ || hi_.dim != dim_n_) throw DimensionMismatch("box corners must live in R^N");
        for (int i = 0; i < dim_n_; ++i)
            if (!(lo_[i] < hi_[i])) throw InvalidDomain("box must have positive extent on every axis");
        margin_ = compute_margin();
        if (bounded() && margin_ < 0.0) throw InvalidDomain("Omega must lie inside the box");
    }

    [[nodiscard]] int dim_n() const { return dim_n_; }
    [[nodiscard]] const Point& box_lo() const { return lo_; }
    [[nodiscard]] const Point& box_hi() const { return hi_; }
    [[nodiscard]] const OmegaShape& shape() const { return shape_; }
    [[nodiscard]] const ScalarField& g() const { return g_; }
    [[nodiscard]] bool bounded() const { return !std::holds_alternative<omega::HalfSpace>(shape_); }
    /// Distance from Omega to the box boundary; negative infinity if unbounded.
    [[nodiscard]] double margin() const { return margin_; }
    [[nodiscard]] bool in_omega(const Point& x) const { return contains(shape_, x); }

private:
    double compute_margin() const {
        double m = std::numeric_limits<double>::infinity();
        switch (shape_.index()) {
            case 0: {
                const auto& b = std::get<omega::OpenBox>(shape_);
                for (int i = 0; i < dim_n_; ++i) m = std::min({m, b.lo[i] - lo_[i], hi_[i] - b.hi[i]});
                return m;
            }
            case 1: {
                const auto& b = std::get<omega::OpenBall>(shape_);
                for (int i = 0; i < dim_n_; ++i)
                    m = std::min({m, b.center[i] - b.radius - lo_[i], hi_[i] - b.center[i] - b.radius});
                return m;
            }
            default: return -std::numeric_limits<double>::infinity();
        }
    }

    int dim_n_;
    Point lo_, hi_;
    OmegaShape shape_;
    ScalarField g_;
    double margin_ = 0.0;
};

/// Uniform tensor grid with n_cells cells per axis, nodes laid out row-major
/// (x0 slowest).
class Grid {
public:
    Grid(Domain domain, int n_cells) : domain_(std::move(domain)), n_(n_cells) {
        if (n_ < 2) throw InvalidDomain("grid needs at least 2 cells per axis");
        const int d = domain_.dim_n();
        size_ = 1;
        for (int i = 0; i < d; ++i) {
            h_[i] = (domain_.box_hi()[i] - domain_.box_lo()[i]) / n_;
            inv_h_[i] = 1.0 / h_[i];
            size_ *= static_cast<std::size_t>(n_ + 1);
            axis_[i].resize(static_cast<std::size_t>(n_) + 1);
            for (int j = 0; j <= n_; ++j) axis_[i][j] = node_coordinate(i, j);
        }
        coords_.resize(size_);
        in_omega_.resize(size_);
        for (std::size_t k = 0; k < size_; ++k) {
            const auto idx = multi_index(k);
            Point x(d);
            for (int i = 0; i < d; ++i) x[i] = node_coordinate(i, idx[i]);
            coords_[k] = x;
            in_omega_[k] = domain_.in_omega(x) ? 1 : 0;
            if (in_omega_[k] && on_box_edge(k)) {
                if (domain_.bounded()) throw InvalidDomain("Omega touches the box edge; enlarge the box");
                // Unbounded Omega: the box edge acts as a truncation boundary carrying g.
                in_omega_[k] = 0;
                ++truncated_;
            }
            if (in_omega_[k]) omega_nodes_.push_back(k);
        }
    }

    [[nodiscard]] const Domain& domain() const { return domain_; }
    [[nodiscard]] int dim_n() const { return domain_.dim_n(); }
    [[nodiscard]] int n_cells() const { return n_; }
    [[nodiscard]] double h(int axis = 0) const { return h_[axis]; }
    [[nodiscard]] double inv_h(int axis) const { return inv_h_[axis]; }
    [[nodiscard]] std::size_t size() const { return size_; }
    [[nodiscard]] const Point& coord(std::size_t k) const { return coords_[k]; }
    /// Node coordinates along one axis.
    [[nodiscard]] const std::vector<double>& axis(int i) const { return axis_[i]; }
    [[nodiscard]] bool in_omega(std::size_t k) const { return in_omega_[k] != 0; }
    [[nodiscard]] const std::vector<std::size_t>& omega_nodes() const { return omega_nodes_; }
    /// Omega nodes on the box edge that were handed to g (unbounded Omega only).
    [[nodiscard]] std::size_t truncated_nodes() const { return truncated_; }
    [[nodiscard]] std::size_t stride(int axis) const { return axis == 0 && dim_n() == 2 ? n_ + 1 : 1; }

    [[nodiscard]] std::array<int, kMaxDim> multi_index(std::size_t k) const {
        std::array<int, kMaxDim> idx{};
        if (dim_n() == 1) {
            idx[0] = static_cast<int>(k);
        } else {
            idx[0] = static_cast<int>(k / (n_ + 1));
            idx[1] = static_cast<int>(k % (n_ + 1));
        }
        return idx;
    }

    [[nodiscard]] std::size_t flat_index(const std::array<int, kMaxDim>& idx) const {
        return dim_n() == 1 ? static_cast<std::size_t>(idx[0])
                            : static_cast<std::size_t>(idx[0]) * (n_ + 1) + static_cast<std::size_t>(idx[1]);
    }

    /// Node coordinate written as center + halfwidth (2i - n)/n so that grids
    /// on symmetric boxes are exactly mirror symmetric.
    [[nodiscard]] double node_coordinate(int axis, int i) const {
        const double lo = domain_.box_lo()[axis], hi = domain_.box_hi()[axis];
        if (i == 0) return lo;
        if (i == n_) return hi;
        return 0.5 * (lo + hi) + 0.5 * (hi - lo) * (static_cast<double>(2 * i - n_) / n_);
    }

    /// Multilinear interpolation weights for y. Returns the number of
    /// corners with nonzero weight, or -1 if y lies outside the box.
    int stencil(const Point& y, std::array<std::size_t, 4>& idx, std::array<double, 4>& wt) const {
        const int d = dim_n();
        int cell[kMaxDim] = {};
        double t[kMaxDim] = {};
        for (int i = 0; i < d; ++i) {
            const double lo = domain_.box_lo()[i], hi = domain_.box_hi()[i];
            if (!(y[i] >= lo && y[i] <= hi)) return -1;
            const auto& ax = axis_[i];
            int c = std::min(static_cast<int>((y[i] - lo) * inv_h_[i]), n_ - 1);
            while (c > 0 && y[i] < ax[c]) --c;
            while (c < n_ - 1 && y[i] >= ax[c + 1]) ++c;
            cell[i] = c;
            t[i] = y[i] == ax[c + 1] ? 1.0 : (y[i] - ax[c]) / (ax[c + 1] - ax[c]);
        }
        int count = 0;
        const int corners = 1 << d;
        for (int mask = 0; mask < corners; ++mask) {
            double w = 1.0;
            std::array<int, kMaxDim> node{};
            for (int i = 0; i < d; ++i) {
                const bool up = (mask >> i) & 1;
                w *= up ? t[i] : 1.0 - t[i];
                node[i] = cell[i] + (up ? 1 : 0);
            }
            if (w == 0.0) continue;
            idx[count] = flat_index(node);
            wt[count] = w;
            ++count;
        }
        return count;
    }

    [[nodiscard]] bool on_box_edge(std::size_t k) const {
        const auto idx = multi_index(k);
        for (int i = 0; i < dim_n(); ++i)
            if (idx[i] == 0 || idx[i] == n_) return true;
        return false;
    }

private:
    Domain domain_;
    int n_;
    std::array<double, kMaxDim> h_{};
    std::array<double, kMaxDim> inv_h_{};
    std::size_t size_ = 0;
    std::array<std::vector<double>, kMaxDim> axis_;
    std::vector<Point> coords_;
    std::vector<unsigned char> in_omega_;
    std::vector<std::size_t> omega_nodes_;
    std::size_t truncated_ = 0;
};

/// Jet pair (p, X) at a node.
struct Differentials {
    Point p;
    SmallMatrix X;
};

/// Nodal values on a grid. Outside the box the field reads `exterior`,
/// which defaults to the Dirichlet data g.
class GridField {
public:
    explicit GridField(std::shared_ptr<const Grid> grid)
        : grid_(std::move(grid)), values_(grid_->size(), 0.0), exterior_(grid_->domain().g()) {
        refresh_exterior();
    }

    GridField(std::shared_ptr<const Grid> grid, std::vector<double> values, ScalarField exterior)
        : grid_(std::move(grid)), values_(std::move(values)), exterior_(std::move(exterior)) {
        if (values_.size() != grid_->size()) throw DimensionMismatch("field size does not match grid");
    }

    /// Samples `f` at every node; the exterior reads `f` as well.
    static GridField from_function(std::shared_ptr<const Grid> grid, const ScalarField& f) {
        std::vector<double> v(grid->size());
        for (std::size_t k = 0; k < v.size(); ++k) v[k] = f(grid->coord(k));
        return GridField(std::move(grid), std::move(v), f);
    }

    /// Omega nodes from `u`, complement nodes and outside-box reads from g.
    static GridField with_dirichlet(std::shared_ptr<const Grid> grid, const ScalarField& u) {
        GridField out(grid);
        for (std::size_t k : grid->omega_nodes()) out.values_[k] = u(grid->coord(k));
        return out;
    }

    static GridField constant(std::shared_ptr<const Grid> grid, double c) {
        return GridField(grid, std::vector<double>(grid->size(), c), ScalarField::constant(c));
    }

    [[nodiscard]] const Grid& grid() const { return *grid_; }
    [[nodiscard]] const std::shared_ptr<const Grid>& grid_ptr() const { return grid_; }
    [[nodiscard]] const std::vector<double>& values() const { return values_; }
    std::vector<double>& values() { return values_; }
    double& operator[](std::size_t k) { return values_[k]; }
    double operator[](std::size_t k) const { return values_[k]; }
    [[nodiscard]] const ScalarField& exterior() const { return exterior_; }
    void set_exterior(ScalarField e) { exterior_ = std::move(e); }

    /// Resets every complement node to g and points the exterior at g.
    void refresh_exterior() {
        const auto& g = grid_->domain().g();
        for (std::size_t k = 0; k < values_.size(); ++k)
            if (!grid_->in_omega(k)) values_[k] = g(grid_->coord(k));
        exterior_ = g;
    }

    [[nodiscard]] double sup_norm() const {
        double m = 0.0;
        for (double v : values_) m = std::max(m, std::abs(v));
        return m;
    }

    /// Multilinear interpolation inside the box, exterior(y) outside.
    [[nodiscard]] double sample_extended(const Point& y) const {
        const Grid& G = *grid_;
        const int d = G.dim_n();
        const int n = G.n_cells();
        int cell[kMaxDim] = {};
        double t[kMaxDim] = {};
        for (int i = 0; i < d; ++i) {
            const double lo = G.domain().box_lo()[i], hi = G.domain().box_hi()[i];
            if (!(y[i] >= lo && y[i] <= hi)) return exterior_(y);
            const auto& ax = G.axis(i);
            int c = std::min(static_cast<int>((y[i] - lo) * G.inv_h(i)), n - 1);
            // The guess can be off by one where rounding straddles a node.
            while (c > 0 && y[i] < ax[c]) --c;
            while (c < n - 1 && y[i] >= ax[c + 1]) ++c;
            cell[i] = c;
            t[i] = y[i] == ax[c + 1] ? 1.0 : (y[i] - ax[c]) / (ax[c + 1] - ax[c]);
        }
        if (d == 1) return lerp(values_[cell[0]], values_[cell[0] + 1], t[0]);
        const std::size_t row = static_cast<std::size_t>(n) + 1;
        const std::size_t k00 = static_cast<std::size_t>(cell[0]) * row + static_cast<std::size_t>(cell[1]);
        const double a = lerp(values_[k00], values_[k00 + 1], t[1]);
        const double b = lerp(values_[k00 + row], values_[k00 + row + 1], t[1]);
        return lerp(a, b, t[0]);
    }

    /// Exact at t = 0 and t = 1, reproduces constants, weights (1-t, t) >= 0.
    static double lerp(double a, double b, double t) { return t == 1.0 ? b : a + t * (b - a); }

private:
    std::shared_ptr<const Grid> grid_;
    std::vector<double> values_;
    ScalarField exterior_;
};

/// Central differences; 4-point stencil for the mixed derivative.
inline Differentials gradient_hessian(const GridField& u, std::size_t k) {
    const Grid& G = u.grid();
    if (G.on_box_edge(k)) throw IndexOnBoxEdge("node " + std::to_string(k) + " lies on the box edge");
    const int d = G.dim_n();
    Differentials out{Point(d), SmallMatrix(d, d)};
    const double c = u[k];
    for (int i = 0; i < d; ++i) {
        const std::size_t s = G.stride(i);
        const double up = u[k + s], dn = u[k - s];
        out.p[i] = (up - dn) * (0.5 * G.inv_h(i));
        out.X(i, i) = (up - 2.0 * c + dn) * (G.inv_h(i) * G.inv_h(i));
    }
    if (d == 2) {
        const std::size_t s0 = G.stride(0), s1 = G.stride(1);
        const double xy = (u[k + s0 + s1] - u[k + s0 - s1] - u[k - s0 + s1] + u[k - s0 - s1]) *
                          (0.25 * G.inv_h(0) * G.inv_h(1));
        out.X(0, 1) = out.X(1, 0) = xy;
    }
    return out;
}

inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// CSV with header "x0[,x1],u", one node per row in flat-index order.
inline void write_csv(std::ostream& os, const GridField& u) {
    const Grid& G = u.grid();
    os << (G.dim_n() == 1 ? "x0,u\n" : "x0,x1,u\n");
    for (std::size_t k = 0; k < G.size(); ++k) {
        const Point& x = G.coord(k);
        for (int i = 0; i < G.dim_n(); ++i) os << format_double(x[i]) << ',';
        os << format_double(u[k]) << '\n';
    }
}

}  // namespace levy
