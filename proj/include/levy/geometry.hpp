#pragma once

#include <algorithm>
#include <array>
#include <cassert>
#include <cmath>
#include <initializer_list>
#include <span>

#include "levy/errors.hpp"

namespace levy {

/// State and jump-parameter dimensions are capped at two.
inline constexpr int kMaxDim = 2;

/// Fixed-capacity vector in R^d, d <= kMaxDim. Lives on the stack so the
/// operator inner loops never allocate.
struct Point {
    std::array<double, kMaxDim> c{};
    int dim = 1;

    Point() = default;
    explicit Point(int d) : dim(d) { assert(d >= 1 && d <= kMaxDim); }
    Point(std::initializer_list<double> values) : dim(static_cast<int>(values.size())) {
        assert(dim >= 1 && dim <= kMaxDim);
        int i = 0;
        for (double v : values) c[i++] = v;
    }
    static Point from_span(std::span<const double> values) {
        if (values.empty() || values.size() > kMaxDim) {
            throw DimensionMismatch("point dimension " + std::to_string(values.size()) +
                                    " outside [1, 2]");
        }
        Point p(static_cast<int>(values.size()));
        for (int i = 0; i < p.dim; ++i) p.c[i] = values[i];
        return p;
    }
    static Point zero(int d) { return Point(d); }

    double& operator[](int i) { return c[i]; }
    double operator[](int i) const { return c[i]; }
    [[nodiscard]] std::span<const double> span() const { return {c.data(), static_cast<std::size_t>(dim)}; }

    [[nodiscard]] double norm2() const {
        double s = 0.0;
        for (int i = 0; i < dim; ++i) s += c[i] * c[i];
        return s;
    }
    [[nodiscard]] double norm() const { return std::sqrt(norm2()); }

    Point& operator+=(const Point& o) {
        for (int i = 0; i < dim; ++i) c[i] += o.c[i];
        return *this;
    }
    Point& operator-=(const Point& o) {
        for (int i = 0; i < dim; ++i) c[i] -= o.c[i];
        return *this;
    }
    Point& operator*=(double s) {
        for (int i = 0; i < dim; ++i) c[i] *= s;
        return *this;
    }
    friend Point operator+(Point a, const Point& b) { return a += b; }
    friend Point operator-(Point a, const Point& b) { return a -= b; }
    friend Point operator*(double s, Point a) { return a *= s; }
    friend Point operator*(Point a, double s) { return a *= s; }
    friend bool operator==(const Point& a, const Point& b) {
        if (a.dim != b.dim) return false;
        for (int i = 0; i < a.dim; ++i)
            if (a.c[i] != b.c[i]) return false;
        return true;
    }
};

inline double dot(const Point& a, const Point& b) {
    assert(a.dim == b.dim);
    double s = 0.0;
    for (int i = 0; i < a.dim; ++i) s += a.c[i] * b.c[i];
    return s;
}

/// Dense matrix with at most kMaxDim rows and columns, row-major.
struct SmallMatrix {
    std::array<double, kMaxDim * kMaxDim> a{};
    int rows = 1;
    int cols = 1;

    SmallMatrix() = default;
    SmallMatrix(int r, int c) : rows(r), cols(c) { assert(r <= kMaxDim && c <= kMaxDim); }

    static SmallMatrix identity(int n) {
        SmallMatrix m(n, n);
        for (int i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    double& operator()(int i, int j) { return a[i * kMaxDim + j]; }
    double operator()(int i, int j) const { return a[i * kMaxDim + j]; }

    [[nodiscard]] Point apply(const Point& z) const {
        assert(z.dim == cols);
        Point out(rows);
        for (int i = 0; i < rows; ++i) {
            double s = 0.0;
            for (int j = 0; j < cols; ++j) s += (*this)(i, j) * z.c[j];
            out.c[i] = s;
        }
        return out;
    }

    [[nodiscard]] double trace() const {
        double s = 0.0;
        for (int i = 0; i < std::min(rows, cols); ++i) s += (*this)(i, i);
        return s;
    }

    [[nodiscard]] double frobenius2() const {
        double s = 0.0;
        for (int i = 0; i < rows; ++i)
            for (int j = 0; j < cols; ++j) s += (*this)(i, j) * (*this)(i, j);
        return s;
    }

    [[nodiscard]] bool is_symmetric(double tol) const {
        if (rows != cols) return false;
        for (int i = 0; i < rows; ++i)
            for (int j = i + 1; j < cols; ++j)
                if (std::abs((*this)(i, j) - (*this)(j, i)) > tol) return false;
        return true;
    }

    friend SmallMatrix operator+(SmallMatrix x, const SmallMatrix& y) {
        for (int i = 0; i < x.rows; ++i)
            for (int j = 0; j < x.cols; ++j) x(i, j) += y(i, j);
        return x;
    }
    friend SmallMatrix operator*(double s, SmallMatrix x) {
        for (auto& v : x.a) v *= s;
        return x;
    }
};

/// tr(A^T X A) for X (N x N) and A (N x M).
inline double contract_trace(const SmallMatrix& A, const SmallMatrix& X) {
    assert(X.rows == A.rows && X.cols == A.rows);
    double s = 0.0;
    for (int k = 0; k < A.cols; ++k)
        for (int i = 0; i < A.rows; ++i)
            for (int j = 0; j < A.rows; ++j) s += A(i, k) * X(i, j) * A(j, k);
    return s;
}

/// Surface measure of the unit sphere S^{M-1} in R^M (M = 1: two points).
inline double unit_sphere_measure(int dim_m) {
    switch (dim_m) {
        case 1: return 2.0;
        case 2: return 2.0 * M_PI;
        default: throw DimensionMismatch("sphere measure only for M in {1, 2}");
    }
}

}  // namespace levy
