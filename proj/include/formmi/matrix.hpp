#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "formmi/errors.hpp"
#include "formmi/rng.hpp"

namespace formmi {

// Dense row-major matrix of doubles. All model math is 64-bit.
struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * static_cast<std::size_t>(c), 0.0) {}

    double& operator()(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
    double operator()(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }

    double* row(int r) { return data.data() + static_cast<std::size_t>(r) * cols; }
    const double* row(int r) const { return data.data() + static_cast<std::size_t>(r) * cols; }

    std::size_t size() const { return data.size(); }

    void fill(double v) { std::fill(data.begin(), data.end(), v); }

    void fill_normal(Rng& rng, double mean, double stddev) {
        for (double& x : data) x = rng.normal(mean, stddev);
    }

    bool all_finite() const {
        for (double x : data) {
            if (!std::isfinite(x)) return false;
        }
        return true;
    }

    bool operator==(const Matrix& o) const { return rows == o.rows && cols == o.cols && data == o.data; }
};

// y += A x  (A: m x n, x: n, y: m)
inline void matvec_add(const Matrix& a, const double* x, double* y) {
    for (int r = 0; r < a.rows; ++r) {
        const double* ar = a.row(r);
        double acc = 0.0;
        for (int c = 0; c < a.cols; ++c) acc += ar[c] * x[c];
        y[r] += acc;
    }
}

// y += A^T x  (A: m x n, x: m, y: n)
inline void matvec_t_add(const Matrix& a, const double* x, double* y) {
    for (int r = 0; r < a.rows; ++r) {
        const double* ar = a.row(r);
        const double xr = x[r];
        if (xr == 0.0) continue;
        for (int c = 0; c < a.cols; ++c) y[c] += ar[c] * xr;
    }
}

// G += u v^T  (G: m x n, u: m, v: n)
inline void outer_add(Matrix& g, const double* u, const double* v) {
    for (int r = 0; r < g.rows; ++r) {
        double* gr = g.row(r);
        const double ur = u[r];
        if (ur == 0.0) continue;
        for (int c = 0; c < g.cols; ++c) gr[c] += ur * v[c];
    }
}

inline void assert_finite(const Matrix& m, const std::string& name) {
    if (!m.all_finite()) throw numeric_error("non-finite values in " + name);
}

}  // namespace formmi
