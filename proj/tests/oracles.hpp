// SPDX-License-Identifier: Apache-2.0
#pragma once

// Independent reference implementations used to check the library: naive
// long-double linear algebra, Gaussian elimination, and generic central
// finite differences. Deliberately written in the most obvious way possible
// and kept free of any library code beyond the Matrix container itself.

#include <cmath>
#include <functional>

#include "hpft/linalg.hpp"

namespace oracle {

using hpft::Matrix;
using hpft::Vector;

// Plain triple-loop product with long-double accumulation.
inline Matrix naive_matmul(const Matrix& a, const Matrix& b) {
    Matrix out(a.rows, b.cols);
    for (int i = 0; i < a.rows; ++i)
        for (int j = 0; j < b.cols; ++j) {
            long double acc = 0.0L;
            for (int k = 0; k < a.cols; ++k)
                acc += static_cast<long double>(a(i, k)) * b(k, j);
            out(i, j) = static_cast<double>(acc);
        }
    return out;
}

inline Matrix naive_transpose(const Matrix& a) {
    Matrix out(a.cols, a.rows);
    for (int i = 0; i < a.rows; ++i)
        for (int j = 0; j < a.cols; ++j) out(j, i) = a(i, j);
    return out;
}

// Gaussian elimination with partial pivoting in long double.
inline Vector gauss_solve(const Matrix& a, const Vector& rhs) {
    const int n = a.rows;
    std::vector<std::vector<long double>> m(n, std::vector<long double>(n + 1));
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) m[i][j] = a(i, j);
        m[i][n] = rhs[i];
    }
    for (int col = 0; col < n; ++col) {
        int pivot = col;
        for (int r = col + 1; r < n; ++r)
            if (std::fabs((double)m[r][col]) > std::fabs((double)m[pivot][col])) pivot = r;
        std::swap(m[col], m[pivot]);
        for (int r = col + 1; r < n; ++r) {
            const long double f = m[r][col] / m[col][col];
            for (int j = col; j <= n; ++j) m[r][j] -= f * m[col][j];
        }
    }
    Vector x(n);
    for (int i = n - 1; i >= 0; --i) {
        long double acc = m[i][n];
        for (int j = i + 1; j < n; ++j) acc -= m[i][j] * x[j];
        x[i] = static_cast<double>(acc / m[i][i]);
    }
    return x;
}

inline Vector softmax_ld(const Vector& q) {
    long double mx = q[0];
    for (double v : q) mx = std::max<long double>(mx, v);
    long double sum = 0.0L;
    std::vector<long double> e(q.size());
    for (size_t i = 0; i < q.size(); ++i) {
        e[i] = std::exp(static_cast<long double>(q[i]) - mx);
        sum += e[i];
    }
    Vector out(q.size());
    for (size_t i = 0; i < q.size(); ++i) out[i] = static_cast<double>(e[i] / sum);
    return out;
}

// Central finite difference of a scalar function of one coordinate that the
// caller exposes through get/set accessors.
inline double central_fd(const std::function<double()>& f, const std::function<double()>& get,
                         const std::function<void(double)>& set, double step = 1e-6) {
    const double v0 = get();
    set(v0 + step);
    const double up = f();
    set(v0 - step);
    const double down = f();
    set(v0);
    return (up - down) / (2.0 * step);
}

inline double rel_err(double got, double want) {
    return std::fabs(got - want) / std::max(1.0, std::fabs(want));
}

}  // namespace oracle
